import csv
import json

import numpy as np
import pytest

from gluedtrees.cli import main, parse_int_set, svg_line_chart
from gluedtrees.photonics import Frame, Spot, frame_probabilities, hitting_from_frame


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_int_set():
    assert parse_int_set("2..5") == [2, 3, 4, 5]
    assert parse_int_set("4,2,2") == [2, 4]
    assert parse_int_set("7") == [7]


def test_graph_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        code, out, _ = run(capsys, "graph", "--B", 2, "--n", 2, "--seed", 1, "--out", p)
        assert code == 0 and "nodes=14" in out
    assert a.read_bytes() == b.read_bytes()
    assert len(json.loads(a.read_text())["nodes"]) == 14


def test_graph_bad_parameters(tmp_path, capsys):
    code, _, err = run(capsys, "graph", "--B", 1, "--n", 2, "--output-dir", tmp_path)
    assert code == 2 and "error" in err
    code, _, err = run(capsys, "graph", "--n", 2, "--output-dir", tmp_path)
    assert code == 2 and "--B" in err
    code, _, _ = run(capsys, "graph", "--B", "x", "--n", 2)
    assert code == 2


def test_sweep_qw_chain_peak(tmp_path, capsys):
    out_csv = tmp_path / "c.csv"
    code, _, _ = run(capsys, "sweep", "--kind", "qw-chain", "--B", 2, "--n", 2,
                     "--tau-max", 6, "--out", out_csv, "--svg", tmp_path / "c.svg")
    assert code == 0
    rows = read_csv(out_csv)
    assert len(rows) == 601
    assert abs(max(float(r["value"]) for r in rows) - 0.82) < 0.01
    assert (tmp_path / "c.svg").read_text().startswith("<svg")


def test_sweep_crw_lumped_stationary(tmp_path, capsys):
    out_csv = tmp_path / "c.csv"
    code, _, _ = run(capsys, "sweep", "--kind", "crw-lumped", "--B", 2, "--n", 3,
                     "--tau-max", 1000, "--tau-step", 10, "--out", out_csv)
    assert code == 0
    assert abs(float(read_csv(out_csv)[-1]["value"]) - 1 / 30) < 1e-6


def test_sweep_empty_grid(tmp_path, capsys):
    assert run(capsys, "sweep", "--tau-max", -1, "--output-dir", tmp_path)[0] == 2
    assert run(capsys, "sweep", "--output-dir", tmp_path)[0] == 2
    assert run(capsys, "sweep", "--tau-max", 1, "--tau-step", 0, "--output-dir", tmp_path)[0] == 2


def test_sweep_physical_units(tmp_path, capsys):
    out_csv = tmp_path / "c.csv"
    code, _, _ = run(capsys, "sweep", "--tau-max", 1, "--tau-step", 0.5, "--units", "physical",
                     "--gamma-phys", 0.2, "--out", out_csv)
    assert code == 0
    assert [r["z_mm"] for r in read_csv(out_csv)] == ["0", "2.5", "5"]
    assert run(capsys, "sweep", "--tau-max", 1, "--units", "physical",
               "--output-dir", tmp_path)[0] == 2


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("GLUEDTREES_OUTPUT_DIR", str(tmp_path / "env"))
    assert run(capsys, "graph", "--B", 2, "--n", 1)[0] == 0
    assert (tmp_path / "env" / "graph_B2_n1_seed0.json").exists()


def test_scaling_full_table(tmp_path, capsys):
    code, out, _ = run(capsys, "scaling", "--B", "2..5", "--n", "2..16", "--output-dir", tmp_path,
                       "--compare-crw", "--svg", tmp_path / "s.svg")
    assert code == 0
    rows = read_csv(tmp_path / "scaling.csv")
    assert len(rows) == 60
    fits = json.loads((tmp_path / "fits.json").read_text())
    assert set(fits) == {"2", "3", "4", "5"}
    for d in fits.values():
        assert d["power_law"]["exponent"] < 0
    cmp_rows = read_csv(tmp_path / "crw_compare.csv")
    assert len(cmp_rows) == 60
    assert all(float(r["log10_p_qw"]) > float(r["log10_p_crw_stationary"]) for r in cmp_rows)
    first = (tmp_path / "scaling.csv").read_bytes()
    run(capsys, "scaling", "--B", "2..5", "--n", "2..16", "--output-dir", tmp_path)
    assert (tmp_path / "scaling.csv").read_bytes() == first


def test_scaling_ratio_increasing_in_B(tmp_path, capsys):
    assert run(capsys, "scaling", "--B", "2..10", "--n", 4, "--output-dir", tmp_path)[0] == 0
    ratios = [float(r["ratio"]) for r in read_csv(tmp_path / "scaling.csv")]
    assert len(ratios) == 9 and np.all(np.diff(ratios) > 0)


def test_scaling_single_record_skips_fits(tmp_path, capsys):
    code, _, err = run(capsys, "scaling", "--n", "1..1", "--B", "2..2", "--output-dir", tmp_path)
    assert code == 0
    assert len(read_csv(tmp_path / "scaling.csv")) == 1
    assert "fits skipped" in err
    assert json.loads((tmp_path / "fits.json").read_text())["2"]["power_law"] is None


def test_scaling_bad_set(tmp_path, capsys):
    assert run(capsys, "scaling", "--B", "5..2", "--output-dir", tmp_path)[0] == 2


def test_design_layout(tmp_path, capsys):
    calib = tmp_path / "calib.csv"
    d = np.linspace(8, 24, 6)
    calib.write_text("spacing_mm,coupling_per_mm\n"
                     + "".join(f"{float(x)!r},{float(2.0 * np.exp(-x / 8.0))!r}\n" for x in d))
    out = tmp_path / "layout.json"
    code, _, _ = run(capsys, "design", "--B", 4, "--n", 4, "--calib", calib,
                     "--gamma-phys", 0.1, "--z", 30, "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    gaps = np.array(doc["spacings_mm"])
    assert gaps.size == 9 and np.argmin(gaps) == 4
    assert abs(gaps[0] - gaps[4] - 8.0 * np.log(2)) < 1e-9
    code, _, _ = run(capsys, "design", "--B", 4, "--n", 4, "--calib", calib,
                     "--gamma-phys", 5.0, "--z", 30, "--output-dir", tmp_path)
    assert code == 2


def test_alpha_zero(tmp_path, capsys):
    counts = tmp_path / "counts.csv"
    counts.write_text("N3,N13,N23,N123\n100000,500,480,0\n")
    code, out, _ = run(capsys, "alpha", "--counts", counts, "--out", tmp_path / "a.csv")
    assert code == 0 and "alpha=0.000" in out
    assert float(read_csv(tmp_path / "a.csv")[0]["alpha"]) == 0.0


def test_frame_matches_library(tmp_path, capsys):
    rng = np.random.default_rng(3)
    img = rng.random((24, 140))
    spots = [Spot(10 + 20 * i, 12, 8) for i in range(6)]
    f = tmp_path / "f.txt"
    np.savetxt(f, img, fmt="%.17g")
    s = tmp_path / "s.json"
    s.write_text(json.dumps([{"x": p.x, "y": p.y, "radius": p.radius} for p in spots]))
    code, out, _ = run(capsys, "frame", "--frame", f, "--spots", s, "--exit-index", 5)
    assert code == 0
    doc = json.loads(out)
    frame = Frame(np.loadtxt(f))
    assert doc["probabilities"] == frame_probabilities(frame, spots).tolist()
    assert doc["hitting_efficiency"] == hitting_from_frame(frame, spots, 5)
    assert run(capsys, "frame", "--frame", f)[0] == 2


def test_malformed_inputs_report_line(tmp_path, capsys):
    counts = tmp_path / "counts.csv"
    counts.write_text("N3,N13,N23,N123\n1000,10,10,1\n1000,ten,10,1\n")
    code, _, err = run(capsys, "alpha", "--counts", counts)
    assert code == 4 and "counts.csv:3:" in err
    code, _, err = run(capsys, "alpha", "--counts", tmp_path / "missing.csv")
    assert code == 4
    frame = tmp_path / "f.txt"
    frame.write_text("1 2 3\n4 5\n")
    code, _, err = run(capsys, "frame", "--frame", frame, "--detect", 1)
    assert code == 4 and "f.txt:2:" in err


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# batch defaults\nkind = crw-lumped\nB = 2\nn = 3\ntau-max = 1000\n"
                   "tau_step = 100\n")
    out_csv = tmp_path / "c.csv"
    code, _, _ = run(capsys, "sweep", "--config", cfg, "--out", out_csv)
    assert code == 0
    rows = read_csv(out_csv)
    assert len(rows) == 11 and abs(float(rows[-1]["value"]) - 1 / 30) < 1e-6
    code, _, _ = run(capsys, "sweep", "--config", cfg, "--tau-max", 200, "--out", out_csv)
    assert code == 0 and len(read_csv(out_csv)) == 3
    gcfg = tmp_path / "graph.cfg"
    gcfg.write_text("B = 2\nn = 2\nseed = 1\n")
    code, out, _ = run(capsys, "graph", "--config", gcfg, "--output-dir", tmp_path)
    assert code == 0 and "nodes=14" in out


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    assert run(capsys, "sweep", "--config", cfg)[0] == 2
    cfg.write_text("tau_max 5\n")
    code, _, err = run(capsys, "sweep", "--config", cfg)
    assert code == 4 and "bad.cfg:1:" in err
    cfg.write_text("kind = nope\n")
    assert run(capsys, "sweep", "--config", cfg)[0] == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert main(["sweep", "--help"]) == 0
    capsys.readouterr()


def test_svg_line_chart_log():
    svg = svg_line_chart([("a", [1, 2, 3], [1e-3, 1e-2, 1e-1])], "n", "p", logy=True)
    assert svg.startswith("<svg") and "polyline" in svg
