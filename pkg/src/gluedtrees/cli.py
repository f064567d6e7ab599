"""Command-line front end.

Subcommands: ``graph``, ``sweep``, ``scaling``, ``design``, ``frame``, ``alpha``.

Exit codes: 0 success, 2 usage or parameter error, 3 numerical failure,
4 I/O or malformed input. Output files go to ``--output-dir``, falling back
to ``$GLUEDTREES_OUTPUT_DIR`` and then the working directory. A ``--config``
file of ``key = value`` lines supplies defaults for any long option; flags
given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import analysis, graphs, photonics, walks
from .errors import (
    DesignError,
    GenerationError,
    InputFormatError,
    InstanceTooLargeError,
    NumericalError,
    ParameterError,
    SearchError,
)

log = logging.getLogger("gluedtrees")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4
OUTPUT_DIR_ENV = "GLUEDTREES_OUTPUT_DIR"


class UsageError(Exception):
    pass


def parse_int_set(text: str) -> list[int]:
    """``"2..5"`` -> ``[2, 3, 4, 5]``; ``"2,4,8"`` and ``"7"`` also accepted."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..", 1)
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise UsageError(f"empty range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise UsageError(f"cannot parse integer set {text!r}") from None
    if not out:
        raise UsageError(f"empty integer set {text!r}")
    return sorted(set(out))


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputFormatError("expected 'key = value'", path, lineno)
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


# --- SVG ------------------------------------------------------------------

def svg_line_chart(series, xlabel: str, ylabel: str, title: str = "",
                   width: int = 640, height: int = 400, logy: bool = False) -> str:
    """Minimal static line chart. ``series`` is a list of ``(label, xs, ys)``."""
    pad_l, pad_r, pad_t, pad_b = 70, 20, 30, 50
    xs_all = np.concatenate([np.asarray(s[1], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], float) for s in series])
    if logy:
        ys_all = np.log10(np.clip(ys_all, 1e-300, None))
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def px(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def py(y):
        return pad_t + ph - (y - y0) / (y1 - y0) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{pad_l + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="13">{xlabel}</text>',
        f'<text x="16" y="{pad_t + ph / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {pad_t + ph / 2:.1f})">'
        f'{("log10 " if logy else "") + ylabel}</text>',
        f'<text x="{pad_l}" y="{pad_t - 10}" font-size="13">{title}</text>',
    ]
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        parts.append(f'<text x="{px(xv):.1f}" y="{pad_t + ph + 18}" text-anchor="middle" '
                     f'font-size="11">{xv:.4g}</text>')
        parts.append(f'<text x="{pad_l - 6}" y="{py(yv) + 4:.1f}" text-anchor="end" '
                     f'font-size="11">{yv:.4g}</text>')
    for i, (label, xs, ys) in enumerate(series):
        ys = np.asarray(ys, float)
        if logy:
            ys = np.log10(np.clip(ys, 1e-300, None))
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(np.asarray(xs, float), ys))
        color = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{pad_l + pw - 8}" y="{pad_t + 16 + 15 * i}" text-anchor="end" '
                     f'font-size="12" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# --- commands ---------------------------------------------------------------

def _output_dir(args) -> Path:
    d = args.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "."
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _target(args, default_name: str) -> Path:
    if getattr(args, "out", None):
        p = Path(args.out)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p
    return _output_dir(args) / default_name


def cmd_graph(args) -> int:
    spec = graphs.GluedTreeSpec(args.B, args.n, args.seed)
    g = graphs.build_glued_tree(spec)
    path = graphs.save_graph(g, _target(args, f"graph_B{args.B}_n{args.n}_seed{args.seed}.json"))
    print(f"nodes={g.num_nodes} edges={g.num_edges} -> {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.tau_max is None or args.tau_max < 0 or args.tau_step <= 0:
        raise UsageError("empty tau grid: need --tau-max >= 0 and --tau-step > 0")
    taus = walks.tau_grid(args.tau_max, args.tau_step)
    kind = walks.WalkKind.parse(args.kind)
    gamma_phys = args.gamma_phys if args.units == "physical" else None
    if args.units == "physical" and gamma_phys is None:
        raise UsageError("--units physical requires --gamma-phys")
    curve = walks.sweep_curve(kind, args.B, args.n, args.gamma, taus, seed=args.seed,
                              gamma_phys=gamma_phys)
    path = walks.write_curve_csv(curve, _target(args, f"curve_{kind.value}_B{args.B}_n{args.n}.csv"))
    i = curve.argmax()
    print(f"points={curve.times.size} max={curve.values[i]:.6f} at "
          f"{curve.time_label}={curve.times[i]:.6g} final={curve.values[-1]:.6g} -> {path}")
    if args.svg:
        svg = svg_line_chart([(kind.value, curve.times, curve.values)],
                             curve.time_label, "exit probability",
                             f"B={args.B}, n={args.n}")
        Path(args.svg).write_text(svg)
    return EXIT_OK


def cmd_scaling(args) -> int:
    B_set = parse_int_set(args.B)
    n_set = parse_int_set(args.n)
    cfg = analysis.PeakConfig(coarse_step=args.coarse_step, refine_tol=args.refine_tol,
                              tau_max=args.tau_max)
    records = analysis.scaling_sweep(B_set, n_set, args.gamma, cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        analysis.check_monotone_in_n(records)
        fits = analysis.fits_by_branching(records)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _output_dir(args)
    csv_path, json_path = analysis.write_scaling_outputs(records, fits, out)
    print(f"records={len(records)} -> {csv_path}, {json_path}")
    for B, d in fits.items():
        pl, lin = d["power_law"], d["linear_tau_star"]
        if pl is not None:
            print(f"B={B}: p_qw ~ n^{pl.exponent:.4f} (r2={pl.r_squared:.5f}); "
                  f"tau* = {lin.slope:.4f} n + {lin.intercept:.4f} (r2={lin.r_squared:.6f})")
    if args.compare_crw:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["B", "n", "log10_p_qw", "log10_p_crw_stationary"])
        for r in records:
            w.writerow([r.B, r.n, format(np.log10(r.p_star_qw), ".12g"),
                        format(np.log10(r.p_crw_stationary), ".12g")])
        cmp_path = out / "crw_compare.csv"
        cmp_path.write_text(buf.getvalue())
        print(f"half-log comparison -> {cmp_path}")
    if args.svg:
        series = []
        for B in sorted({r.B for r in records}):
            rs = [r for r in records if r.B == B]
            series.append((f"QW B={B}", [r.n for r in rs], [r.p_star_qw for r in rs]))
            if args.compare_crw:
                series.append((f"CRW B={B}", [r.n for r in rs], [r.p_crw_stationary for r in rs]))
        Path(args.svg).write_text(svg_line_chart(series, "n", "optimal hitting efficiency",
                                                 logy=bool(args.compare_crw)))
    return EXIT_OK


def cmd_design(args) -> int:
    model = photonics.fit_coupling_model(photonics.read_calibration_csv(args.calib))
    layout = photonics.design_layout(args.B, args.n, args.gamma_phys, model, args.z)
    path = _target(args, f"layout_B{args.B}_n{args.n}.json")
    path.write_text(photonics.layout_to_json(layout))
    gaps = layout.spacings
    print(f"C0={model.C0:.6g}/mm d0={model.d0:.6g}mm; outer gap={gaps[0]:.6g}mm "
          f"center gap={gaps[layout.center_pair_index]:.6g}mm -> {path}")
    return EXIT_OK


def cmd_frame(args) -> int:
    frame = photonics.read_frame(args.frame)
    if args.spots:
        spots = photonics.read_spots_json(args.spots)
    elif args.detect is not None:
        spots = photonics.detect_spots(frame, args.detect, args.radius)
    else:
        raise UsageError("frame needs --spots FILE or --detect COUNT")
    probs = photonics.frame_probabilities(frame, spots)
    result = {"probabilities": probs.tolist()}
    if args.exit_index is not None:
        result["hitting_efficiency"] = photonics.hitting_from_frame(frame, spots, args.exit_index)
    text = json.dumps(result, indent=2) + "\n"
    if args.out:
        _target(args, "frame.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_alpha(args) -> int:
    rows = photonics.read_counts_csv(args.counts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["N3", "N13", "N23", "N123", "alpha", "stderr"])
    for c in rows:
        a, s = photonics.alpha(c)
        print(f"alpha={a:.3f} +/- {s:.3f}  (N3={c.N3} N13={c.N13} N23={c.N23} N123={c.N123})")
        w.writerow([c.N3, c.N13, c.N23, c.N123, format(a, ".12g"), format(s, ".12g")])
    if args.out:
        _target(args, "alpha.csv").write_text(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gluedtrees",
                                description="Walks on central-random glued trees.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command")

    def common(sp):
        sp.add_argument("--config", help="key = value file supplying option defaults")
        sp.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")

    g = sub.add_parser("graph", help="build a glued tree and write it as JSON")
    common(g)
    g.add_argument("--B", type=int, help="branching rate (>= 2)")
    g.add_argument("--n", type=int, help="tree depth (>= 1)")
    g.add_argument("--seed", type=int, default=0, help="gluing seed")
    g.add_argument("--out", help="output file (default: output dir)")
    g.set_defaults(func=cmd_graph, _required=("B", "n"))

    s = sub.add_parser("sweep", help="hitting-efficiency curve as CSV")
    common(s)
    s.add_argument("--kind", default="qw-chain", choices=[k.value for k in walks.WalkKind])
    s.add_argument("--B", type=int, default=2)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--gamma", type=float, default=1.0, help="tree hopping rate")
    s.add_argument("--tau-max", type=float, help="last dimensionless time tau = gamma t")
    s.add_argument("--tau-step", type=float, default=0.01, help="grid spacing in tau")
    s.add_argument("--seed", type=int, default=0, help="gluing seed (full-graph kinds)")
    s.add_argument("--units", choices=["dimensionless", "physical"], default="dimensionless")
    s.add_argument("--gamma-phys", type=float, help="hopping rate per mm; z = tau / gamma_phys")
    s.add_argument("--svg", help="also write a line plot to this SVG file")
    s.add_argument("--out", help="output CSV path")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("scaling", help="optimal hitting efficiency over (B, n) with fits")
    common(c)
    c.add_argument("--B", default="2..5", help="branching rates, e.g. 2..5 or 2,3")
    c.add_argument("--n", default="2..16", help="depths, e.g. 2..16")
    c.add_argument("--gamma", type=float, default=1.0)
    c.add_argument("--coarse-step", type=float, help="peak scan step in tau (default 0.02/sqrt(B))")
    c.add_argument("--refine-tol", type=float, default=1e-9)
    c.add_argument("--tau-max", type=float, help="peak search limit in tau")
    c.add_argument("--compare-crw", action="store_true", help="write half-log QW/CRW table")
    c.add_argument("--svg", help="also write a plot of the optimal efficiencies")
    c.set_defaults(func=cmd_scaling)

    d = sub.add_parser("design", help="waveguide positions realizing the chain couplings")
    common(d)
    d.add_argument("--B", type=int)
    d.add_argument("--n", type=int)
    d.add_argument("--calib", help="CSV spacing_mm,coupling_per_mm")
    d.add_argument("--gamma-phys", type=float, help="tree hopping rate per mm")
    d.add_argument("--z", type=float, help="sample length in mm")
    d.add_argument("--out", help="output JSON path")
    d.set_defaults(func=cmd_design, _required=("B", "n", "calib", "gamma_phys", "z"))

    f = sub.add_parser("frame", help="per-waveguide probabilities from an intensity frame")
    common(f)
    f.add_argument("--frame", help="ASCII grid or PGM file")
    f.add_argument("--spots", help='JSON list of {"x", "y", "radius"}')
    f.add_argument("--detect", type=int, help="experimental: auto-detect this many spots")
    f.add_argument("--radius", type=float, default=5.0, help="radius for --detect")
    f.add_argument("--exit-index", type=int, help="spot index of the exit waveguide")
    f.add_argument("--out", help="also write the result JSON here")
    f.set_defaults(func=cmd_frame, _required=("frame",))

    a = sub.add_parser("alpha", help="anti-correlation parameter from coincidence counts")
    common(a)
    a.add_argument("--counts", help="CSV N3,N13,N23,N123")
    a.add_argument("--out", help="also write a CSV with alpha and stderr")
    a.set_defaults(func=cmd_alpha, _required=("counts",))
    return p


def _config_defaults(parser: argparse.ArgumentParser, argv) -> None:
    """Install ``--config`` values as subcommand defaults so flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    subs = parser._subparsers._group_actions[0].choices  # noqa: SLF001
    if known.command not in subs:
        return
    sub = subs[known.command]
    actions = {a.dest: a for a in sub._actions if a.option_strings}  # noqa: SLF001
    defaults = {}
    for key, raw in read_config(known.config).items():
        key = key.replace("-", "_")
        act = actions.get(key)
        if act is None or key in ("help", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(act, argparse._StoreTrueAction):  # noqa: SLF001
            val = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                val = act.type(raw) if act.type else raw
            except ValueError:
                raise UsageError(f"bad config value for {key}: {raw!r}") from None
            if act.choices is not None and val not in act.choices:
                raise UsageError(f"config value for {key} must be one of {list(act.choices)}")
        defaults[key] = val
    sub.set_defaults(**defaults)


def _check_required(args) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in getattr(args, "_required", ())
               if getattr(args, name, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join(missing))


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _config_defaults(parser, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputFormatError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _check_required(args)
        return args.func(args)
    except (UsageError, ParameterError, DesignError, InstanceTooLargeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, SearchError, GenerationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InputFormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
