import json
import math
import warnings

import numpy as np
import pytest

from gluedtrees.analysis import (
    MonotonicityWarning,
    PeakConfig,
    ScalingRecord,
    chain_peak,
    check_monotone_in_n,
    enhancement_ratio,
    find_first_peak,
    fit_linear,
    fit_power_law,
    fits_by_branching,
    fits_to_json,
    golden_section_max,
    records_to_csv,
    scaling_sweep,
)
from gluedtrees.errors import ParameterError, SearchError
from gluedtrees.graphs import node_count, reduce_to_chain
from gluedtrees.walks import ChainPropagator

from oracles import grid_first_peak


def test_sin_squared_peak():
    res = find_first_peak(lambda t: math.sin(t) ** 2, 0.05, 1e-10, tau_max=10)
    assert abs(res.tau_star - math.pi / 2) < 1e-7
    assert abs(res.p_star - 1.0) < 1e-14
    lo, hi = res.bracket
    assert lo < res.tau_star < hi
    assert res.refinement_iterations > 0


def test_returns_first_not_global_peak():
    f = lambda t: math.exp(-t) * math.sin(t) ** 2 + (0.9 if t > 8 else 0) * math.sin(t) ** 2  # noqa: E731
    res = find_first_peak(f, 0.01, 1e-9, tau_max=20)
    assert res.tau_star < 3
    grid = np.arange(0, res.bracket[0], 0.01)
    assert max(f(t) for t in grid) <= res.p_star


def test_noise_floor_skips_roundoff_bumps():
    # tiny oscillation well below the floor, then a real bump
    f = lambda t: 1e-20 * (1 + math.sin(40 * t)) + math.exp(-(t - 5) ** 2)  # noqa: E731
    res = find_first_peak(f, 0.01, 1e-9, tau_max=10)
    assert abs(res.tau_star - 5) < 1e-6


def test_no_peak_raises():
    with pytest.raises(SearchError):
        find_first_peak(lambda t: t, 0.1, 1e-6, tau_max=5)
    with pytest.raises(ParameterError):
        find_first_peak(lambda t: t, 0.0, 1e-6)


def test_golden_section_max_quadratic():
    x, fx, it = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0, 1e-10)
    assert abs(x - 0.3) < 1e-8
    assert it >= 45


def test_chain_peak_b2_n2():
    res = chain_peak(2, 2)
    assert abs(res.p_star - 0.82) < 0.01
    # dense-grid oracle
    t_grid, p_grid = grid_first_peak(ChainPropagator(reduce_to_chain(2, 2, 1.0)), 1e-4, 6.0)
    assert abs(res.tau_star - t_grid) < 1e-4
    assert res.p_star >= p_grid - 1e-14


def test_chain_peak_b2_n16_matches_dense_grid():
    refine_tol = 1e-5
    res = chain_peak(2, 16, config=PeakConfig(refine_tol=refine_tol))
    prop = ChainPropagator(reduce_to_chain(2, 16, 1.0))
    lo = res.tau_star - 0.5
    taus = np.arange(lo, res.tau_star + 0.5, 1e-4)
    vals = prop(taus)
    # the coarse bracket holds the first peak, so the grid argmax near it is the oracle
    t_grid = taus[np.argmax(vals)]
    assert abs(res.tau_star - t_grid) <= 10 * refine_tol
    assert res.p_star >= vals.max() - 1e-12
    # and nothing before the bracket beats it
    early = prop(np.arange(0, res.bracket[0], 1e-3))
    assert early.max() <= res.p_star


def test_fit_power_law_examples():
    ns = np.arange(2, 20)
    fit = fit_power_law(ns, ns ** (-2 / 3))
    assert abs(fit.exponent + 2 / 3) < 1e-9
    assert abs(fit.r_squared - 1) < 1e-12
    assert abs(fit.prefactor - 1) < 1e-9
    fit = fit_power_law(ns, np.full(ns.size, 0.3))
    assert abs(fit.exponent) < 1e-12
    with pytest.raises(ParameterError):
        fit_power_law([1, 2, 3], [1, 0, 2])
    with pytest.raises(ParameterError):
        fit_power_law([1, 2], [1, 2])


def test_fit_power_law_on_qw_peaks():
    # frozen from the dense-grid peak oracle: local exponent over n = 8..16
    ns = np.arange(8, 17)
    ps = [chain_peak(2, n).p_star for n in ns]
    fit = fit_power_law(ns, ps)
    assert abs(fit.exponent - (-0.398)) < 0.005
    assert fit.r_squared > 0.99


def test_fit_linear_examples():
    ns = np.arange(1, 10)
    fit = fit_linear(ns, 2 * ns + 1)
    assert abs(fit.slope - 2) < 1e-12 and abs(fit.intercept - 1) < 1e-12
    assert abs(fit.r_squared - 1) < 1e-12
    noisy = (2 * ns + 1).astype(float)
    noisy[4] += 5
    assert fit_linear(ns, noisy).r_squared < fit.r_squared
    with pytest.raises(ParameterError):
        fit_linear([3, 3, 3], [1, 2, 3])
    with pytest.raises(ParameterError):
        fit_linear([1, 2], [1, 2])


def test_tau_star_linear_in_n():
    ns = np.arange(2, 17)
    fit = fit_linear(ns, [chain_peak(2, n).tau_star for n in ns])
    assert fit.r_squared > 0.999
    assert fit.slope > 0


def test_scaling_record_b2_n2():
    (rec,) = scaling_sweep([2], [2])
    assert abs(rec.p_star_qw - 0.82) < 0.01
    assert abs(rec.p_crw_at_tau_star - 0.044) < 0.01
    assert rec.p_crw_stationary == 1 / 14
    assert rec.enhancement_ratio == enhancement_ratio(rec) == rec.p_star_qw * 14


def test_branching_contrast_n16():
    recs = {r.B: r for r in scaling_sweep([2, 5], [16])}
    ratio = recs[5].p_crw_stationary / recs[2].p_crw_stationary
    assert 4.29e-7 / 2 <= ratio <= 4.29e-7 * 2
    assert recs[5].p_star_qw >= 0.5 * recs[2].p_star_qw


def test_enhancement_ratio_trend_n4():
    recs = scaling_sweep(range(2, 11), [4])
    r = np.array([x.enhancement_ratio for x in recs])
    assert np.all(np.diff(r) > 0)
    big = [x for x in recs if x.B >= 6]
    fit = fit_linear(np.log([x.B for x in big]), np.log([x.enhancement_ratio for x in big]))
    assert abs(fit.slope - 3) <= 0.5


def test_synthetic_ratio_one():
    rec = ScalingRecord(B=2, n=1, tau_star=1.0, p_star_qw=0.1, p_crw_at_tau_star=0.05,
                        p_crw_stationary=0.1)
    assert enhancement_ratio(rec) == 1.0


def test_stationary_closed_form_and_determinism():
    a = scaling_sweep([2, 3], [2, 3, 4])
    b = scaling_sweep([3, 2], [4, 3, 2])
    assert a == b
    for r in a:
        assert r.p_crw_stationary == 1 / node_count(r.B, r.n)


def test_monotone_check_warns_not_raises():
    good = scaling_sweep([2], [2, 3, 4, 5])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_monotone_in_n(good) == []
    bad = list(good) + [ScalingRecord(2, 6, 1.0, 0.99, 0.0, 0.01)]
    with pytest.warns(MonotonicityWarning):
        assert check_monotone_in_n(bad) == [(2, 6)]


def test_outputs_format():
    recs = scaling_sweep([2], [2, 3, 4])
    text = records_to_csv(recs)
    assert text.splitlines()[0] == "B,n,tau_star,p_qw,p_crw_at_tau_star,p_crw_stationary,ratio"
    assert len(text.splitlines()) == 4
    fits = fits_by_branching(recs)
    doc = json.loads(fits_to_json(fits))
    assert set(doc["2"]) == {"power_law", "linear_tau_star"}
    assert doc["2"]["power_law"]["num_points"] == 3


def test_fits_skipped_for_short_groups():
    recs = scaling_sweep([2], [1])
    with pytest.warns(UserWarning, match="fits skipped"):
        fits = fits_by_branching(recs)
    assert fits[2]["power_law"] is None


def test_sweep_parameter_errors():
    with pytest.raises(ParameterError):
        scaling_sweep([], [2])
    with pytest.raises(ParameterError):
        scaling_sweep([2], [100])
