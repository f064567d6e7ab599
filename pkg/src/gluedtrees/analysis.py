"""Peak location, scaling sweeps and scaling-law fits."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ParameterError, SearchError
from .graphs import node_count, reduce_to_chain
from .walks import ChainPropagator, crw_hitting_lumped

__all__ = [
    "PeakResult",
    "PeakConfig",
    "ScalingRecord",
    "FitResult",
    "golden_section_max",
    "find_first_peak",
    "chain_peak",
    "scaling_sweep",
    "fit_power_law",
    "fit_linear",
    "enhancement_ratio",
    "check_monotone_in_n",
    "records_to_csv",
    "fits_by_branching",
    "MonotonicityWarning",
]

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI2 = (3 - math.sqrt(5)) / 2

# values at or below this floor are treated as zero when looking for a rise;
# the exit amplitude is ~1e-30 before the wavefront arrives and roundoff
# there would otherwise look like a peak
DEFAULT_NOISE_FLOOR = 1e-9


class MonotonicityWarning(UserWarning):
    """An observed trend does not hold for some computed records."""


@dataclass(frozen=True)
class PeakResult:
    tau_star: float
    p_star: float
    bracket: tuple[float, float]
    refinement_iterations: int


@dataclass(frozen=True)
class PeakConfig:
    """Peak-search settings.

    ``coarse_step=None`` picks ``0.02 / sqrt(B)`` in dimensionless time;
    ``tau_max=None`` picks ``4 * (2n + 2) + 10``.
    """

    coarse_step: float | None = None
    refine_tol: float = 1e-9
    tau_max: float | None = None
    noise_floor: float = DEFAULT_NOISE_FLOOR

    def step_for(self, B: int) -> float:
        return self.coarse_step if self.coarse_step is not None else 0.02 / math.sqrt(B)

    def tau_max_for(self, n: int) -> float:
        return self.tau_max if self.tau_max is not None else 4.0 * (2 * n + 2) + 10.0


def golden_section_max(f: Callable[[float], float], a: float, b: float, tol: float):
    """Shrink ``[a, b]`` around a maximum of unimodal ``f`` until ``b - a <= tol``.

    Returns ``(x, f(x), iterations)`` with ``x`` the best probe seen.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)
    it = 0
    while h > tol:
        it += 1
        if yc >= yd:
            b, d, yd = d, c, yc
            h = b - a
            c = a + INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = b - a
            d = a + INV_PHI * h
            yd = f(d)
    if yc >= yd:
        return c, yc, it
    return d, yd, it


def find_first_peak(evaluator: Callable[[float], float], coarse_step: float,
                    refine_tol: float = 1e-9, tau_max: float = 100.0,
                    noise_floor: float = DEFAULT_NOISE_FLOOR) -> PeakResult:
    """Locate the first local maximum of ``evaluator`` on ``tau >= 0``.

    The curve is sampled at ``0, h, 2h, ...``; the first sample that rose
    above its predecessor (and above ``noise_floor``) and is not exceeded by
    its successor brackets the peak, which is then refined by golden-section
    search to ``refine_tol``.

    Raises
    ------
    SearchError
        If no peak is bracketed before ``tau_max``.
    """
    if not coarse_step > 0:
        raise ParameterError("coarse_step must be positive")
    if not refine_tol > 0:
        raise ParameterError("refine_tol must be positive")
    h = float(coarse_step)
    steps = int(math.floor(tau_max / h)) + 1
    prev = evaluator(0.0)
    cur = evaluator(h)
    rising = cur > prev and cur > noise_floor
    for k in range(2, steps + 1):
        nxt = evaluator(k * h)
        if rising and nxt <= cur:
            lo, hi = (k - 2) * h, k * h
            tau, p, it = golden_section_max(evaluator, lo, hi, refine_tol)
            if cur > p:
                tau, p = (k - 1) * h, cur
            return PeakResult(float(tau), float(p), (lo, hi), it)
        if nxt > cur and nxt > noise_floor:
            rising = True
        elif nxt < cur:
            rising = False
        prev, cur = cur, nxt
    raise SearchError(f"no peak found for tau <= {tau_max} (step {h})")


def chain_peak(B: int, n: int, gamma: float = 1.0,
               config: PeakConfig = PeakConfig()) -> PeakResult:
    """First hitting peak of the chain quantum walk."""
    prop = ChainPropagator(reduce_to_chain(B, n, gamma))
    return find_first_peak(prop.hitting, config.step_for(B), config.refine_tol,
                           config.tau_max_for(n), config.noise_floor)


@dataclass(frozen=True)
class ScalingRecord:
    B: int
    n: int
    tau_star: float
    p_star_qw: float
    p_crw_at_tau_star: float
    p_crw_stationary: float
    enhancement_ratio: float = field(default=float("nan"))

    def __post_init__(self):
        if math.isnan(self.enhancement_ratio):
            object.__setattr__(self, "enhancement_ratio",
                               self.p_star_qw / self.p_crw_stationary)


def enhancement_ratio(record: ScalingRecord) -> float:
    """QW first-peak value over the CRW stationary exit probability."""
    return record.p_star_qw / record.p_crw_stationary


def scaling_sweep(B_set: Iterable[int], n_set: Iterable[int], gamma: float = 1.0,
                  peak_config: PeakConfig = PeakConfig(), max_n: int = 64) -> list[ScalingRecord]:
    """One :class:`ScalingRecord` per ``(B, n)``, ordered by ``B`` then ``n``."""
    B_list = sorted(set(int(b) for b in B_set))
    n_list = sorted(set(int(k) for k in n_set))
    if not B_list or not n_list:
        raise ParameterError("B_set and n_set must be nonempty")
    if n_list[-1] > max_n:
        raise ParameterError(f"n={n_list[-1]} exceeds the configured maximum {max_n}")
    records = []
    for B in B_list:
        for n in n_list:
            peak = chain_peak(B, n, gamma, peak_config)
            records.append(ScalingRecord(
                B=B, n=n, tau_star=peak.tau_star, p_star_qw=peak.p_star,
                p_crw_at_tau_star=crw_hitting_lumped(B, n, gamma, peak.tau_star),
                p_crw_stationary=1.0 / node_count(B, n)))
    return records


def check_monotone_in_n(records: Sequence[ScalingRecord]) -> list[tuple[int, int]]:
    """Warn about ``(B, n)`` where the QW peak increased with ``n``.

    Returns the offending pairs; this is a trend check, never an error.
    """
    bad = []
    by_b: dict[int, list[ScalingRecord]] = {}
    for r in records:
        by_b.setdefault(r.B, []).append(r)
    for B, rs in by_b.items():
        rs = sorted(rs, key=lambda r: r.n)
        for a, b in zip(rs, rs[1:]):
            if b.p_star_qw > a.p_star_qw:
                bad.append((B, b.n))
    if bad:
        warnings.warn(f"optimal hitting efficiency not monotone in n at {bad}",
                      MonotonicityWarning, stacklevel=2)
    return bad


@dataclass(frozen=True)
class FitResult:
    """``power_law``: ``p = prefactor * n**exponent``; ``linear``: ``y = slope*x + intercept``."""

    model: str
    slope: float
    intercept: float
    r_squared: float
    num_points: int

    @property
    def exponent(self) -> float:
        return self.slope

    @property
    def prefactor(self) -> float:
        return math.exp(self.intercept) if self.model == "power_law" else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.model == "power_law":
            d = {"model": self.model, "exponent": self.slope, "prefactor": self.prefactor,
                 "r_squared": self.r_squared, "num_points": self.num_points}
        return d


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.sum((y - ym) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, intercept, min(max(r2, 0.0), 1.0)


def fit_linear(xs, ys) -> FitResult:
    """Ordinary least-squares line through ``(xs, ys)``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("xs and ys must be 1-D and equally long")
    if x.size < 3:
        raise ParameterError("linear fit needs at least 3 points")
    if np.all(x == x[0]):
        raise ParameterError("degenerate fit: all x values are equal")
    slope, intercept, r2 = _ols(x, y)
    return FitResult("linear", slope, intercept, r2, int(x.size))


def fit_power_law(ns, ps) -> FitResult:
    """Least-squares fit of ``log p`` against ``log n``."""
    x = np.asarray(ns, dtype=float)
    y = np.asarray(ps, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("ns and ps must be 1-D and equally long")
    if x.size < 3:
        raise ParameterError("power-law fit needs at least 3 points")
    if np.any(y <= 0) or np.any(x <= 0):
        raise ParameterError("power-law fit needs strictly positive values")
    if np.all(x == x[0]):
        raise ParameterError("degenerate fit: all n values are equal")
    slope, intercept, r2 = _ols(np.log(x), np.log(y))
    return FitResult("power_law", slope, intercept, r2, int(x.size))


def fits_by_branching(records: Sequence[ScalingRecord]) -> dict:
    """Power-law fit of ``p_star_qw`` and linear fit of ``tau_star`` vs ``n`` per ``B``.

    Groups with fewer than three depths are skipped with a warning and
    reported as ``None``.
    """
    out: dict = {}
    by_b: dict[int, list[ScalingRecord]] = {}
    for r in records:
        by_b.setdefault(r.B, []).append(r)
    for B in sorted(by_b):
        rs = sorted(by_b[B], key=lambda r: r.n)
        ns = [r.n for r in rs]
        if len(set(ns)) < 3:
            warnings.warn(f"B={B}: {len(set(ns))} distinct depths (< 3), fits skipped", stacklevel=2)
            out[B] = {"power_law": None, "linear_tau_star": None}
            continue
        out[B] = {
            "power_law": fit_power_law(ns, [r.p_star_qw for r in rs]),
            "linear_tau_star": fit_linear(ns, [r.tau_star for r in rs]),
        }
    return out


_CSV_HEADER = ["B", "n", "tau_star", "p_qw", "p_crw_at_tau_star", "p_crw_stationary", "ratio"]


def records_to_csv(records: Sequence[ScalingRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CSV_HEADER)
    g = lambda x: format(float(x), ".12g")  # noqa: E731
    for r in records:
        w.writerow([r.B, r.n, g(r.tau_star), g(r.p_star_qw), g(r.p_crw_at_tau_star),
                    g(r.p_crw_stationary), g(r.enhancement_ratio)])
    return buf.getvalue()


def fits_to_json(fits: dict) -> str:
    doc = {}
    for B, d in fits.items():
        doc[str(B)] = {k: (None if v is None else v.to_dict()) for k, v in d.items()}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_scaling_outputs(records: Sequence[ScalingRecord], fits: dict, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "scaling.csv"
    json_path = out_dir / "fits.json"
    csv_path.write_text(records_to_csv(records))
    json_path.write_text(fits_to_json(fits))
    return csv_path, json_path
