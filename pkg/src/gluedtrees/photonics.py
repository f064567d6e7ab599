"""Waveguide-array tooling: coupling calibration, layout design, ICCD frame
processing, and the heralded anti-correlation parameter.

Units are millimetres for lengths and 1/mm for coupling coefficients.
Calibration constants are lab specific and always come from data.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DesignError, InputFormatError, ParameterError
from .graphs import reduce_to_chain

__all__ = [
    "CouplingModel",
    "WaveguideLayout",
    "Frame",
    "Spot",
    "CoincidenceCounts",
    "SpotOverlapWarning",
    "fit_coupling_model",
    "design_layout",
    "frame_probabilities",
    "hitting_from_frame",
    "render_frame",
    "detect_spots",
    "alpha",
    "read_calibration_csv",
    "read_frame",
    "read_spots_json",
    "read_counts_csv",
    "layout_to_json",
]


class SpotOverlapWarning(UserWarning):
    """Two spot discs share pixels; those pixels go to the nearest center."""


@dataclass(frozen=True)
class CouplingModel:
    """``C(d) = C0 * exp(-d / d0)``."""

    C0: float
    d0: float
    rms_log_residual: float = 0.0

    def __post_init__(self):
        if not (self.C0 > 0 and self.d0 > 0):
            raise ParameterError("C0 and d0 must be positive")

    def coupling(self, spacing):
        return self.C0 * np.exp(-np.asarray(spacing, dtype=float) / self.d0)

    def spacing(self, coupling):
        """Inverse model; raises :class:`DesignError` when ``coupling >= C0``."""
        c = np.asarray(coupling, dtype=float)
        if np.any(c <= 0):
            raise DesignError("target couplings must be positive")
        if np.any(c >= self.C0):
            raise DesignError(
                f"target coupling {float(np.max(c)):.6g}/mm needs a nonpositive spacing "
                f"(C0 = {self.C0:.6g}/mm)")
        return self.d0 * np.log(self.C0 / c)


def fit_coupling_model(samples: Sequence[tuple[float, float]]) -> CouplingModel:
    """Fit ``log C = log C0 - d / d0`` by least squares to ``(spacing, coupling)`` pairs."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise ParameterError("need at least two (spacing, coupling) samples")
    d, c = arr[:, 0], arr[:, 1]
    if np.any(c <= 0):
        raise ParameterError("couplings must be positive")
    if np.unique(d).size < 2:
        raise ParameterError("degenerate calibration: need two distinct spacings")
    y = np.log(c)
    slope, intercept = np.polyfit(d, y, 1)
    if slope >= 0:
        raise ParameterError("calibration data do not decrease with spacing")
    resid = y - (slope * d + intercept)
    return CouplingModel(C0=float(np.exp(intercept)), d0=float(-1.0 / slope),
                         rms_log_residual=float(np.sqrt(np.mean(resid**2))))


@dataclass(frozen=True)
class WaveguideLayout:
    B: int
    n: int
    positions: np.ndarray
    z: float
    center_pair_index: int
    gamma_phys: float
    couplings: np.ndarray

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.positions)

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "n": self.n,
            "gamma_phys": self.gamma_phys,
            "z_mm": self.z,
            "positions_mm": self.positions.tolist(),
            "spacings_mm": self.spacings.tolist(),
            "couplings_per_mm": self.couplings.tolist(),
        }


def design_layout(B: int, n: int, gamma_phys: float, model: CouplingModel,
                  z: float) -> WaveguideLayout:
    """Waveguide positions whose nearest-neighbor couplings equal the chain hoppings.

    Every gap is ``d0 * ln(C0 / C_target)``; the center gap, carrying
    ``B * gamma_phys`` instead of ``sqrt(B) * gamma_phys``, is narrower by
    ``d0 * ln(sqrt(B))``.
    """
    if not z > 0:
        raise ParameterError("sample length z must be positive")
    chain = reduce_to_chain(B, n, gamma_phys)
    target = np.array(chain.off_diagonal)
    gaps = model.spacing(target)
    positions = np.concatenate([[0.0], np.cumsum(gaps)])
    return WaveguideLayout(B=chain.B, n=chain.n, positions=positions, z=float(z),
                           center_pair_index=chain.n, gamma_phys=float(gamma_phys),
                           couplings=model.coupling(gaps))


def layout_to_json(layout: WaveguideLayout) -> str:
    return json.dumps(layout.to_dict(), indent=2) + "\n"


@dataclass(frozen=True)
class Frame:
    intensities: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.intensities, dtype=float)
        if a.ndim != 2:
            raise ParameterError("frame must be a 2-D grid")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ParameterError("frame intensities must be finite and nonnegative")
        object.__setattr__(self, "intensities", a)

    @property
    def height(self) -> int:
        return self.intensities.shape[0]

    @property
    def width(self) -> int:
        return self.intensities.shape[1]


@dataclass(frozen=True)
class Spot:
    x: float
    y: float
    radius: float

    @property
    def center(self) -> tuple[float, float]:
        return (self.x, self.y)


def _spot_masks(frame: Frame, spots: Sequence[Spot]) -> np.ndarray:
    """Integer label per pixel: index of the owning spot, or -1."""
    H, W = frame.height, frame.width
    yy, xx = np.mgrid[0:H, 0:W]
    labels = np.full((H, W), -1, dtype=np.int64)
    best = np.full((H, W), np.inf)
    hits = np.zeros((H, W), dtype=np.int64)
    for k, s in enumerate(spots):
        if not s.radius > 0:
            raise ParameterError(f"spot {k} has nonpositive radius")
        if (s.x - s.radius < -0.5 or s.y - s.radius < -0.5
                or s.x + s.radius > W - 0.5 or s.y + s.radius > H - 0.5):
            raise ParameterError(f"spot {k} disc does not fit inside the {W}x{H} frame")
        dist2 = (xx - s.x) ** 2 + (yy - s.y) ** 2
        inside = dist2 <= s.radius**2
        hits += inside
        closer = inside & (dist2 < best)
        labels[closer] = k
        best[closer] = dist2[closer]
    if np.any(hits > 1):
        warnings.warn(f"{int(np.sum(hits > 1))} pixels lie in more than one spot disc; "
                      "assigned to the nearest center", SpotOverlapWarning, stacklevel=3)
    return labels


def frame_probabilities(frame: Frame, spots: Sequence[Spot]) -> np.ndarray:
    """Sum the intensity inside each spot disc and normalize to one."""
    if len(spots) == 0:
        raise ParameterError("need at least one spot")
    labels = _spot_masks(frame, spots)
    sel = labels >= 0
    sums = np.bincount(labels[sel], weights=frame.intensities[sel], minlength=len(spots))
    total = sums.sum()
    if not total > 0:
        raise ParameterError("total in-spot intensity is zero")
    return sums / total


def hitting_from_frame(frame: Frame, spots: Sequence[Spot], exit_index: int) -> float:
    probs = frame_probabilities(frame, spots)
    if not -len(probs) <= exit_index < len(probs):
        raise ParameterError(f"exit index {exit_index} out of range for {len(probs)} spots")
    return float(probs[exit_index])


def render_frame(weights, width: int, height: int, pitch: float, sigma: float,
                 counts: float = 1e5, rng: np.random.Generator | None = None,
                 margin: float | None = None) -> tuple[Frame, list[Spot]]:
    """Synthetic ICCD frame: one Gaussian spot per waveguide on a horizontal line.

    Spot ``k`` sits at ``x = margin + k * pitch`` on the middle row and holds a
    share ``weights[k]`` of ``counts``. With ``rng`` the pixel values are
    Poisson-sampled. Returns the frame and spots of radius ``3 * sigma``.
    """
    w = np.asarray(weights, dtype=float)
    if margin is None:
        margin = 4 * sigma
    yy, xx = np.mgrid[0:height, 0:width]
    y0 = (height - 1) / 2
    img = np.zeros((height, width))
    spots = []
    norm = 1.0 / (2 * math.pi * sigma**2)
    for k, wk in enumerate(w):
        x0 = margin + k * pitch
        img += counts * wk * norm * np.exp(-((xx - x0) ** 2 + (yy - y0) ** 2) / (2 * sigma**2))
        spots.append(Spot(x0, y0, 3 * sigma))
    if rng is not None:
        img = rng.poisson(img).astype(float)
    return Frame(img), spots


def detect_spots(frame: Frame, count: int, radius: float, min_separation: float | None = None) -> list[Spot]:
    """Experimental: pick the ``count`` brightest local maxima as spot centers.

    Peaks closer than ``min_separation`` (default ``2 * radius``) to a brighter
    one are suppressed. Spots are returned sorted by ``x``.
    """
    from scipy.ndimage import maximum_filter

    sep = 2 * radius if min_separation is None else min_separation
    img = frame.intensities
    local = (img == maximum_filter(img, size=max(3, int(2 * sep) | 1))) & (img > 0)
    ys, xs = np.nonzero(local)
    order = np.argsort(-img[ys, xs], kind="stable")
    chosen: list[tuple[int, int]] = []
    for i in order:
        x, y = int(xs[i]), int(ys[i])
        if all((x - cx) ** 2 + (y - cy) ** 2 >= sep**2 for cx, cy in chosen):
            chosen.append((x, y))
        if len(chosen) == count:
            break
    chosen.sort()
    return [Spot(float(x), float(y), float(radius)) for x, y in chosen]


@dataclass(frozen=True)
class CoincidenceCounts:
    N3: int
    N13: int
    N23: int
    N123: int

    def __post_init__(self):
        vals = (self.N3, self.N13, self.N23, self.N123)
        if any(int(v) != v or v < 0 for v in vals):
            raise ParameterError("counts must be nonnegative integers")
        if self.N123 > min(self.N13, self.N23):
            raise ParameterError("N123 cannot exceed N13 or N23")
        if max(self.N13, self.N23) > self.N3:
            raise ParameterError("two-fold coincidences cannot exceed the trigger count")


def alpha(counts: CoincidenceCounts) -> tuple[float, float]:
    """Anti-correlation parameter ``N3 * N123 / (N13 * N23)`` and its standard error.

    The error treats each count as an independent Poisson variable and
    propagates to first order.
    """
    N3, N13, N23, N123 = (float(counts.N3), float(counts.N13),
                          float(counts.N23), float(counts.N123))
    if N13 == 0 or N23 == 0:
        raise ParameterError("alpha is undefined when N13 or N23 is zero")
    a = N3 * N123 / (N13 * N23)
    var = ((N123 / (N13 * N23)) ** 2 * N3
           + (N3 / (N13 * N23)) ** 2 * N123
           + (a / N13) ** 2 * N13
           + (a / N23) ** 2 * N23)
    return a, math.sqrt(var)


# --- file readers -----------------------------------------------------------

def _read_csv_rows(path, expected_header):
    path = Path(path)
    text = path.read_text()
    rows = []
    reader = csv.reader(text.splitlines())
    header = None
    for lineno, row in enumerate(reader, start=1):
        if not row or row[0].strip().startswith("#"):
            continue
        if header is None:
            header = [h.strip() for h in row]
            if header != expected_header:
                raise InputFormatError(
                    f"expected header {','.join(expected_header)}, got {','.join(header)}",
                    path, lineno)
            continue
        if len(row) != len(expected_header):
            raise InputFormatError(f"expected {len(expected_header)} fields, got {len(row)}",
                                   path, lineno)
        rows.append((lineno, [f.strip() for f in row]))
    if header is None:
        raise InputFormatError("file is empty", path)
    return rows


def read_calibration_csv(path) -> list[tuple[float, float]]:
    """Rows of ``spacing_mm,coupling_per_mm``."""
    out = []
    for lineno, row in _read_csv_rows(path, ["spacing_mm", "coupling_per_mm"]):
        try:
            out.append((float(row[0]), float(row[1])))
        except ValueError:
            raise InputFormatError("non-numeric value", path, lineno) from None
    return out


def read_counts_csv(path) -> list[CoincidenceCounts]:
    """Rows of ``N3,N13,N23,N123``."""
    out = []
    for lineno, row in _read_csv_rows(path, ["N3", "N13", "N23", "N123"]):
        try:
            vals = [int(v) for v in row]
        except ValueError:
            raise InputFormatError("counts must be integers", path, lineno) from None
        try:
            out.append(CoincidenceCounts(*vals))
        except ParameterError as exc:
            raise InputFormatError(str(exc), path, lineno) from None
    return out


def _read_pgm(path: Path, data: bytes) -> np.ndarray:
    # header tokens: magic, width, height, maxval; comments start with '#'
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and chr(data[pos]).isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not chr(data[pos]).isspace():
            pos += 1
        if start == pos:
            raise InputFormatError("truncated PGM header", path)
        tokens.append(data[start:pos].decode("ascii", "replace"))
    magic = tokens[0]
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise InputFormatError("bad PGM header", path) from None
    if magic == "P5":
        pos += 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos) \
            if len(data) - pos >= width * height * dtype.itemsize else None
        if raw is None:
            raise InputFormatError("PGM pixel data truncated", path)
        return raw.reshape(height, width).astype(float)
    if magic == "P2":
        vals = data[pos:].split()
        if len(vals) < width * height:
            raise InputFormatError("PGM pixel data truncated", path)
        return np.array([int(v) for v in vals[:width * height]], dtype=float).reshape(height, width)
    raise InputFormatError(f"unsupported PGM magic {magic!r}", path, 1)


def read_frame(path) -> Frame:
    """Load an ASCII intensity grid (whitespace-separated rows) or a PGM image."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] in (b"P2", b"P5"):
        return Frame(_read_pgm(path, data))
    rows = []
    width = None
    for lineno, line in enumerate(data.decode("utf-8", "replace").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            vals = [float(v) for v in line.replace(",", " ").split()]
        except ValueError:
            raise InputFormatError("non-numeric pixel value", path, lineno) from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise InputFormatError(f"row has {len(vals)} values, expected {width}", path, lineno)
        if any(v < 0 for v in vals):
            raise InputFormatError("negative pixel value", path, lineno)
        rows.append(vals)
    if not rows:
        raise InputFormatError("frame file is empty", path)
    return Frame(np.array(rows))


def read_spots_json(path) -> list[Spot]:
    """List of ``{"x": .., "y": .., "radius": ..}`` objects."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if isinstance(doc, dict):
        doc = doc.get("spots", [])
    try:
        return [Spot(float(d["x"]), float(d["y"]), float(d["radius"])) for d in doc]
    except (KeyError, TypeError, ValueError):
        raise InputFormatError("each spot needs numeric x, y and radius", path) from None
