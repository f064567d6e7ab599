"""Quantum and classical walks on glued trees and their reduced chains.

Time is dimensionless throughout: ``tau = gamma * t``. Every evolution below
therefore depends on ``gamma`` only through the operator scaling, and the
hitting probabilities are gamma-invariant at fixed ``tau``.

Hitting efficiency is the occupation probability of the exit node at ``tau``
(no absorbing boundary).
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InstanceTooLargeError, ParameterError
from .graphs import (
    MAX_FULL_NODES,
    ChainHamiltonian,
    GluedTreeGraph,
    GluedTreeSpec,
    build_glued_tree,
    column_sizes,
    reduce_to_chain,
)
from .linalg import (
    DEFAULT_KRYLOV_TOL,
    EigenSystem,
    SparseSymmetric,
    SymTridiagonal,
    eigh_tridiagonal,
    expm_action_eigen,
    expm_action_krylov,
)

__all__ = [
    "WalkKind",
    "HittingCurve",
    "CrwGenerator",
    "ChainPropagator",
    "qw_hitting_chain",
    "qw_distribution_full",
    "crw_generator",
    "crw_distribution_full",
    "lumped_crw_operator",
    "crw_hitting_lumped",
    "crw_lumped_distribution",
    "sweep_curve",
    "tau_grid",
    "curve_to_csv",
    "write_curve_csv",
]


class WalkKind(enum.Enum):
    QW_CHAIN = "qw-chain"
    QW_FULL = "qw-full"
    CRW_FULL = "crw-full"
    CRW_LUMPED = "crw-lumped"

    @classmethod
    def parse(cls, value) -> "WalkKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ParameterError(f"unknown walk kind {value!r}; choose from "
                             + ", ".join(k.value for k in cls))


def _check_tau(tau):
    if not (np.isfinite(tau) and tau >= 0):
        raise ParameterError(f"tau must be finite and >= 0, got {tau!r}")
    return float(tau)


def _check_gamma(gamma):
    if not (np.isfinite(gamma) and gamma > 0):
        raise ParameterError(f"gamma must be positive, got {gamma!r}")
    return float(gamma)


class ChainPropagator:
    """Diagonalized chain; evaluates exit amplitudes at many times cheaply.

    The chain entries carry a factor ``gamma``, so the propagator uses
    ``t = tau / gamma``.
    """

    def __init__(self, chain: ChainHamiltonian):
        self.chain = chain
        self.eigensystem: EigenSystem = eigh_tridiagonal(chain)
        V = self.eigensystem.eigenvectors
        self._rate = self.eigensystem.eigenvalues / chain.gamma
        self._weights = V[0, :] * V[-1, :]

    def state(self, tau: float) -> np.ndarray:
        e0 = np.zeros(self.chain.size)
        e0[0] = 1.0
        return expm_action_eigen(self.eigensystem, -1j, _check_tau(tau) / self.chain.gamma, e0)

    def hitting(self, tau):
        """Exit probability; accepts a scalar or an array of ``tau``."""
        tau_arr = np.asarray(tau, dtype=float)
        amp = np.exp(-1j * np.multiply.outer(tau_arr, self._rate)) @ self._weights
        p = np.abs(amp) ** 2
        # exact zero at the start; entrance and exit are distinct sites
        p = np.where(tau_arr == 0, 0.0, p)
        return float(p) if p.ndim == 0 else p

    __call__ = hitting


def qw_hitting_chain(chain: ChainHamiltonian, tau: float) -> float:
    """Exit-site probability of the chain quantum walk started at the entrance site."""
    _check_tau(tau)
    psi = ChainPropagator(chain).state(tau)
    return float(abs(psi[-1]) ** 2)


def _check_budget(graph: GluedTreeGraph, max_nodes: int):
    if graph.num_nodes > max_nodes:
        raise InstanceTooLargeError(
            f"graph has {graph.num_nodes} nodes, above the full-graph budget of {max_nodes}")


def _entrance_vector(graph: GluedTreeGraph, dtype) -> np.ndarray:
    v = np.zeros(graph.num_nodes, dtype=dtype)
    v[graph.entrance] = 1.0
    return v


def qw_distribution_full(graph: GluedTreeGraph, gamma: float, tau: float,
                         tol: float = DEFAULT_KRYLOV_TOL,
                         max_nodes: int = MAX_FULL_NODES) -> np.ndarray:
    """Node probabilities of the quantum walk with ``H = gamma * A`` at ``tau``."""
    _check_gamma(gamma)
    tau = _check_tau(tau)
    _check_budget(graph, max_nodes)
    psi = expm_action_krylov(graph.adjacency(), -1j, tau, _entrance_vector(graph, complex), tol=tol)
    return np.abs(psi) ** 2


@dataclass(frozen=True)
class CrwGenerator:
    """Rate matrix ``gamma * (A - D)`` of the continuous-time random walk."""

    operator: SparseSymmetric
    gamma: float

    @property
    def dimension(self) -> int:
        return self.operator.dimension


def crw_generator(graph: GluedTreeGraph, gamma: float = 1.0) -> CrwGenerator:
    gamma = _check_gamma(gamma)
    A = graph.adjacency().tocsr()
    deg = np.asarray(A.sum(axis=1)).reshape(-1)
    M = gamma * (A - sp.diags(deg))
    return CrwGenerator(SparseSymmetric.from_scipy(M, check=False), gamma)


def crw_distribution_full(graph: GluedTreeGraph, gamma: float, tau: float,
                          tol: float = DEFAULT_KRYLOV_TOL,
                          max_nodes: int = MAX_FULL_NODES) -> np.ndarray:
    """Node distribution of the classical walk started at the entrance."""
    gamma = _check_gamma(gamma)
    tau = _check_tau(tau)
    _check_budget(graph, max_nodes)
    gen = crw_generator(graph, gamma)
    p = expm_action_krylov(gen.operator, 1, tau / gamma, _entrance_vector(graph, float), tol=tol)
    return np.real(p)


def lumped_crw_operator(B: int, n: int, gamma: float = 1.0) -> tuple[SymTridiagonal, np.ndarray]:
    """Symmetrized column-lumped CRW generator.

    The lumped birth-death chain has rates ``B*gamma`` away from either root,
    ``gamma`` towards it, and ``B*gamma`` both ways across the center. It is
    reversible with respect to the column sizes ``N_j``, so
    ``S = N^(1/2) Q N^(-1/2)`` is symmetric tridiagonal. Returns ``(S, N)``.
    """
    gamma = _check_gamma(gamma)
    N = column_sizes(B, n).astype(float)
    m = 2 * n + 2
    fwd = np.empty(m - 1)  # rate j -> j+1
    bwd = np.empty(m - 1)  # rate j+1 -> j
    for j in range(m - 1):
        if j < n:
            fwd[j], bwd[j] = B * gamma, gamma
        elif j == n:
            fwd[j], bwd[j] = B * gamma, B * gamma
        else:
            fwd[j], bwd[j] = gamma, B * gamma
    out = np.zeros(m)
    out[:-1] += fwd
    out[1:] += bwd
    S = SymTridiagonal(-out, np.sqrt(fwd * bwd))
    return S, N


def crw_lumped_distribution(B: int, n: int, gamma: float, tau: float) -> np.ndarray:
    """Column occupation probabilities of the lumped classical walk."""
    tau = _check_tau(tau)
    S, N = lumped_crw_operator(B, n, gamma)
    es = eigh_tridiagonal(S)
    # p(t) = N^(1/2) exp(S t) N^(-1/2) e_0 and N_0 = 1
    e0 = np.zeros(S.size)
    e0[0] = 1.0
    q = np.real(expm_action_eigen(es, 1, tau / gamma, e0))
    return np.sqrt(N) * q


def crw_hitting_lumped(B: int, n: int, gamma: float, tau: float) -> float:
    """Exit-column probability of the lumped classical walk."""
    return float(crw_lumped_distribution(B, n, gamma, tau)[-1])


@dataclass(frozen=True)
class HittingCurve:
    kind: WalkKind
    B: int
    n: int
    gamma: float
    times: np.ndarray
    values: np.ndarray
    physical: bool = False
    gamma_phys: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ParameterError("times and values must be 1-D arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ParameterError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def time_label(self) -> str:
        return "z_mm" if self.physical else "tau"

    def argmax(self) -> int:
        return int(np.argmax(self.values))


def tau_grid(tau_max: float, step: float, tau_min: float = 0.0) -> np.ndarray:
    """Inclusive uniform grid ``tau_min, tau_min+step, ..., tau_max``."""
    if not (step > 0 and np.isfinite(step)):
        raise ParameterError("grid step must be positive")
    if not (np.isfinite(tau_max) and tau_max >= tau_min >= 0):
        raise ParameterError("empty grid: need 0 <= tau_min <= tau_max")
    count = int(np.floor((tau_max - tau_min) / step + 1e-9)) + 1
    return tau_min + step * np.arange(count)


def sweep_curve(kind, B: int, n: int, gamma: float, taus, seed: int = 0,
                gamma_phys: float | None = None, tol: float = DEFAULT_KRYLOV_TOL,
                max_nodes: int = MAX_FULL_NODES) -> HittingCurve:
    """Sample the exit probability of the chosen walk on a grid of ``tau``.

    With ``gamma_phys`` (per mm) given, the reported times are lengths
    ``z = tau / gamma_phys`` in mm.
    """
    kind = WalkKind.parse(kind)
    gamma = _check_gamma(gamma)
    taus = np.asarray(taus, dtype=float).reshape(-1)
    if taus.size == 0:
        raise ParameterError("empty tau grid")
    for t in taus:
        _check_tau(t)
    if kind is WalkKind.QW_CHAIN:
        values = ChainPropagator(reduce_to_chain(B, n, gamma)).hitting(taus)
    elif kind is WalkKind.CRW_LUMPED:
        values = np.array([crw_hitting_lumped(B, n, gamma, t) for t in taus])
    else:
        graph = build_glued_tree(GluedTreeSpec(B, n, seed), max_nodes=max_nodes)
        fn = qw_distribution_full if kind is WalkKind.QW_FULL else crw_distribution_full
        values = np.array([fn(graph, gamma, t, tol=tol, max_nodes=max_nodes)[graph.exit]
                           for t in taus])
    values = np.clip(np.atleast_1d(values), 0.0, 1.0)
    if gamma_phys is not None:
        if not gamma_phys > 0:
            raise ParameterError("gamma_phys must be positive")
        return HittingCurve(kind, B, n, gamma, taus / gamma_phys, values,
                            physical=True, gamma_phys=float(gamma_phys))
    return HittingCurve(kind, B, n, gamma, taus, values)


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def curve_to_csv(curve: HittingCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([curve.time_label, "value"])
    for t, v in zip(curve.times, curve.values):
        w.writerow([_fmt(t), _fmt(v)])
    return buf.getvalue()


def write_curve_csv(curve: HittingCurve, path) -> Path:
    path = Path(path)
    path.write_text(curve_to_csv(curve))
    return path
