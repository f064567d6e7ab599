"""Matrix-exponential engines for the walk simulations.

Two routes are provided:

* :func:`eigh_tridiagonal` + :func:`expm_action_eigen` -- exact spectral
  evaluation for small symmetric tridiagonal operators (the reduced chains).
* :func:`expm_action_krylov` -- Lanczos approximation of ``exp(s*t*A) v`` for
  large sparse symmetric operators (full glued-tree adjacency, CRW generators).

``phase`` selects the flavour of the exponential: ``-1j`` gives the unitary
propagator ``exp(-i A t)``, ``1`` gives the real semigroup ``exp(A t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError, ParameterError

__all__ = [
    "SymTridiagonal",
    "SparseSymmetric",
    "EigenSystem",
    "eigh_tridiagonal",
    "expm_action_eigen",
    "expm_action_krylov",
    "DEFAULT_KRYLOV_TOL",
    "KRYLOV_DIM",
]

DEFAULT_KRYLOV_TOL = 1e-10
KRYLOV_DIM = 30
MAX_KRYLOV_STEPS = 100_000


def _check_phase(phase) -> complex:
    if phase == -1j:
        return -1j
    if phase == 1:
        return 1.0
    raise ParameterError(f"phase must be -1j or 1, got {phase!r}")


@dataclass(frozen=True)
class SymTridiagonal:
    """Real symmetric tridiagonal matrix stored by its two diagonals."""

    diagonal: np.ndarray
    off_diagonal: np.ndarray

    def __post_init__(self):
        d = np.array(self.diagonal, dtype=float).reshape(-1)
        e = np.array(self.off_diagonal, dtype=float).reshape(-1)
        if d.size < 1:
            raise ParameterError("tridiagonal matrix needs at least one row")
        if e.size != d.size - 1:
            raise ParameterError(
                f"off_diagonal must have length {d.size - 1}, got {e.size}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise ParameterError("tridiagonal entries must be finite")
        d.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "off_diagonal", e)

    @property
    def size(self) -> int:
        return self.diagonal.size

    def todense(self) -> np.ndarray:
        return (np.diag(self.diagonal) + np.diag(self.off_diagonal, 1)
                + np.diag(self.off_diagonal, -1))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        out = self.diagonal * v
        out[:-1] += self.off_diagonal * v[1:]
        out[1:] += self.off_diagonal * v[:-1]
        return out

    def norm(self) -> float:
        """Max absolute row sum (an upper bound on the spectral norm)."""
        rows = np.abs(self.diagonal).copy()
        rows[:-1] += np.abs(self.off_diagonal)
        rows[1:] += np.abs(self.off_diagonal)
        return float(rows.max())


class SparseSymmetric:
    """Symmetric sparse operator in compressed-row layout.

    The raw CSR arrays are exposed as ``indptr``, ``indices`` and ``data``;
    products go through :mod:`scipy.sparse`.
    """

    def __init__(self, indptr, indices, data, dimension: int | None = None,
                 check: bool = True):
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        data = np.asarray(data, dtype=float)
        if dimension is None:
            dimension = indptr.size - 1
        if indptr.size != dimension + 1:
            raise ParameterError("indptr length must be dimension + 1")
        self.dimension = int(dimension)
        self._csr = sp.csr_matrix((data, indices, indptr),
                                  shape=(self.dimension, self.dimension))
        self._csr.sort_indices()
        if check:
            diff = abs(self._csr - self._csr.T)
            if diff.nnz and diff.max() > 0.0:
                raise ParameterError("sparse operator is not symmetric")

    @classmethod
    def from_scipy(cls, mat, check: bool = True) -> "SparseSymmetric":
        csr = sp.csr_matrix(mat, dtype=float)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.indptr, csr.indices, csr.data, csr.shape[0], check=check)

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def data(self) -> np.ndarray:
        return self._csr.data

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dimension, self.dimension)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self._csr @ v

    __matmul__ = matvec

    def todense(self) -> np.ndarray:
        return self._csr.toarray()

    def tocsr(self) -> sp.csr_matrix:
        return self._csr.copy()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self._csr.sum(axis=1)).reshape(-1)

    def norm1(self) -> float:
        if self._csr.nnz == 0:
            return 0.0
        return float(abs(self._csr).sum(axis=1).max())

    def __repr__(self):
        return f"SparseSymmetric(dimension={self.dimension}, nnz={self._csr.nnz})"


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues (ascending) and matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.size


def _pythag(a: float, b: float) -> float:
    return math.hypot(a, b)


def eigh_tridiagonal(H: SymTridiagonal, max_sweeps: int | None = None) -> EigenSystem:
    """Diagonalize a symmetric tridiagonal matrix by implicit-shift QL.

    Each eigenvalue is deflated by QL sweeps using the Wilkinson shift taken
    from the trailing 2x2 block of the active window; Givens rotations are
    accumulated into the eigenvector matrix. The total sweep budget defaults
    to ``30 * m``.

    Raises
    ------
    NumericalError
        If the sweep budget is exhausted before every off-diagonal entry
        has been deflated.
    """
    m = H.size
    d = np.array(H.diagonal, dtype=float)
    e = np.zeros(m, dtype=float)
    e[:m - 1] = H.off_diagonal
    z = np.eye(m)
    budget = 30 * m if max_sweeps is None else int(max_sweeps)
    sweeps = 0
    eps = np.finfo(float).eps

    for l in range(m):
        while True:
            # find a negligible off-diagonal element e[mm] at or after l
            mm = l
            while mm < m - 1:
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= eps * dd:
                    break
                mm += 1
            if mm == l:
                break
            if sweeps >= budget:
                raise NumericalError(
                    f"tridiagonal QL did not converge in {budget} sweeps "
                    f"(stalled at index {l}, |e|={abs(e[l]):.3e}, m={m})")
            sweeps += 1

            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = _pythag(g, 1.0)
            g = d[mm] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = mm - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = _pythag(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[mm] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = z[:, i].copy()
                z[:, i] = c * zi - s * z[:, i + 1]
                z[:, i + 1] = s * zi + c * z[:, i + 1]
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[mm] = 0.0

    order = np.argsort(d, kind="stable")
    vals = d[order]
    vecs = z[:, order]
    # deterministic sign: largest-magnitude component positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(m)])
    signs[signs == 0] = 1.0
    vecs = vecs * signs
    return EigenSystem(vals, vecs)


def expm_action_eigen(E: EigenSystem, phase, t: float, v) -> np.ndarray:
    """Return ``V exp(phase * lambda * t) V^T v`` for an eigensystem ``E``."""
    ph = _check_phase(phase)
    v = np.asarray(v)
    if v.shape[0] != E.size:
        raise ParameterError(
            f"vector length {v.shape[0]} does not match operator size {E.size}")
    if t == 0:
        return v.astype(complex if ph == -1j else np.result_type(v, float))
    V = E.eigenvectors
    coeffs = V.T @ v
    if ph == -1j:
        factors = np.exp(-1j * E.eigenvalues * t)
    else:
        factors = np.exp(E.eigenvalues * t)
    if v.ndim == 2:
        factors = factors[:, None]
    return V @ (factors * coeffs)


def _lanczos(A: SparseSymmetric, v0: np.ndarray, kmax: int):
    """Lanczos with full reorthogonalization.

    Returns the basis (n x k), the diagonals of T, and the residual norm
    beta_k that couples the last basis vector to the next one.
    """
    n = v0.size
    Q = np.zeros((n, kmax), dtype=v0.dtype)
    alpha = np.zeros(kmax)
    beta = np.zeros(kmax)
    Q[:, 0] = v0
    breakdown_tol = 1e-14 * max(A.norm1(), 1.0)
    k = kmax
    for j in range(kmax):
        w = A.matvec(Q[:, j])
        alpha[j] = float(np.real(np.vdot(Q[:, j], w)))
        w = w - alpha[j] * Q[:, j]
        if j > 0:
            w = w - beta[j - 1] * Q[:, j - 1]
        # two passes of classical Gram-Schmidt keep the basis orthonormal
        for _ in range(2):
            w = w - Q[:, :j + 1] @ (Q[:, :j + 1].conj().T @ w)
        b = float(np.linalg.norm(w))
        beta[j] = b
        if b <= breakdown_tol:
            k = j + 1
            beta[j] = 0.0
            break
        if j + 1 < kmax:
            Q[:, j + 1] = w / b
    return Q[:, :k], alpha[:k], beta[:k]


def expm_action_krylov(A: SparseSymmetric, phase, t: float, v, tol: float = DEFAULT_KRYLOV_TOL,
                       krylov_dim: int = KRYLOV_DIM,
                       max_steps: int = MAX_KRYLOV_STEPS) -> np.ndarray:
    """Approximate ``exp(phase * A * t) @ v`` with restarted Lanczos.

    The time interval is covered by substeps. Each substep builds a Krylov
    basis of dimension ``krylov_dim`` from the current vector, exponentiates
    the projected tridiagonal matrix exactly, and accepts the step when the
    a-posteriori error estimate stays below ``tol * |h| / |t| * |v|``.
    The step size is shrunk on rejection and grown after acceptance.
    A happy breakdown (invariant subspace) finishes the interval in one step.

    Raises
    ------
    NumericalError
        If the interval cannot be covered within ``max_steps`` substeps.
    """
    ph = _check_phase(phase)
    if not tol > 0:
        raise ParameterError("tol must be positive")
    v = np.asarray(v)
    if v.ndim != 1 or v.size != A.dimension:
        raise ParameterError(
            f"vector length {v.size} does not match operator dimension {A.dimension}")
    dtype = complex if (ph == -1j or np.iscomplexobj(v)) else float
    w = v.astype(dtype, copy=True)
    if t == 0:
        return w
    t = float(t)
    sign = 1.0 if t > 0 else -1.0
    remaining = abs(t)
    vnorm0 = float(np.linalg.norm(w))
    if vnorm0 == 0.0:
        return w
    anorm = max(A.norm1(), 1e-300)
    kdim = max(2, min(int(krylov_dim), A.dimension))
    # Expokit-style initial step guess
    h = min(remaining, 0.5 / anorm * kdim)
    steps = 0

    while remaining > 0:
        beta0 = float(np.linalg.norm(w))
        if beta0 == 0.0:
            break
        Q, alpha, beta = _lanczos(A, w / beta0, kdim)
        k = alpha.size
        es = eigh_tridiagonal(SymTridiagonal(alpha, beta[:k - 1]))
        invariant = beta[k - 1] == 0.0
        h = min(h, remaining)
        while True:
            steps += 1
            if steps > max_steps:
                raise NumericalError(
                    f"Krylov exponential exceeded {max_steps} substeps "
                    f"(t={t}, remaining={remaining:.3e}, h={h:.3e})")
            if invariant:
                h = remaining
            e1 = es.eigenvectors[0, :]
            if ph == -1j:
                fac = np.exp(-1j * es.eigenvalues * (sign * h))
            else:
                fac = np.exp(es.eigenvalues * (sign * h))
            y = es.eigenvectors @ (fac * e1)
            if invariant:
                err = 0.0
            else:
                err = beta0 * beta[k - 1] * abs(y[k - 1])
            allowed = tol * vnorm0 * h / abs(t)
            if err <= allowed or h <= 1e-300:
                break
            # local error scales roughly like h^(k+1)
            shrink = 0.9 * (allowed / err) ** (1.0 / (k + 1))
            h *= min(max(shrink, 0.1), 0.9)
        w = beta0 * (Q @ y)
        remaining -= h
        if remaining <= 1e-15 * abs(t):
            remaining = 0.0
        if not invariant:
            grow = 2.0 if err == 0.0 else 0.9 * (allowed / err) ** (1.0 / (k + 1))
            h *= min(max(grow, 1.0), 2.0)
    return w
