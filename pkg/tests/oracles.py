"""Independent reference computations used by the tests.

Nothing here imports the engines under test.
"""

import math

import numpy as np


def dense_expm_taylor(M, terms=40):
    """exp(M) by scaling and squaring with a truncated Taylor series."""
    M = np.asarray(M, dtype=complex)
    norm = np.abs(M).sum(axis=1).max()
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    A = M / (2**s)
    out = np.eye(M.shape[0], dtype=complex)
    term = np.eye(M.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def dense_adjacency(num_nodes, edges):
    A = np.zeros((num_nodes, num_nodes))
    for u, v in edges:
        A[u, v] += 1
        A[v, u] += 1
    return A


def brute_chain_matrix(B, n):
    """Chain Hamiltonian written out entry by entry (gamma = 1)."""
    m = 2 * n + 2
    H = np.zeros((m, m))
    for j in range(m - 1):
        h = B if j == n else math.sqrt(B)
        H[j, j + 1] = H[j + 1, j] = h
    return H


def grid_first_peak(f, step, tau_max, floor=1e-9):
    """First strict rise-then-fall on a fine grid: (tau, value)."""
    taus = np.arange(0.0, tau_max, step)
    vals = np.array([f(t) for t in taus])
    for k in range(1, len(vals) - 1):
        if vals[k] > floor and vals[k] > vals[k - 1] and vals[k] >= vals[k + 1]:
            return taus[k], vals[k]
    raise AssertionError("no peak on grid")
