"""Central-random glued trees and their column-space chain reduction.

Node numbering is column-major and 0-based: the entrance is node 0, then the
``B`` nodes of column 1, the ``B**2`` nodes of column 2, and so on up to the
exit, which is the last node. Inside a left-tree column, the children of
node ``k`` are indices ``k*B .. k*B + B - 1`` of the next column; the right
tree mirrors this (index ``k`` in column ``j`` has its parent at index
``k // B`` of column ``j + 1``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GenerationError, InputFormatError, InstanceTooLargeError, ParameterError
from .linalg import SparseSymmetric, SymTridiagonal

__all__ = [
    "GluedTreeSpec",
    "GluedTreeGraph",
    "ChainHamiltonian",
    "Violation",
    "ValidationReport",
    "column_sizes",
    "node_count",
    "build_glued_tree",
    "validate_gluing",
    "reduce_to_chain",
    "column_project",
    "column_states",
    "graph_to_json",
    "graph_from_json",
    "save_graph",
    "load_graph",
    "GLUE_RETRY_BUDGET",
    "MAX_FULL_NODES",
]

GLUE_RETRY_BUDGET = 1000
MAX_FULL_NODES = 5_000_000
_SWITCH_BUDGET_PER_DEFECT = 200


def _check_bn(B, n):
    if isinstance(B, bool) or int(B) != B or B < 2:
        raise ParameterError(f"branching rate B must be an integer >= 2, got {B!r}")
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ParameterError(f"depth n must be an integer >= 1, got {n!r}")
    return int(B), int(n)


def column_sizes(B: int, n: int) -> np.ndarray:
    """Number of nodes in each of the ``2n+2`` columns."""
    B, n = _check_bn(B, n)
    left = [B**j for j in range(n + 1)]
    return np.array(left + left[::-1], dtype=np.int64)


def node_count(B: int, n: int) -> int:
    """Closed form ``2 (B**(n+1) - 1) / (B - 1)``."""
    B, n = _check_bn(B, n)
    return 2 * (B ** (n + 1) - 1) // (B - 1)


@dataclass(frozen=True)
class GluedTreeSpec:
    B: int
    n: int
    seed: int = 0

    def __post_init__(self):
        _check_bn(self.B, self.n)
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ParameterError("gluing seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class GluedTreeGraph:
    """Explicit glued-tree graph.

    ``columns[i]`` is the column of node ``i``; ``edges`` is an ``(E, 2)``
    integer array of unordered pairs. Construction does not validate the
    glued-tree invariants so that broken graphs can be fed to
    :func:`validate_gluing`.
    """

    B: int
    n: int
    seed: int
    columns: np.ndarray
    edges: np.ndarray
    entrance: int
    exit: int
    _adjacency: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.int64).reshape(-1)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= cols.size):
            raise ParameterError("edge endpoint out of range")
        cols.setflags(write=False)
        edges.setflags(write=False)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "edges", edges)

    @property
    def num_nodes(self) -> int:
        return self.columns.size

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def num_columns(self) -> int:
        return 2 * self.n + 2

    @property
    def nodes(self) -> list[tuple[int, int]]:
        """``(column, index within column)`` for every node id."""
        out = []
        counters: dict[int, int] = {}
        for c in self.columns.tolist():
            k = counters.get(c, 0)
            out.append((c, k))
            counters[c] = k + 1
        return out

    def column_members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.columns == j)

    def adjacency(self) -> SparseSymmetric:
        """0/1 adjacency matrix (parallel edges would add up)."""
        if "A" not in self._adjacency:
            N = self.num_nodes
            e = self.edges
            rows = np.concatenate([e[:, 0], e[:, 1]])
            cols = np.concatenate([e[:, 1], e[:, 0]])
            A = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(N, N))
            self._adjacency["A"] = SparseSymmetric.from_scipy(A, check=False)
        return self._adjacency["A"]

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.reshape(-1), minlength=self.num_nodes)

    def __eq__(self, other):
        if not isinstance(other, GluedTreeGraph):
            return NotImplemented
        return (self.B == other.B and self.n == other.n and self.seed == other.seed
                and self.entrance == other.entrance and self.exit == other.exit
                and np.array_equal(self.columns, other.columns)
                and np.array_equal(self.edges, other.edges))

    __hash__ = None


def _sample_gluing(B: int, leaves: int, rng: np.random.Generator,
                   retries: int = GLUE_RETRY_BUDGET) -> np.ndarray:
    """Sample a simple B-regular bipartite graph on ``leaves + leaves`` vertices.

    Configuration model: every vertex gets ``B`` stubs, the right stubs are
    shuffled against the left ones. Parallel edges are removed by random
    double-edge switches; when a switch cannot be found the whole pairing is
    redrawn, up to ``retries`` times.
    """
    if B > leaves:
        raise GenerationError(f"cannot glue {leaves} leaves with {B} distinct partners")
    left = np.repeat(np.arange(leaves), B)
    if leaves == B:
        # n = 1: the complete bipartite graph is the only simple gluing
        return np.stack([left, np.tile(np.arange(leaves), B)], axis=1)
    for _ in range(retries):
        right = rng.permutation(np.repeat(np.arange(leaves), B))
        edges = _repair_parallel(left.copy(), right, leaves, rng)
        if edges is not None:
            return edges
    raise GenerationError(
        f"gluing sampler failed after {retries} full resamples (B={B}, leaves={leaves})")


def _repair_parallel(left, right, leaves, rng):
    key = left * leaves + right
    counts: dict[int, int] = {}
    for k in key.tolist():
        counts[k] = counts.get(k, 0) + 1
    dup = [i for i in range(key.size) if counts[key[i]] > 1]
    # keep one copy of each repeated pair, switch away the others
    seen = set()
    bad = []
    for i in dup:
        if key[i] in seen:
            bad.append(i)
        else:
            seen.add(key[i])
    E = key.size
    for i in bad:
        for _ in range(_SWITCH_BUDGET_PER_DEFECT):
            j = int(rng.integers(E))
            u, v = left[i], right[i]
            x, y = left[j], right[j]
            if u == x or v == y:
                continue
            k1, k2 = u * leaves + y, x * leaves + v
            if counts.get(k1, 0) or counts.get(k2, 0):
                continue
            for old in (key[i], key[j]):
                counts[old] -= 1
            right[i], right[j] = y, v
            key[i], key[j] = k1, k2
            counts[k1] = 1
            counts[k2] = 1
            break
        else:
            return None
    return np.stack([left, right], axis=1)


def build_glued_tree(spec: GluedTreeSpec, max_nodes: int = MAX_FULL_NODES) -> GluedTreeGraph:
    """Build a central-random glued tree from ``spec``.

    The two trees are laid out deterministically; only the central gluing is
    random and it is drawn from ``numpy.random.default_rng(spec.seed)``.

    Raises
    ------
    ParameterError
        For ``B < 2`` or ``n < 1``.
    InstanceTooLargeError
        When the node count exceeds ``max_nodes``.
    GenerationError
        When the gluing sampler exhausts its retry budget.
    """
    B, n = spec.B, spec.n
    total = node_count(B, n)
    if total > max_nodes:
        raise InstanceTooLargeError(
            f"glued tree B={B}, n={n} has {total} nodes, above the budget of {max_nodes}")
    sizes = column_sizes(B, n)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    columns = np.repeat(np.arange(2 * n + 2), sizes)

    parts = []
    for j in range(n):
        # left tree: column j -> column j+1
        parent = np.repeat(np.arange(sizes[j]), B)
        child = np.arange(sizes[j + 1])
        parts.append(np.stack([offsets[j] + parent, offsets[j + 1] + child], axis=1))
    rng = np.random.default_rng(int(spec.seed))
    glue = _sample_gluing(B, int(sizes[n]), rng)
    parts.append(np.stack([offsets[n] + glue[:, 0], offsets[n + 1] + glue[:, 1]], axis=1))
    for j in range(n + 1, 2 * n + 1):
        # right tree: node k of column j hangs under node k//B of column j+1
        child = np.arange(sizes[j])
        parent = child // B
        parts.append(np.stack([offsets[j] + child, offsets[j + 1] + parent], axis=1))
    edges = np.concatenate(parts, axis=0)
    edges = np.sort(edges, axis=1)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    return GluedTreeGraph(B=B, n=n, seed=int(spec.seed), columns=columns, edges=edges,
                          entrance=0, exit=total - 1)


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    nodes: tuple = ()


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "pass"
        lines = [f"fail ({len(self.violations)} violations)"]
        lines += [f"  [{v.kind}] {v.message}" for v in self.violations]
        return "\n".join(lines)


def validate_gluing(graph: GluedTreeGraph, max_listed: int = 20) -> ValidationReport:
    """Check every glued-tree invariant and report violations.

    Never raises on a broken graph. Each violation carries a kind
    (``"column size"``, ``"node count"``, ``"self loop"``, ``"parallel edge"``,
    ``"non-adjacent columns"``, ``"tree structure"``, ``"degree"``,
    ``"endpoint"``, ``"disconnected"``) and the offending node ids.
    """
    B, n = graph.B, graph.n
    out: list[Violation] = []
    try:
        expected = column_sizes(B, n)
    except ParameterError as exc:
        return ValidationReport((Violation("parameters", str(exc)),))
    cols = graph.columns
    ncol = 2 * n + 2
    if cols.size and (cols.min() < 0 or cols.max() >= ncol):
        bad = np.flatnonzero((cols < 0) | (cols >= ncol))
        out.append(Violation("column size", "node column out of range",
                             tuple(bad[:max_listed].tolist())))
    observed = np.bincount(np.clip(cols, 0, ncol - 1), minlength=ncol)
    for j in range(ncol):
        if observed[j] != expected[j]:
            out.append(Violation("column size",
                                 f"column {j} has {observed[j]} nodes, expected {expected[j]}"))
    if cols.size != node_count(B, n):
        out.append(Violation("node count",
                             f"{cols.size} nodes, expected {node_count(B, n)}"))

    if cols.size == 0 or graph.entrance >= cols.size or graph.exit >= cols.size:
        out.append(Violation("endpoint", "entrance/exit id out of range"))
        return ValidationReport(tuple(out))
    if cols[graph.entrance] != 0 or observed[0] != 1:
        out.append(Violation("endpoint", "entrance is not the unique column-0 node",
                             (graph.entrance,)))
    if cols[graph.exit] != ncol - 1 or observed[ncol - 1] != 1:
        out.append(Violation("endpoint", f"exit is not the unique column-{ncol - 1} node",
                             (graph.exit,)))

    e = graph.edges
    loops = e[e[:, 0] == e[:, 1]]
    if loops.size:
        out.append(Violation("self loop", f"{len(loops)} self loops",
                             tuple(loops[:max_listed, 0].tolist())))
    canon = np.sort(e, axis=1)
    uniq, counts = np.unique(canon, axis=0, return_counts=True)
    rep = uniq[counts > 1]
    if rep.size:
        out.append(Violation("parallel edge", f"{len(rep)} repeated node pairs",
                             tuple(map(tuple, rep[:max_listed].tolist()))))
    cu, cv = cols[canon[:, 0]], cols[canon[:, 1]]
    far = canon[np.abs(cu - cv) != 1]
    if far.size:
        out.append(Violation("non-adjacent columns",
                             f"{len(far)} edges skip or stay within a column",
                             tuple(map(tuple, far[:max_listed].tolist()))))

    # neighbor counts towards the previous and next column, per node
    N = cols.size
    lo = np.where(cu < cv, canon[:, 0], canon[:, 1])
    hi = np.where(cu < cv, canon[:, 1], canon[:, 0])
    keep = np.abs(cu - cv) == 1
    up = np.bincount(lo[keep], minlength=N)    # neighbors in column + 1
    down = np.bincount(hi[keep], minlength=N)  # neighbors in column - 1
    distinct_up = np.zeros(N, dtype=np.int64)
    distinct_down = np.zeros(N, dtype=np.int64)
    uk = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
    if uk.size:
        distinct_up = np.bincount(uk[:, 0], minlength=N)
        distinct_down = np.bincount(uk[:, 1], minlength=N)

    want_down = np.zeros(N, dtype=np.int64)
    want_up = np.zeros(N, dtype=np.int64)
    for j in range(ncol):
        members = cols == j
        if j == 0:
            want_down[members], want_up[members] = 0, B
        elif j < n:
            want_down[members], want_up[members] = 1, B
        elif j == n:
            want_down[members], want_up[members] = 1, B
        elif j == n + 1:
            want_down[members], want_up[members] = B, 1
        elif j < ncol - 1:
            want_down[members], want_up[members] = B, 1
        else:
            want_down[members], want_up[members] = B, 0

    glue_side = (cols == n) | (cols == n + 1)
    for label, side in (("tree structure", ~glue_side), ("degree", glue_side)):
        bad = np.flatnonzero(side & ((up != want_up) | (down != want_down)))
        if label == "degree":
            # a glue node must also see B *different* partners across the center
            partners = np.where(cols == n, distinct_up, distinct_down)
            bad = np.union1d(bad, np.flatnonzero(glue_side & (partners != B)))
        if bad.size:
            out.append(Violation(label,
                                 f"{bad.size} nodes with wrong neighbor counts",
                                 tuple(bad[:max_listed].tolist())))

    if N and e.size:
        A = sp.csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(N, N))
        ncomp, labels = sp.csgraph.connected_components(A, directed=False)
        if ncomp > 1:
            stray = np.flatnonzero(labels != labels[graph.entrance])
            out.append(Violation("disconnected", f"{ncomp} connected components",
                                 tuple(stray[:max_listed].tolist())))
    elif N > 1:
        out.append(Violation("disconnected", "graph has no edges"))
    return ValidationReport(tuple(out))


@dataclass(frozen=True)
class ChainHamiltonian(SymTridiagonal):
    """Reduced ``(2n+2)``-site chain for a glued tree with hopping rate ``gamma``."""

    B: int = 2
    n: int = 1
    gamma: float = 1.0

    @property
    def entrance(self) -> int:
        return 0

    @property
    def exit(self) -> int:
        return self.size - 1


def reduce_to_chain(B: int, n: int, gamma: float = 1.0) -> ChainHamiltonian:
    """Column-subspace Hamiltonian: ``sqrt(B)*gamma`` everywhere, ``B*gamma`` at the center link."""
    B, n = _check_bn(B, n)
    if not (np.isfinite(gamma) and gamma > 0):
        raise ParameterError(f"gamma must be positive, got {gamma!r}")
    off = np.full(2 * n + 1, np.sqrt(B) * gamma)
    off[n] = B * gamma
    return ChainHamiltonian(np.zeros(2 * n + 2), off, B=B, n=n, gamma=float(gamma))


def column_states(graph: GluedTreeGraph) -> sp.csr_matrix:
    """Sparse ``(2n+2, N)`` matrix whose rows are the uniform column states."""
    cols = graph.columns
    sizes = np.bincount(cols, minlength=graph.num_columns).astype(float)
    N = cols.size
    vals = 1.0 / np.sqrt(sizes[cols])
    return sp.csr_matrix((vals, (cols, np.arange(N))), shape=(graph.num_columns, N))


def column_project(graph: GluedTreeGraph, node_amplitudes) -> np.ndarray:
    """Overlap of a node-basis vector with each column state."""
    amp = np.asarray(node_amplitudes)
    if amp.shape[0] != graph.num_nodes:
        raise ParameterError(
            f"amplitude vector has length {amp.shape[0]}, graph has {graph.num_nodes} nodes")
    return np.asarray(column_states(graph) @ amp.astype(complex))


# --- JSON serialization -----------------------------------------------------

def graph_to_json(graph: GluedTreeGraph) -> str:
    doc = {
        "B": graph.B,
        "n": graph.n,
        "seed": graph.seed,
        "nodes": [{"id": i, "column": c} for i, c in enumerate(graph.columns.tolist())],
        "edges": graph.edges.tolist(),
        "entrance": graph.entrance,
        "exit": graph.exit,
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def graph_from_json(text: str) -> GluedTreeGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"invalid JSON: {exc.msg}", lineno=exc.lineno) from None
    missing = {"B", "n", "seed", "nodes", "edges", "entrance", "exit"} - set(doc)
    if missing:
        raise InputFormatError(f"graph JSON missing fields: {sorted(missing)}")
    nodes = sorted(doc["nodes"], key=lambda d: d["id"])
    if [d["id"] for d in nodes] != list(range(len(nodes))):
        raise InputFormatError("node ids must be 0..N-1")
    return GluedTreeGraph(B=int(doc["B"]), n=int(doc["n"]), seed=int(doc["seed"]),
                          columns=np.array([d["column"] for d in nodes], dtype=np.int64),
                          edges=np.array(doc["edges"], dtype=np.int64).reshape(-1, 2),
                          entrance=int(doc["entrance"]), exit=int(doc["exit"]))


def save_graph(graph: GluedTreeGraph, path) -> Path:
    path = Path(path)
    path.write_text(graph_to_json(graph))
    return path


def load_graph(path) -> GluedTreeGraph:
    path = Path(path)
    try:
        return graph_from_json(path.read_text())
    except InputFormatError as exc:
        raise InputFormatError(str(exc), path=path, lineno=exc.lineno) from None
