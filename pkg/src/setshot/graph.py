"""Graph container, symmetric normalization, and multi-hop feature smoothing.

The propagation step is the linear graph encoder's fixed part: features are
multiplied by the self-loop-augmented, symmetrically normalized adjacency a
configurable number of times, one sparse-dense product per hop. The matrix
power is never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Graph:
    """Undirected graph with dense node features and optional labels.

    Edges are canonical (i < j), deduplicated, and never self-loops.
    """

    n: int
    edges: np.ndarray          # (m, 2) int64, i < j
    X: np.ndarray              # (n, d) float64
    labels: np.ndarray | None = None
    name: str = "graph"

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
        self.validate()

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        if self.X.shape[0] != self.n:
            raise ValueError(f"feature rows {self.X.shape[0]} != node count {self.n}")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("non-finite feature entries")
        if self.labels is not None and self.labels.shape[0] != self.n:
            raise ValueError("label count does not match node count")
        if self.m:
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(self.edges[:, 0] >= self.edges[:, 1]):
                raise ValueError("edges must be canonical i < j (no self-loops)")
            keys = self.edges[:, 0] * self.n + self.edges[:, 1]
            if np.unique(keys).size != self.m:
                raise ValueError("duplicate edges")


def canonical_edges(pairs: np.ndarray, n: int) -> np.ndarray:
    """Sort endpoints, drop self-loops and duplicates, order lexicographically."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    keep = lo != hi
    lo, hi = lo[keep], hi[keep]
    keys = lo * n + hi
    uniq = np.unique(keys)
    return np.column_stack((uniq // n, uniq % n))


@dataclass
class NormalizedAdjacency:
    """CSR form of D^{-1/2} (A + I) D^{-1/2}; diagonal entry present per node."""

    n: int
    row_offsets: np.ndarray    # (n+1,) int64
    col_indices: np.ndarray    # (nnz,) int64
    values: np.ndarray         # (nnz,) float64

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        for i in range(self.n):
            lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
            dense[i, self.col_indices[lo:hi]] = self.values[lo:hi]
        return dense


def normalize_adjacency(g: Graph) -> NormalizedAdjacency:
    """Symmetric normalization with self-loops added on the fly.

    Isolated nodes get augmented degree 1, hence a lone diagonal entry of 1;
    stored values are 1/sqrt(deg_i * deg_j) with self-loop-augmented degrees.
    """
    deg = np.ones(g.n, dtype=np.float64)  # self-loop contribution
    if g.m:
        np.add.at(deg, g.edges[:, 0], 1.0)
        np.add.at(deg, g.edges[:, 1], 1.0)

    # Directed entry list: both orientations of every edge plus the diagonal.
    rows = np.concatenate([g.edges[:, 0], g.edges[:, 1], np.arange(g.n)])
    cols = np.concatenate([g.edges[:, 1], g.edges[:, 0], np.arange(g.n)])
    vals = 1.0 / np.sqrt(deg[rows] * deg[cols])

    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    row_offsets = np.zeros(g.n + 1, dtype=np.int64)
    np.add.at(row_offsets, rows + 1, 1)
    row_offsets = np.cumsum(row_offsets)
    return NormalizedAdjacency(g.n, row_offsets, cols.astype(np.int64), vals)


def propagate(adj: NormalizedAdjacency, X: np.ndarray, hops: int) -> np.ndarray:
    """Apply the normalized adjacency `hops` times: one sparse product per hop."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != adj.n:
        raise ValueError(f"feature matrix rows {X.shape} do not match n={adj.n}")
    if hops < 0:
        raise ValueError("hop count must be nonnegative")
    out = X
    for _ in range(hops):
        # Every row holds at least its diagonal, so reduceat offsets are valid.
        contrib = adj.values[:, None] * out[adj.col_indices]
        out = np.add.reduceat(contrib, adj.row_offsets[:-1], axis=0)
    return out
