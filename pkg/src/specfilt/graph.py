"""Sparse graph primitives.

Provides CSR graph storage, the self-loop symmetric normalization
D^{-1/2} (A + I) D^{-1/2}, edge homophily, propagation powers, feature
collapse statistics, and a seeded block-model generator used as a
controlled-homophily test fixture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import pdist


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted graph in CSR form.

    Invariants: no self-loops, no duplicate edges, adjacency symmetric
    (every edge stored in both directions), column indices sorted per row.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    symmetric: bool = True

    @property
    def num_edges(self) -> int:
        """Number of undirected edges (stored entries / 2)."""
        return self.indices.size // 2

    def edge_pairs(self) -> np.ndarray:
        """Unique undirected edges as an (m, 2) array with src < dst."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        dst = self.indices
        keep = src < dst
        return np.column_stack([src[keep], dst[keep]])

    def to_scipy(self) -> sp.csr_matrix:
        data = np.ones(self.indices.size, dtype=np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


@dataclass(frozen=True)
class NormalizedGraph:
    """Self-loop normalized operator D^{-1/2} (A + I) D^{-1/2} in CSR form.

    Spectrum lies in [-1, 1]; diagonal entries are strictly positive and the
    stored value array is exactly symmetric because every entry is computed
    as the same commutative product d_inv_sqrt[u] * d_inv_sqrt[v].
    """

    n: int
    values: np.ndarray
    col_index: np.ndarray
    row_pointer: np.ndarray

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.values, self.col_index, self.row_pointer), shape=(self.n, self.n)
        )

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def matmul(self, X: np.ndarray) -> np.ndarray:
        """Sparse-dense product; X may be a vector or an (n, d) matrix."""
        return self.to_scipy() @ X


@dataclass(frozen=True)
class Dataset:
    """Node classification data: graph, features, labels and index splits."""

    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    splits: dict[str, np.ndarray]

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    def validate(self) -> None:
        n = self.graph.n
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(f"features must be ({n}, d), got {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        if self.labels.shape != (n,):
            raise ValueError(f"labels must have length {n}, got {self.labels.shape}")
        if self.labels.min() < 0:
            raise ValueError("labels must be nonnegative class indices")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        seen: set[int] = set()
        for name in ("train", "val", "test"):
            if name not in self.splits:
                raise ValueError(f"missing split '{name}'")
            idx = self.splits[name]
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError(f"split '{name}' has out-of-range node index")
            dup = seen.intersection(idx.tolist())
            if dup:
                raise ValueError(f"splits overlap at node index {min(dup)}")
            seen.update(idx.tolist())


def build_graph(n: int, raw_edges) -> Graph:
    """Construct a Graph from an edge list.

    The edge list is interpreted as undirected: it is symmetrized
    unconditionally, duplicates are merged and self-loops dropped (the
    normalization step re-adds uniform self-loops).
    """
    edges = np.asarray(list(raw_edges) if not isinstance(raw_edges, np.ndarray) else raw_edges,
                       dtype=np.int64)
    if edges.size == 0:
        edges = edges.reshape(0, 2)
    if edges.ndim != 2 or edges.shape[1] != 2:
        raise ValueError("edges must be (src, dst) pairs")
    if n <= 0:
        raise ValueError("node count must be positive")
    bad = (edges < 0) | (edges >= n)
    if bad.any():
        u, v = edges[np.where(bad.any(axis=1))[0][0]]
        raise ValueError(f"edge index out of range: ({u}, {v}) with n={n}")

    edges = edges[edges[:, 0] != edges[:, 1]]
    both = np.concatenate([edges, edges[:, ::-1]], axis=0)
    keys = np.unique(both[:, 0] * n + both[:, 1])
    src = keys // n
    dst = keys % n
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    return Graph(n=n, indptr=indptr, indices=dst.astype(np.int64))


def sym_normalize(g: Graph) -> NormalizedGraph:
    """Normalize the adjacency with self-loops: D^{-1/2} (A + I) D^{-1/2}.

    Isolated nodes get degree 1 from their self-loop, so no division by zero
    can occur and every diagonal entry is strictly positive.
    """
    deg = np.diff(g.indptr) + 1.0
    dinv = 1.0 / np.sqrt(deg)

    # Insert the diagonal into each CSR row, keeping column order sorted.
    counts = np.diff(g.indptr)
    new_counts = counts + 1
    indptr = np.concatenate([[0], np.cumsum(new_counts)])
    nnz = int(indptr[-1])
    col_index = np.empty(nnz, dtype=np.int64)
    values = np.empty(nnz, dtype=np.float64)
    for u in range(g.n):
        cols = g.indices[g.indptr[u]:g.indptr[u + 1]]
        pos = int(np.searchsorted(cols, u))
        out = slice(indptr[u], indptr[u + 1])
        row_cols = np.insert(cols, pos, u)
        col_index[out] = row_cols
        values[out] = dinv[u] * dinv[row_cols]
    return NormalizedGraph(n=g.n, values=values, col_index=col_index, row_pointer=indptr)


def edge_homophily(g: Graph, labels) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    labels = np.asarray(labels)
    if labels.shape != (g.n,):
        raise ValueError(f"labels must have length {g.n}")
    if g.num_edges == 0:
        raise ValueError("no edges")
    pairs = g.edge_pairs()
    same = labels[pairs[:, 0]] == labels[pairs[:, 1]]
    return float(np.mean(same))


def apply_power(ng: NormalizedGraph, X: np.ndarray, j: int) -> np.ndarray:
    """Apply the normalized operator j times: returns its j-th power times X."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != ng.n:
        raise ValueError(f"X must have {ng.n} rows, got {X.shape[0]}")
    if j < 0:
        raise ValueError("power must be nonnegative")
    Y = X.copy()
    for _ in range(j):
        Y = ng.matmul(Y)
    return Y


def pairwise_distance_mean(X: np.ndarray) -> float:
    """Mean Euclidean distance over all unordered row pairs."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    return float(pdist(X).mean())


def feature_variance_mean(X: np.ndarray) -> float:
    """Mean over columns of the per-column population variance."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    return float(np.var(X, axis=0).mean())


def is_connected(g: Graph) -> bool:
    """BFS connectivity check."""
    if g.n == 0:
        return True
    seen = np.zeros(g.n, dtype=bool)
    frontier = [0]
    seen[0] = True
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.indices[g.indptr[u]:g.indptr[u + 1]]:
                if not seen[v]:
                    seen[v] = True
                    nxt.append(int(v))
        frontier = nxt
    return bool(seen.all())


def synth_csbm(
    n: int,
    C: int,
    p_in: float,
    p_out: float,
    feat_dim: int,
    class_separation: float,
    seed: int,
) -> Dataset:
    """Seeded contextual block-model dataset with controllable homophily.

    Nodes are assigned to C balanced contiguous blocks; each unordered pair
    gets a Bernoulli edge with probability p_in (same block) or p_out
    (different blocks). Features are unit Gaussians centered on per-class
    means of norm ``class_separation``. Splits are a seeded 48/32/20
    partition of the nodes. Identical seeds give byte-identical datasets.
    """
    if not (0.0 <= p_in <= 1.0 and 0.0 <= p_out <= 1.0):
        raise ValueError("edge probabilities must be in [0, 1]")
    if n < C or C < 2:
        raise ValueError("need n >= C >= 2")
    ss = np.random.SeedSequence(seed)
    rng_edges, rng_feat, rng_split = (np.random.default_rng(s) for s in ss.spawn(3))

    sizes = np.full(C, n // C, dtype=np.int64)
    sizes[: n % C] += 1
    labels = np.repeat(np.arange(C, dtype=np.int64), sizes)

    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    pick = rng_edges.random(iu.size) < prob
    graph = build_graph(n, np.column_stack([iu[pick], ju[pick]]))

    means = rng_feat.standard_normal((C, feat_dim))
    means *= class_separation / np.linalg.norm(means, axis=1, keepdims=True)
    features = means[labels] + rng_feat.standard_normal((n, feat_dim))

    perm = rng_split.permutation(n)
    n_train = (48 * n) // 100
    n_val = (32 * n) // 100
    splits = {
        "train": np.sort(perm[:n_train]),
        "val": np.sort(perm[n_train:n_train + n_val]),
        "test": np.sort(perm[n_train + n_val:]),
    }
    ds = Dataset(graph=graph, features=features, labels=labels, splits=splits)
    ds.validate()
    return ds
