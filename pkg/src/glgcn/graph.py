"""Graph-derived operators: renormalized adjacency, similarity graphs,
Laplacians, label-correlation weights, and a label-propagation baseline.

All constructors return immutable CSR matrices. Unlabeled nodes are
encoded as class id -1 throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import CsrMatrix, csr_from_coo, spmm

__all__ = [
    "UNLABELED",
    "LabeledGraph",
    "normalize_adjacency",
    "build_similarity_adj",
    "build_similarity_knn",
    "laplacian_from_similarity",
    "label_correlation",
    "label_propagation",
]

UNLABELED = -1


@dataclass(frozen=True)
class LabeledGraph:
    """Undirected graph with node features and (partially known) labels.

    adjacency: symmetric CSR with empty diagonal (self-loops are added
    only by normalization). labels: int array with UNLABELED for unknown.
    """

    n: int
    adjacency: CsrMatrix
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        self.validate()

    def validate(self):
        if self.adjacency.dim != self.n:
            raise ValueError("adjacency dimension does not match node count")
        if self.features.shape[0] != self.n:
            raise ValueError("feature row count does not match node count")
        if self.labels.shape != (self.n,):
            raise ValueError("labels must be one entry per node")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        labeled = self.labels[self.labels != UNLABELED]
        if labeled.size and (labeled.min() < 0 or labeled.max() >= self.num_classes):
            raise ValueError("labeled class id outside [0, num_classes)")
        if np.any(self.adjacency.row_ids() == self.adjacency.col_indices):
            raise ValueError("adjacency diagonal must be empty")
        if not self.adjacency.is_symmetric():
            raise ValueError("adjacency must be symmetric")

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])


def normalize_adjacency(adjacency: CsrMatrix) -> CsrMatrix:
    """Self-loop augmented symmetric normalization of an adjacency matrix.

    Adds the identity, then scales entry (i, j) by 1/sqrt(deg_i * deg_j)
    where deg is the row sum after the self-loops. Output stays symmetric
    with entries in (0, 1].
    """
    if np.any(adjacency.values < 0):
        raise ValueError("adjacency weights must be non-negative")
    n = adjacency.dim
    rows = np.concatenate([adjacency.row_ids(), np.arange(n, dtype=np.int64)])
    cols = np.concatenate([adjacency.col_indices, np.arange(n, dtype=np.int64)])
    vals = np.concatenate([adjacency.values, np.ones(n)])
    with_loops = csr_from_coo(n, rows, cols, vals)
    deg = with_loops.rowsums()
    dinv = 1.0 / np.sqrt(deg)
    scaled = with_loops.values * dinv[with_loops.row_ids()] * dinv[with_loops.col_indices]
    return with_loops.with_values(scaled)


def build_similarity_adj(adjacency: CsrMatrix, normalize: bool = False) -> CsrMatrix:
    """Similarity graph taken directly from the adjacency matrix.

    With normalize set, entry (i, j) is scaled by the self-loop
    inclusive degrees 1/sqrt((1+deg_i)(1+deg_j)) without adding the
    loops themselves, so the regularizer scale is comparable across
    datasets; isolated nodes keep empty rows.
    """
    if not normalize:
        return adjacency
    dinv = 1.0 / np.sqrt(1.0 + adjacency.rowsums())
    scaled = adjacency.values * dinv[adjacency.row_ids()] * dinv[adjacency.col_indices]
    return adjacency.with_values(scaled)


def build_similarity_knn(features, k: int, sigma: float) -> CsrMatrix:
    """Gaussian-weighted k-nearest-neighbour graph on node features.

    Each node links to its k nearest neighbours by Euclidean distance
    with weight exp(-dist^2 / (2 sigma^2)); the result is symmetrized by
    taking the larger direction. Brute force, chunked over rows.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise ValueError(f"k must be smaller than the number of nodes ({k} >= {n})")
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    sq_norms = np.einsum("ij,ij->i", x, x)
    src = np.empty(n * k, dtype=np.int64)
    dst = np.empty(n * k, dtype=np.int64)
    d2 = np.empty(n * k)
    chunk = max(1, min(n, 8_388_608 // max(n, 1)))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        block = sq_norms[start:stop, None] + sq_norms[None, :] - 2.0 * (x[start:stop] @ x.T)
        np.maximum(block, 0.0, out=block)
        block[np.arange(start, stop) - start, np.arange(start, stop)] = np.inf
        # stable k-smallest with index tie-break
        order = np.lexsort((np.broadcast_to(np.arange(n), block.shape), block), axis=1)
        nearest = order[:, :k]
        rows = np.repeat(np.arange(start, stop, dtype=np.int64), k)
        src[start * k : stop * k] = rows
        dst[start * k : stop * k] = nearest.ravel()
        d2[start * k : stop * k] = block[rows - start, nearest.ravel()]

    weights = np.exp(-d2 / (2.0 * sigma * sigma))
    return _symmetrize_max(n, src, dst, weights)


def _symmetrize_max(n: int, rows, cols, vals) -> CsrMatrix:
    """Union of both edge directions, keeping the larger weight of a pair."""
    r = np.concatenate([rows, cols])
    c = np.concatenate([cols, rows])
    v = np.concatenate([vals, vals])
    keys = r * n + c
    order = np.argsort(keys, kind="stable")
    keys, r, c, v = keys[order], r[order], c[order], v[order]
    first = np.ones(len(keys), dtype=bool)
    first[1:] = keys[1:] != keys[:-1]
    group = np.cumsum(first) - 1
    merged = np.full(group[-1] + 1 if len(keys) else 0, -np.inf)
    np.maximum.at(merged, group, v)
    r, c = r[first], c[first]
    keep = merged > 0.0
    return csr_from_coo(n, r[keep], c[keep], merged[keep])


def laplacian_from_similarity(s: CsrMatrix) -> CsrMatrix:
    """Graph Laplacian diag(rowsum(S)) - S; rows sum to zero."""
    deg = s.rowsums()
    diag_idx = np.arange(s.dim, dtype=np.int64)
    rows = np.concatenate([diag_idx, s.row_ids()])
    cols = np.concatenate([diag_idx, s.col_indices])
    vals = np.concatenate([deg, -s.values])
    return csr_from_coo(s.dim, rows, cols, vals)


def label_correlation(labels, train_set, alpha: float) -> CsrMatrix:
    """Pairwise label-agreement weights over the labeled training nodes.

    +1 for a same-class pair, -alpha for a cross-class pair, 0 anywhere
    else; the diagonal stays empty. Storage is quadratic in |train_set|.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    idx = np.unique(np.asarray(list(train_set), dtype=np.int64))
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError("train_set index out of range")
    if np.any(labels[idx] == UNLABELED):
        bad = idx[labels[idx] == UNLABELED][0]
        raise ValueError(f"train_set node {bad} is unlabeled")
    t = idx.size
    rows = np.repeat(idx, t)
    cols = np.tile(idx, t)
    same = labels[rows] == labels[cols]
    vals = np.where(same, 1.0, -alpha)
    off_diag = rows != cols
    keep = off_diag & (vals != 0.0)
    return csr_from_coo(n, rows[keep], cols[keep], vals[keep])


def label_propagation(
    similarity: CsrMatrix,
    labels,
    train_set,
    max_iters: int = 1000,
    tol: float = 1e-6,
) -> np.ndarray:
    """Iterative label spreading with clamped training rows.

    Repeats F <- row-normalized(S) @ F, resetting training rows to their
    one-hot targets, until the largest entry change drops below tol or
    max_iters is hit. Returns the per-node argmax with ties broken toward
    the lower class id. Nodes without edges keep the uniform prior.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = similarity.dim
    train = np.unique(np.asarray(list(train_set), dtype=np.int64))
    if train.size == 0:
        raise ValueError("train_set must be nonempty")
    if np.any(labels[train] == UNLABELED):
        raise ValueError("train_set nodes must be labeled")
    d = int(labels.max()) + 1

    deg = similarity.rowsums()
    inv = np.where(deg != 0, 1.0 / np.where(deg != 0, deg, 1.0), 0.0)
    row_ids = similarity.row_ids()
    # isolated rows get an identity entry so their state carries over
    iso = np.flatnonzero(deg == 0)
    rows = np.concatenate([row_ids, iso])
    cols = np.concatenate([similarity.col_indices, iso])
    vals = np.concatenate([similarity.values * inv[row_ids], np.ones(iso.size)])
    walk = csr_from_coo(n, rows, cols, vals)

    scores = np.full((n, d), 1.0 / d)
    onehot = np.zeros((train.size, d))
    onehot[np.arange(train.size), labels[train]] = 1.0
    scores[train] = onehot
    for _ in range(max_iters):
        nxt = spmm(walk, scores)
        nxt[train] = onehot
        change = np.max(np.abs(nxt - scores))
        scores = nxt
        if change < tol:
            break
    return np.argmax(scores, axis=1)
