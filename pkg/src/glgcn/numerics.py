"""Dense and sparse matrix primitives shared by the rest of the package.

Dense matrices are plain float64 numpy arrays (2-D, row-major). Sparse
square matrices use a validated CSR triplet. Everything here is pure and
deterministic for fixed inputs and seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CsrMatrix",
    "NonFiniteError",
    "identity_csr",
    "csr_from_coo",
    "csr_from_dense",
    "densify",
    "matmul_dense",
    "spmm",
    "relu",
    "softmax_rows",
    "glorot_init",
]


class NonFiniteError(ValueError):
    """An operation produced NaN or Inf entries."""


def _as_matrix(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def _require_finite(a: np.ndarray, context: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"non-finite entries produced by {context}")
    return a


@dataclass(frozen=True)
class CsrMatrix:
    """Square sparse matrix in CSR form.

    Invariants enforced at construction: offsets monotone with length
    dim+1, column indices in [0, dim) and strictly increasing within each
    row, and no explicitly stored zeros.
    """

    dim: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", np.asarray(self.row_offsets, dtype=np.int64))
        object.__setattr__(self, "col_indices", np.asarray(self.col_indices, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        off, col, val = self.row_offsets, self.col_indices, self.values
        if self.dim < 0:
            raise ValueError("dim must be non-negative")
        if off.shape != (self.dim + 1,):
            raise ValueError("row_offsets must have length dim+1")
        if off[0] != 0 or off[-1] != len(col) or np.any(np.diff(off) < 0):
            raise ValueError("row_offsets must grow monotonically from 0 to nnz")
        if len(col) != len(val):
            raise ValueError("col_indices and values length mismatch")
        if len(col) and (col.min() < 0 or col.max() >= self.dim):
            raise ValueError("column index out of range")
        # strictly increasing columns within each row
        if len(col) > 1:
            inside_row = np.ones(len(col) - 1, dtype=bool)
            boundaries = off[1:-1]
            boundaries = boundaries[(boundaries > 0) & (boundaries < len(col))]
            inside_row[boundaries - 1] = False
            if np.any(col[1:][inside_row] <= col[:-1][inside_row]):
                raise ValueError("column indices must be strictly increasing per row")
        if np.any(val == 0.0):
            raise ValueError("explicit zero entries are not allowed")
        if not np.all(np.isfinite(val)):
            raise ValueError("sparse values must be finite")

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    def row_counts(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def row_ids(self) -> np.ndarray:
        """Row index of every stored entry, aligned with col_indices."""
        return np.repeat(np.arange(self.dim, dtype=np.int64), self.row_counts())

    def rowsums(self) -> np.ndarray:
        out = np.zeros(self.dim)
        np.add.at(out, self.row_ids(), self.values)
        return out

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.dim, self.dim))
        dense[self.row_ids(), self.col_indices] = self.values
        return dense

    def transpose(self) -> "CsrMatrix":
        return csr_from_coo(self.dim, self.col_indices, self.row_ids(), self.values)

    def is_symmetric(self, tol: float = 0.0) -> bool:
        t = self.transpose()
        if not np.array_equal(t.row_offsets, self.row_offsets):
            return False
        if not np.array_equal(t.col_indices, self.col_indices):
            return False
        return bool(np.all(np.abs(t.values - self.values) <= tol))

    def with_values(self, values: np.ndarray) -> "CsrMatrix":
        """Same sparsity pattern, new values (zeros are rejected by validation)."""
        return CsrMatrix(self.dim, self.row_offsets.copy(), self.col_indices.copy(), values)


def identity_csr(n: int) -> CsrMatrix:
    idx = np.arange(n, dtype=np.int64)
    return CsrMatrix(n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))


def csr_from_coo(dim: int, rows, cols, values) -> CsrMatrix:
    """Build CSR from COO triplets; duplicates are summed, zeros dropped."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if not (len(rows) == len(cols) == len(values)):
        raise ValueError("COO triplet arrays must have equal length")
    if len(rows) and (rows.min() < 0 or rows.max() >= dim or cols.min() < 0 or cols.max() >= dim):
        raise ValueError("COO index out of range")
    order = np.lexsort((cols, rows))
    rows, cols, values = rows[order], cols[order], values[order]
    if len(rows):
        keys = rows * dim + cols
        first = np.ones(len(keys), dtype=bool)
        first[1:] = keys[1:] != keys[:-1]
        group = np.cumsum(first) - 1
        summed = np.zeros(group[-1] + 1)
        np.add.at(summed, group, values)
        rows, cols = rows[first], cols[first]
        keep = summed != 0.0
        rows, cols, summed = rows[keep], cols[keep], summed[keep]
    else:
        summed = values
    offsets = np.zeros(dim + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    np.cumsum(offsets, out=offsets)
    return CsrMatrix(dim, offsets, cols, summed)


def csr_from_dense(a) -> CsrMatrix:
    a = _as_matrix(a, "matrix")
    if a.shape[0] != a.shape[1]:
        raise ValueError("csr_from_dense expects a square matrix")
    rows, cols = np.nonzero(a)
    return csr_from_coo(a.shape[0], rows, cols, a[rows, cols])


def densify(s: CsrMatrix) -> np.ndarray:
    return s.to_dense()


def matmul_dense(a, b) -> np.ndarray:
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        out = a @ b
    return _require_finite(out, "matmul_dense")


def spmm(s: CsrMatrix, x) -> np.ndarray:
    """Sparse @ dense. Matches matmul_dense(densify(s), x) up to roundoff."""
    x = _as_matrix(x, "x")
    if s.dim != x.shape[0]:
        raise ValueError(f"spmm shape mismatch: dim {s.dim} vs rows {x.shape[0]}")
    out = np.zeros((s.dim, x.shape[1]))
    if s.nnz == 0:
        return out
    with np.errstate(over="ignore", invalid="ignore"):
        contrib = s.values[:, None] * x[s.col_indices]
        counts = s.row_counts()
        nonempty = counts > 0
        starts = s.row_offsets[:-1][nonempty]
        out[nonempty] = np.add.reduceat(contrib, starts, axis=0)
    return _require_finite(out, "spmm")


def relu(x) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise max(0, x); the bool mask marks strictly positive entries."""
    x = _as_matrix(x, "x")
    mask = x > 0.0
    return np.where(mask, x, 0.0), mask


def softmax_rows(x) -> np.ndarray:
    """Row-wise softmax with per-row max subtraction for stability."""
    x = _as_matrix(x, "x")
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def glorot_init(rows: int, cols: int, rng_seed) -> np.ndarray:
    """Uniform(-b, b) with b = sqrt(6 / (rows + cols)); seeded and repeatable."""
    if rows < 1 or cols < 1:
        raise ValueError("glorot_init needs rows, cols >= 1")
    bound = np.sqrt(6.0 / (rows + cols))
    rng = np.random.default_rng(rng_seed)
    return rng.uniform(-bound, bound, size=(rows, cols))
