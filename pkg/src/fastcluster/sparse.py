"""CSR sparse factors, chained fast operators, and multiply-add accounting.

A :class:`SparseFactor` is an immutable CSR matrix in canonical form:
column indices strictly increasing within each row and no stored zero
values. A :class:`FastOperator` is an ordered product of factors with a
scalar in front; applying it costs one sparse-dense product per factor
instead of one dense product, which is the entire point of the package.

Every operation that models a matrix product can advance an
:class:`OpCounter` by its nominal multiply-add cost, so complexity
claims are checked by counting, never by wall clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    DimensionMismatch,
    DuplicateEntry,
    IndexOutOfRange,
    ShapeChainMismatch,
)

__all__ = [
    "OpCounter",
    "SparseFactor",
    "FastOperator",
    "sparse_from_triplets",
    "sparse_from_dense",
    "sparse_identity",
    "sparse_diagonal",
    "spmv",
    "spmm_dense",
    "spmm_sparse",
    "transpose",
    "fast_operator",
    "fast_apply",
    "materialize",
    "save_triplets",
    "load_triplets",
]


class OpCounter:
    """Accumulator for nominal multiply-add counts."""

    __slots__ = ("multiply_adds",)

    def __init__(self) -> None:
        self.multiply_adds = 0

    def add(self, n: int) -> None:
        self.multiply_adds += int(n)

    def reset(self) -> None:
        self.multiply_adds = 0

    def __repr__(self) -> str:
        return f"OpCounter(multiply_adds={self.multiply_adds})"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SparseFactor:
    """Immutable CSR matrix in canonical form."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.row_offsets[-1])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        rows = np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))
        out[rows, self.col_indices] = self.values
        return out

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def scaled(self, alpha: float) -> "SparseFactor":
        """Return alpha * self, dropping entries that become exact zeros."""
        return _make_canonical_from_arrays(
            self.n_rows,
            self.n_cols,
            self.row_offsets,
            self.col_indices,
            self.values * float(alpha),
        )

    def validate(self) -> None:
        """Assert the canonical-form invariants. Meant for tests and IO."""
        offs, cols, vals = self.row_offsets, self.col_indices, self.values
        if offs.dtype != np.int64 or cols.dtype != np.int64:
            raise ValueError("index arrays must be int64")
        if vals.dtype != np.float64:
            raise ValueError("values must be float64")
        if len(offs) != self.n_rows + 1 or offs[0] != 0 or offs[-1] != len(vals):
            raise ValueError("row_offsets inconsistent with values")
        if len(cols) != len(vals):
            raise ValueError("col_indices inconsistent with values")
        if np.any(np.diff(offs) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if len(cols) and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise IndexOutOfRange("column index out of range")
        for r in range(self.n_rows):
            seg = cols[offs[r]: offs[r + 1]]
            if len(seg) > 1 and np.any(np.diff(seg) <= 0):
                raise ValueError(f"columns not strictly increasing in row {r}")
        if np.any(vals == 0.0):
            raise ValueError("stored explicit zero value")


def _make_canonical_from_arrays(n_rows, n_cols, row_offsets, col_indices, values):
    """Build a factor from CSR arrays that are sorted but may hold zeros."""
    values = np.asarray(values, dtype=np.float64)
    keep = values != 0.0
    if not keep.all():
        counts = np.diff(row_offsets)
        rows = np.repeat(np.arange(n_rows), counts)
        rows = rows[keep]
        col_indices = np.asarray(col_indices)[keep]
        values = values[keep]
        row_offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(row_offsets, rows + 1, 1)
        row_offsets = np.cumsum(row_offsets)
    return SparseFactor(
        int(n_rows),
        int(n_cols),
        _frozen(np.asarray(row_offsets, dtype=np.int64)),
        _frozen(np.asarray(col_indices, dtype=np.int64)),
        _frozen(values),
    )


def sparse_from_triplets(n_rows, n_cols, triplets) -> SparseFactor:
    """Build a factor from (row, col, value) triplets.

    Entries with value exactly zero are dropped. A repeated (row, col)
    position raises :class:`DuplicateEntry`; callers that want additive
    semantics must combine duplicates themselves first.
    """
    if n_rows < 0 or n_cols < 0:
        raise DimensionMismatch("negative shape")
    trips = list(triplets)
    if not trips:
        return SparseFactor(
            int(n_rows),
            int(n_cols),
            _frozen(np.zeros(n_rows + 1, dtype=np.int64)),
            _frozen(np.zeros(0, dtype=np.int64)),
            _frozen(np.zeros(0)),
        )
    rows = np.array([t[0] for t in trips], dtype=np.int64)
    cols = np.array([t[1] for t in trips], dtype=np.int64)
    vals = np.array([t[2] for t in trips], dtype=np.float64)
    if len(rows) and (rows.min() < 0 or rows.max() >= n_rows):
        raise IndexOutOfRange(f"row index out of range for {n_rows}x{n_cols}")
    if len(cols) and (cols.min() < 0 or cols.max() >= n_cols):
        raise IndexOutOfRange(f"column index out of range for {n_rows}x{n_cols}")
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows) > 1:
        same = (np.diff(rows) == 0) & (np.diff(cols) == 0)
        if same.any():
            i = int(np.flatnonzero(same)[0])
            raise DuplicateEntry(f"duplicate entry at ({rows[i]}, {cols[i]})")
    row_offsets = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(row_offsets, rows + 1, 1)
    row_offsets = np.cumsum(row_offsets)
    return _make_canonical_from_arrays(n_rows, n_cols, row_offsets, cols, vals)


def sparse_from_dense(dense: np.ndarray) -> SparseFactor:
    """Build a factor from a dense matrix, keeping only the nonzeros."""
    dense = np.asarray(dense, dtype=np.float64)
    if dense.ndim != 2:
        raise DimensionMismatch("expected a 2-d array")
    n_rows, n_cols = dense.shape
    rows, cols = np.nonzero(dense)
    vals = dense[rows, cols]
    row_offsets = np.zeros(n_rows + 1, dtype=np.int64)
    np.add.at(row_offsets, rows + 1, 1)
    row_offsets = np.cumsum(row_offsets)
    return _make_canonical_from_arrays(n_rows, n_cols, row_offsets, cols, vals)


def sparse_identity(n: int) -> SparseFactor:
    return sparse_diagonal(np.ones(n))


def sparse_diagonal(diag) -> SparseFactor:
    diag = np.asarray(diag, dtype=np.float64)
    n = len(diag)
    idx = np.arange(n, dtype=np.int64)
    return _make_canonical_from_arrays(n, n, np.arange(n + 1, dtype=np.int64), idx, diag)


def factors_equal_exact(a: SparseFactor, b: SparseFactor) -> bool:
    """Bitwise structural equality of two factors."""
    return (
        a.shape == b.shape
        and np.array_equal(a.row_offsets, b.row_offsets)
        and np.array_equal(a.col_indices, b.col_indices)
        and np.array_equal(a.values, b.values)
    )


def spmv(S: SparseFactor, x: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Sparse matrix times vector. Counter advances by nnz(S)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != S.n_cols:
        raise DimensionMismatch(f"vector of length {S.n_cols} expected")
    if counter is not None:
        counter.add(S.nnz)
    return _kernels.csr_matvec(S.values, S.col_indices, S.row_offsets, x)


def spmm_dense(S: SparseFactor, X: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Sparse times dense. Counter advances by nnz(S) * n_cols(X)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != S.n_cols:
        raise DimensionMismatch(f"dense operand with {S.n_cols} rows expected")
    if counter is not None:
        counter.add(S.nnz * X.shape[1])
    return _kernels.csr_matmat(S.values, S.col_indices, S.row_offsets, X)


def spmm_sparse(A: SparseFactor, B: SparseFactor) -> SparseFactor:
    """Sparse times sparse, result in canonical form."""
    if A.n_cols != B.n_rows:
        raise DimensionMismatch(f"cannot chain {A.shape} and {B.shape}")
    vals, cols, offs = _kernels.csr_spmm(
        A.values, A.col_indices, A.row_offsets,
        B.values, B.col_indices, B.row_offsets,
        B.n_cols,
    )
    return SparseFactor(A.n_rows, B.n_cols, _frozen(offs), _frozen(cols), _frozen(vals))


def transpose(S: SparseFactor) -> SparseFactor:
    """Transpose in canonical form."""
    order = np.argsort(S.col_indices, kind="stable")
    rows = np.repeat(np.arange(S.n_rows, dtype=np.int64), np.diff(S.row_offsets))
    t_cols = rows[order]
    t_vals = S.values[order]
    t_offs = np.zeros(S.n_cols + 1, dtype=np.int64)
    np.add.at(t_offs, S.col_indices + 1, 1)
    t_offs = np.cumsum(t_offs)
    return SparseFactor(S.n_cols, S.n_rows, _frozen(t_offs), _frozen(t_cols), _frozen(t_vals))


@dataclass(frozen=True)
class FastOperator:
    """Ordered product ``scale * factors[0] @ ... @ factors[-1]``."""

    factors: tuple[SparseFactor, ...]
    scale: float = 1.0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.factors[0].n_rows, self.factors[-1].n_cols)

    @property
    def nnz_total(self) -> int:
        return sum(f.nnz for f in self.factors)


def fast_operator(factors, scale: float = 1.0) -> FastOperator:
    """Validate chaining and wrap the factor list."""
    factors = tuple(factors)
    if not factors:
        raise ShapeChainMismatch("operator needs at least one factor")
    for left, right in zip(factors, factors[1:]):
        if left.n_cols != right.n_rows:
            raise ShapeChainMismatch(f"cannot chain {left.shape} and {right.shape}")
    return FastOperator(factors, float(scale))


def fast_apply(V: FastOperator, X: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Apply the operator to the columns of X, rightmost factor first.

    Counter advances by sum over factors of nnz(S_q) * n_cols(X).
    """
    X = np.asarray(X, dtype=np.float64)
    vector = X.ndim == 1
    if vector:
        X = X[:, None]
    if X.shape[0] != V.shape[1]:
        raise DimensionMismatch(f"operand with {V.shape[1]} rows expected")
    out = X
    for S in reversed(V.factors):
        out = spmm_dense(S, out, counter)
    if V.scale != 1.0:
        out = V.scale * out
    return out[:, 0] if vector else out


def materialize(V: FastOperator) -> np.ndarray:
    """Dense matrix equal to the operator. Not counted; reporting only."""
    out = V.factors[-1].to_dense()
    for S in reversed(V.factors[:-1]):
        out = spmm_dense(S, out)
    if V.scale != 1.0:
        out = V.scale * out
    return out


def save_triplets(S: SparseFactor, path) -> None:
    """Write a factor as text: a header line, then one triplet per line."""
    rows = np.repeat(np.arange(S.n_rows), np.diff(S.row_offsets))
    with open(path, "w") as fh:
        fh.write(f"{S.n_rows} {S.n_cols} {S.nnz}\n")
        for r, c, v in zip(rows, S.col_indices, S.values):
            fh.write(f"{r} {c} {v:.17g}\n")


def load_triplets(path) -> SparseFactor:
    """Read a factor written by :func:`save_triplets`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: expected 'n_rows n_cols nnz' header")
        n_rows, n_cols, nnz = (int(t) for t in header)
        trips = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            r, c, v = line.split()
            trips.append((int(r), int(c), float(v)))
    if len(trips) != nnz:
        raise ValueError(f"{path}: header declares {nnz} entries, found {len(trips)}")
    return sparse_from_triplets(n_rows, n_cols, trips)
