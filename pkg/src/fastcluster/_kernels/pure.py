"""NumPy fallback for the CSR kernels.

Same call signatures as the compiled module. Matvec and matmat are
vectorized with a cumulative-sum trick over the nonzero stream, which
handles empty rows without special cases. The sparse-sparse product
keeps a dense accumulator the size of one output row.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def csr_matvec(values, col_indices, row_offsets, x):
    contrib = values * x[col_indices]
    csum = np.concatenate(([0.0], np.cumsum(contrib)))
    return csum[row_offsets[1:]] - csum[row_offsets[:-1]]


def csr_matmat(values, col_indices, row_offsets, X):
    m = X.shape[1]
    contrib = values[:, None] * X[col_indices]
    csum = np.vstack((np.zeros((1, m)), np.cumsum(contrib, axis=0)))
    return csum[row_offsets[1:]] - csum[row_offsets[:-1]]


def csr_spmm(a_values, a_cols, a_offs, b_values, b_cols, b_offs, n_cols_out):
    n_rows = len(a_offs) - 1
    acc = np.zeros(n_cols_out)
    out_offs = np.zeros(n_rows + 1, dtype=np.int64)
    val_chunks = []
    col_chunks = []
    for r in range(n_rows):
        start, end = a_offs[r], a_offs[r + 1]
        if end == start:
            out_offs[r + 1] = out_offs[r]
            continue
        touched_parts = []
        for j in range(start, end):
            c = a_cols[j]
            bs, be = b_offs[c], b_offs[c + 1]
            cols = b_cols[bs:be]
            acc[cols] += a_values[j] * b_values[bs:be]
            touched_parts.append(cols)
        touched = np.unique(np.concatenate(touched_parts))
        vals = acc[touched]
        acc[touched] = 0.0
        keep = vals != 0.0
        touched = touched[keep]
        vals = vals[keep]
        col_chunks.append(touched)
        val_chunks.append(vals)
        out_offs[r + 1] = out_offs[r] + len(touched)
    if val_chunks:
        out_values = np.concatenate(val_chunks)
        out_cols = np.concatenate(col_chunks).astype(np.int64)
    else:
        out_values = np.zeros(0)
        out_cols = np.zeros(0, dtype=np.int64)
    return out_values, out_cols, out_offs
