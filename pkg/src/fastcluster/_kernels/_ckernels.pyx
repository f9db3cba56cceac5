# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled CSR kernels. Hot loops behind fastcluster's sparse operations."""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport qsort

NAME = "cython"

ctypedef cnp.int64_t idx_t


cdef int _cmp_idx(const void* pa, const void* pb) noexcept nogil:
    cdef idx_t a = (<const idx_t*> pa)[0]
    cdef idx_t b = (<const idx_t*> pb)[0]
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def csr_matvec(const double[::1] values, const idx_t[::1] col_indices,
               const idx_t[::1] row_offsets, const double[::1] x):
    cdef Py_ssize_t n_rows = row_offsets.shape[0] - 1
    out_arr = np.zeros(n_rows, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t r
    cdef idx_t j
    cdef double acc
    with nogil:
        for r in range(n_rows):
            acc = 0.0
            for j in range(row_offsets[r], row_offsets[r + 1]):
                acc = acc + values[j] * x[col_indices[j]]
            out[r] = acc
    return out_arr


def csr_matmat(const double[::1] values, const idx_t[::1] col_indices,
               const idx_t[::1] row_offsets, const double[:, ::1] X):
    cdef Py_ssize_t n_rows = row_offsets.shape[0] - 1
    cdef Py_ssize_t m = X.shape[1]
    out_arr = np.zeros((n_rows, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, t
    cdef idx_t j, c
    cdef double v
    with nogil:
        for r in range(n_rows):
            for j in range(row_offsets[r], row_offsets[r + 1]):
                v = values[j]
                c = col_indices[j]
                for t in range(m):
                    out[r, t] += v * X[c, t]
    return out_arr


def csr_spmm(const double[::1] a_values, const idx_t[::1] a_cols, const idx_t[::1] a_offs,
             const double[::1] b_values, const idx_t[::1] b_cols, const idx_t[::1] b_offs,
             Py_ssize_t n_cols_out):
    cdef Py_ssize_t n_rows = a_offs.shape[0] - 1
    cdef Py_ssize_t r
    cdef idx_t ja, jb, ca, c
    cdef idx_t cap = 0

    for r in range(n_rows):
        for ja in range(a_offs[r], a_offs[r + 1]):
            ca = a_cols[ja]
            cap += b_offs[ca + 1] - b_offs[ca]
    if cap > n_rows * <idx_t> n_cols_out:
        cap = n_rows * <idx_t> n_cols_out

    acc_arr = np.zeros(n_cols_out, dtype=np.float64)
    marker_arr = np.full(n_cols_out, -1, dtype=np.int64)
    touched_arr = np.empty(n_cols_out, dtype=np.int64)
    out_vals_arr = np.empty(cap, dtype=np.float64)
    out_cols_arr = np.empty(cap, dtype=np.int64)
    out_offs_arr = np.zeros(n_rows + 1, dtype=np.int64)

    cdef double[::1] acc = acc_arr
    cdef idx_t[::1] marker = marker_arr
    cdef idx_t[::1] touched = touched_arr
    cdef double[::1] out_vals = out_vals_arr
    cdef idx_t[::1] out_cols = out_cols_arr
    cdef idx_t[::1] out_offs = out_offs_arr

    cdef Py_ssize_t n_touched, k
    cdef idx_t pos = 0
    cdef double v

    with nogil:
        for r in range(n_rows):
            n_touched = 0
            for ja in range(a_offs[r], a_offs[r + 1]):
                ca = a_cols[ja]
                v = a_values[ja]
                for jb in range(b_offs[ca], b_offs[ca + 1]):
                    c = b_cols[jb]
                    if marker[c] != <idx_t> r:
                        marker[c] = <idx_t> r
                        acc[c] = 0.0
                        touched[n_touched] = c
                        n_touched += 1
                    acc[c] += v * b_values[jb]
            if n_touched > 0:
                qsort(&touched[0], n_touched, sizeof(idx_t), _cmp_idx)
            for k in range(n_touched):
                c = touched[k]
                v = acc[c]
                if v != 0.0:
                    out_vals[pos] = v
                    out_cols[pos] = c
                    pos += 1
            out_offs[r + 1] = pos

    return out_vals_arr[:pos].copy(), out_cols_arr[:pos].copy(), out_offs_arr
