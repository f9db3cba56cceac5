"""CSR factor and operator-chain kernels, values and op accounting."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastcluster.errors import (
    DimensionMismatch,
    DuplicateEntry,
    IndexOutOfRange,
    ShapeChainMismatch,
)
from fastcluster.sparse import (
    OpCounter,
    fast_apply,
    fast_operator,
    factors_equal_exact,
    load_triplets,
    materialize,
    save_triplets,
    sparse_diagonal,
    sparse_from_dense,
    sparse_from_triplets,
    sparse_identity,
    spmm_dense,
    spmm_sparse,
    spmv,
    transpose,
)

from _oracles import (
    hadamard_butterflies,
    random_sparse_factor,
    random_triplets,
    scatter_dense,
    sylvester_hadamard,
)


# ---------------------------------------------------------------- construction


def test_triplets_identity():
    S = sparse_from_triplets(2, 2, [(0, 0, 1.0), (1, 1, 1.0)])
    assert S.nnz == 2
    np.testing.assert_array_equal(S.to_dense(), np.eye(2))
    S.validate()


def test_triplets_empty_matrix():
    S = sparse_from_triplets(2, 3, [])
    assert S.nnz == 0
    np.testing.assert_array_equal(S.to_dense(), np.zeros((2, 3)))
    S.validate()


def test_triplets_random_scatter_oracle():
    rng = np.random.default_rng(7)
    trips = random_triplets(3, 3, 5, rng)
    S = sparse_from_triplets(3, 3, trips)
    np.testing.assert_array_equal(S.to_dense(), scatter_dense(3, 3, trips))
    S.validate()


def test_triplets_rejects_out_of_range():
    with pytest.raises(IndexOutOfRange):
        sparse_from_triplets(2, 2, [(0, 2, 1.0)])
    with pytest.raises(IndexOutOfRange):
        sparse_from_triplets(2, 2, [(-1, 0, 1.0)])


def test_triplets_rejects_duplicates():
    with pytest.raises(DuplicateEntry):
        sparse_from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0)])


def test_triplets_drops_explicit_zeros():
    S = sparse_from_triplets(2, 2, [(0, 0, 0.0), (1, 1, 3.0)])
    assert S.nnz == 1
    S.validate()


def test_dense_round_trip():
    rng = np.random.default_rng(3)
    D = rng.standard_normal((5, 4))
    D[rng.random((5, 4)) < 0.5] = 0.0
    S = sparse_from_dense(D)
    np.testing.assert_array_equal(S.to_dense(), D)
    S.validate()


def test_scaled_drops_new_zeros():
    S = sparse_from_triplets(2, 2, [(0, 0, 2.0), (1, 1, 4.0)])
    Z = S.scaled(0.0)
    assert Z.nnz == 0
    half = S.scaled(0.5)
    np.testing.assert_array_equal(half.to_dense(), [[1.0, 0.0], [0.0, 2.0]])


def test_diagonal_and_identity_helpers():
    np.testing.assert_array_equal(sparse_identity(3).to_dense(), np.eye(3))
    np.testing.assert_array_equal(
        sparse_diagonal([2.0, 0.0, -1.0]).to_dense(), np.diag([2.0, 0.0, -1.0])
    )


# ------------------------------------------------------------------------ spmv


def test_spmv_identity_counts_nnz():
    S = sparse_identity(4)
    c = OpCounter()
    y = spmv(S, np.array([1.0, 2.0, 3.0, 4.0]), c)
    np.testing.assert_array_equal(y, [1.0, 2.0, 3.0, 4.0])
    assert c.multiply_adds == 4


def test_spmv_zero_matrix_counts_nothing():
    S = sparse_from_triplets(2, 3, [])
    c = OpCounter()
    y = spmv(S, np.ones(3), c)
    np.testing.assert_array_equal(y, [0.0, 0.0])
    assert c.multiply_adds == 0


def test_spmv_random_vs_dense_oracle():
    rng = np.random.default_rng(11)
    S = random_sparse_factor(5, 5, 10, rng)
    x = rng.standard_normal(5)
    np.testing.assert_allclose(spmv(S, x), S.to_dense() @ x, atol=1e-12)


def test_spmv_dimension_check():
    with pytest.raises(DimensionMismatch):
        spmv(sparse_identity(3), np.ones(4))


# ------------------------------------------------------------------ spmm_dense


def test_spmm_dense_lifted_examples():
    X = np.array([[1.0, -1.0], [2.0, 0.5], [3.0, 0.0], [4.0, 2.0]])
    c = OpCounter()
    np.testing.assert_array_equal(spmm_dense(sparse_identity(4), X, c), X)
    assert c.multiply_adds == 4 * 2

    Z = sparse_from_triplets(2, 4, [])
    c.reset()
    np.testing.assert_array_equal(spmm_dense(Z, X, c), np.zeros((2, 2)))
    assert c.multiply_adds == 0

    rng = np.random.default_rng(13)
    S = random_sparse_factor(5, 4, 9, rng)
    c.reset()
    out = spmm_dense(S, X[:4], c)
    np.testing.assert_allclose(out, S.to_dense() @ X[:4], atol=1e-12)
    assert c.multiply_adds == 9 * 2


def test_spmm_dense_dimension_check():
    with pytest.raises(DimensionMismatch):
        spmm_dense(sparse_identity(3), np.ones((4, 2)))


# ----------------------------------------------------------------- spmm_sparse


def test_spmm_sparse_identity_left():
    rng = np.random.default_rng(17)
    S = random_sparse_factor(4, 6, 8, rng)
    P = spmm_sparse(sparse_identity(4), S)
    assert factors_equal_exact(P, S)


def test_spmm_sparse_composes_permutations():
    # p sends row r to column p[r]; the product composes the index maps.
    p1 = [2, 0, 1, 3]
    p2 = [1, 3, 2, 0]
    P1 = sparse_from_triplets(4, 4, [(r, c, 1.0) for r, c in enumerate(p1)])
    P2 = sparse_from_triplets(4, 4, [(r, c, 1.0) for r, c in enumerate(p2)])
    composed = [p2[c] for c in p1]
    expected = sparse_from_triplets(4, 4, [(r, c, 1.0) for r, c in enumerate(composed)])
    assert factors_equal_exact(spmm_sparse(P1, P2), expected)


def test_spmm_sparse_random_vs_dense_oracle():
    rng = np.random.default_rng(19)
    A = random_sparse_factor(6, 5, 12, rng)
    B = random_sparse_factor(5, 7, 14, rng)
    P = spmm_sparse(A, B)
    P.validate()
    np.testing.assert_allclose(P.to_dense(), A.to_dense() @ B.to_dense(), atol=1e-12)


def test_spmm_sparse_dimension_check():
    with pytest.raises(DimensionMismatch):
        spmm_sparse(sparse_identity(3), sparse_identity(4))


# ------------------------------------------------------------------- transpose


def test_transpose_round_trip_bit_exact():
    rng = np.random.default_rng(23)
    S = random_sparse_factor(6, 4, 11, rng)
    T = transpose(S)
    T.validate()
    np.testing.assert_array_equal(T.to_dense(), S.to_dense().T)
    assert factors_equal_exact(transpose(T), S)


# -------------------------------------------------------- operators and chains


def test_fast_operator_validates_chaining():
    with pytest.raises(ShapeChainMismatch):
        fast_operator([sparse_identity(3), sparse_identity(4)])
    with pytest.raises(ShapeChainMismatch):
        fast_operator([])


def test_fast_apply_identity_chain():
    V = fast_operator([sparse_identity(4), sparse_identity(4)])
    X = np.arange(8.0).reshape(4, 2)
    np.testing.assert_array_equal(fast_apply(V, X), X)
    assert V.shape == (4, 4)
    assert V.nnz_total == 8


def test_fast_apply_two_factor_vs_dense_oracle():
    rng = np.random.default_rng(29)
    A = random_sparse_factor(5, 4, 9, rng)
    B = random_sparse_factor(4, 6, 10, rng)
    V = fast_operator([A, B], scale=1.5)
    X = rng.standard_normal((6, 3))
    dense = 1.5 * (A.to_dense() @ B.to_dense())
    np.testing.assert_allclose(fast_apply(V, X), dense @ X, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(materialize(V), dense, rtol=1e-12, atol=1e-14)


def test_fast_apply_hadamard_butterflies():
    V = fast_operator(hadamard_butterflies(3))
    e0 = np.zeros(8)
    e0[0] = 1.0
    c = OpCounter()
    col = fast_apply(V, e0, c)
    np.testing.assert_array_equal(col, np.ones(8))
    assert c.multiply_adds == 48  # 3 factors * 16 nnz * 1 column
    c.reset()
    dense = OpCounter()
    dense.add(8 * 8)  # one dense matvec of the materialized 8x8
    assert dense.multiply_adds == 64
    np.testing.assert_array_equal(materialize(V), sylvester_hadamard(3))


def test_fast_apply_vector_and_matrix_agree():
    rng = np.random.default_rng(31)
    A = random_sparse_factor(4, 4, 8, rng)
    V = fast_operator([A])
    x = rng.standard_normal(4)
    np.testing.assert_array_equal(fast_apply(V, x), fast_apply(V, x[:, None])[:, 0])


def test_fast_apply_dimension_check():
    V = fast_operator([sparse_identity(3)])
    with pytest.raises(DimensionMismatch):
        fast_apply(V, np.ones((4, 2)))


def test_butterfly_count_ratio_shrinks():
    # Chain cost p * 2^(p+1) per column against the dense 4^p.
    ratios = []
    for p in range(3, 10):
        chain = p * 2 ** (p + 1)
        dense = 4**p
        V_nnz = sum(f.nnz for f in hadamard_butterflies(p)) if p <= 6 else chain
        if p <= 6:
            assert V_nnz == chain
        ratios.append(chain / dense)
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] < 0.05


# -------------------------------------------------------------------------- io


def test_triplet_file_round_trip(tmp_path):
    rng = np.random.default_rng(37)
    S = random_sparse_factor(6, 5, 13, rng)
    path = tmp_path / "factor.txt"
    save_triplets(S, path)
    R = load_triplets(path)
    assert factors_equal_exact(R, S)
    header = path.read_text().splitlines()[0].split()
    assert [int(h) for h in header] == [6, 5, 13]


def test_counter_reset_and_accumulate():
    c = OpCounter()
    c.add(5)
    c.add(7)
    assert c.multiply_adds == 12
    c.reset()
    assert c.multiply_adds == 0


# ------------------------------------------------------------------ properties


@st.composite
def sparse_and_vector(draw):
    n_rows = draw(st.integers(min_value=1, max_value=64))
    n_cols = draw(st.integers(min_value=1, max_value=64))
    nnz = draw(st.integers(min_value=0, max_value=min(n_rows * n_cols, 160)))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    S = random_sparse_factor(n_rows, n_cols, nnz, rng)
    x = rng.standard_normal(n_cols)
    return S, x


@settings(max_examples=60, deadline=None)
@given(sparse_and_vector())
def test_property_spmv_matches_dense(pair):
    S, x = pair
    np.testing.assert_allclose(spmv(S, x), S.to_dense() @ x, atol=1e-12)


@st.composite
def operator_chain(draw):
    n_factors = draw(st.integers(min_value=1, max_value=4))
    dims = [draw(st.integers(min_value=1, max_value=16)) for _ in range(n_factors + 1)]
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    factors = []
    for a, b in zip(dims, dims[1:]):
        nnz = draw(st.integers(min_value=0, max_value=min(a * b, 40)))
        factors.append(random_sparse_factor(a, b, nnz, rng))
    n_cols = draw(st.integers(min_value=1, max_value=5))
    X = rng.standard_normal((dims[-1], n_cols))
    return factors, X


@settings(max_examples=50, deadline=None)
@given(operator_chain())
def test_property_fast_apply_counter_and_values(pair):
    factors, X = pair
    V = fast_operator(factors)
    c = OpCounter()
    out = fast_apply(V, X, c)
    assert c.multiply_adds == sum(f.nnz for f in factors) * X.shape[1]
    dense = materialize(V)
    np.testing.assert_allclose(out, dense @ X, rtol=1e-10, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(operator_chain())
def test_property_spmm_sparse_matches_dense(pair):
    factors, _ = pair
    prod = factors[0]
    dense = factors[0].to_dense()
    for f in factors[1:]:
        prod = spmm_sparse(prod, f)
        dense = dense @ f.to_dense()
        prod.validate()
    np.testing.assert_allclose(prod.to_dense(), dense, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(sparse_and_vector())
def test_property_double_transpose_identity(pair):
    S, _ = pair
    assert factors_equal_exact(transpose(transpose(S)), S)
