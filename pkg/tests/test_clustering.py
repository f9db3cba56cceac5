"""Dense Lloyd baseline and the factorized-centroid variant."""

from __future__ import annotations

import numpy as np
import pytest

from fastcluster.clustering import (
    QkConfig,
    assign_dense,
    assign_fast,
    clustering_objective,
    decomposition_identity_check,
    draw_initial_centroids,
    lloyd_kmeans,
    qkmeans,
    update_centroids,
    weighted_target,
)
from fastcluster.datasets import BlobsSpec, make_blobs
from fastcluster.errors import DimensionMismatch, SingularWeight
from fastcluster.palm import PalmConfig
from fastcluster.sparse import OpCounter, fast_operator, materialize, sparse_from_dense

from _oracles import brute_force_assign

# ---------------------------------------------------------------- assign_dense


def test_assign_dense_single_centroid():
    X = np.random.default_rng(0).standard_normal((7, 3))
    t, sq = assign_dense(X, X.mean(axis=0, keepdims=True))
    assert np.all(t == 0)
    assert np.all(sq >= 0)


def test_assign_dense_points_equal_centroids():
    rng = np.random.default_rng(1)
    C = rng.standard_normal((5, 4)) * 10
    t, sq = assign_dense(C, C)
    np.testing.assert_array_equal(t, np.arange(5))
    np.testing.assert_allclose(sq, 0.0, atol=1e-9)


def test_assign_dense_vs_brute_force_oracle():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((20, 3))
    C = rng.standard_normal((4, 3))
    t, sq = assign_dense(X, C)
    t_ref, sq_ref = brute_force_assign(X, C)
    np.testing.assert_array_equal(t, t_ref)
    np.testing.assert_allclose(sq, sq_ref, rtol=1e-9, atol=1e-9)


def test_assign_dense_counter_and_ties():
    X = np.ones((6, 2))
    C = np.ones((3, 2))  # all centroids identical: ties go to index 0
    c = OpCounter()
    t, _ = assign_dense(X, C, c)
    assert np.all(t == 0)
    assert c.multiply_adds == 6 * 3 * 2


def test_assign_dense_dimension_check():
    with pytest.raises(DimensionMismatch):
        assign_dense(np.ones((4, 3)), np.ones((2, 2)))


# ----------------------------------------------------------------- assign_fast


def test_assign_fast_identity_chain_matches_dense():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 6))
    C = rng.standard_normal((4, 6))
    V = fast_operator([sparse_from_dense(C)])
    t_fast, sq_fast = assign_fast(X, V)
    t_dense, sq_dense = assign_dense(X, C)
    np.testing.assert_array_equal(t_fast, t_dense)
    np.testing.assert_allclose(sq_fast, sq_dense, rtol=1e-9, atol=1e-9)


def test_assign_fast_two_factor_vs_materialization_oracle():
    rng = np.random.default_rng(4)
    from _oracles import random_sparse_factor

    A = random_sparse_factor(5, 5, 12, rng)
    B = random_sparse_factor(5, 8, 16, rng)
    V = fast_operator([A, B])
    X = rng.standard_normal((40, 8))
    t_fast, _ = assign_fast(X, V)
    t_ref, _ = assign_dense(X, materialize(V))
    np.testing.assert_array_equal(t_fast, t_ref)


def test_assign_fast_counter_accounting():
    rng = np.random.default_rng(5)
    from _oracles import random_sparse_factor

    A = random_sparse_factor(4, 4, 8, rng)
    B = random_sparse_factor(4, 6, 10, rng)
    V = fast_operator([A, B])
    X = rng.standard_normal((25, 6))
    c = OpCounter()
    assign_fast(X, V, c)
    chain = 25 * (A.nnz + B.nnz)
    norms = 4 * 6  # K*D read off the materialized rows
    assert c.multiply_adds == chain + norms


# ------------------------------------------------------------ update_centroids


def test_update_centroids_single_cluster_is_global_mean():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((15, 4))
    U, n = update_centroids(X, np.zeros(15, dtype=np.int64), 1)
    np.testing.assert_allclose(U[0], X.mean(axis=0), rtol=1e-12)
    assert n.tolist() == [15]


def test_update_centroids_each_point_its_own_cluster():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((6, 3))
    U, n = update_centroids(X, np.arange(6, dtype=np.int64), 6)
    np.testing.assert_allclose(U, X, rtol=1e-15)
    assert n.tolist() == [1] * 6


def test_update_centroids_vs_accumulation_oracle():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((40, 5))
    t = rng.integers(0, 4, 40)
    U, n = update_centroids(X, t, 4)
    for k in range(4):
        members = X[t == k]
        np.testing.assert_allclose(U[k], members.mean(axis=0), rtol=1e-12)
        assert n[k] == len(members)


def test_update_centroids_reseeds_empty_cluster():
    X = np.array([[0.0], [1.0], [10.0]])
    t = np.array([0, 0, 2], dtype=np.int64)
    U, n = update_centroids(X, t, 3)
    np.testing.assert_allclose(U[0], [0.5])
    np.testing.assert_allclose(U[2], [10.0])
    # Farthest point from its own centroid seeds the empty row; ties on
    # distance resolve to the smallest point index.
    np.testing.assert_allclose(U[1], [0.0])
    assert n.tolist() == [2, 1, 1]
    np.testing.assert_array_equal(t, [0, 0, 2])  # assignments untouched


def test_update_centroids_reseeds_multiple_empties_with_distinct_points():
    X = np.array([[0.0], [4.0], [10.0]])
    t = np.zeros(3, dtype=np.int64)
    U, n = update_centroids(X, t, 3)
    np.testing.assert_allclose(U[0], [14.0 / 3.0])
    np.testing.assert_allclose(U[1], [10.0])  # farthest from the mean
    np.testing.assert_allclose(U[2], [0.0])  # second farthest
    assert n.tolist() == [3, 1, 1]


def test_update_centroids_too_few_points_for_empties():
    X = np.array([[0.0], [1.0]])
    with pytest.raises(SingularWeight):
        update_centroids(X, np.zeros(2, dtype=np.int64), 5)


def test_update_centroids_minimizes_fixed_assignment_objective():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((30, 4))
    t = rng.integers(0, 3, 30)
    U, _ = update_centroids(X, t, 3)
    base = float(np.sum((X - U[t]) ** 2))
    for k in range(3):
        for _ in range(10):
            direction = rng.standard_normal(4)
            direction /= np.linalg.norm(direction)
            P = U.copy()
            P[k] = P[k] + 1e-3 * direction
            perturbed = float(np.sum((X - P[t]) ** 2))
            assert perturbed >= base - 1e-12


# ------------------------------------------------------------- weighted_target


def test_weighted_target_unit_sizes():
    rng = np.random.default_rng(10)
    U = rng.standard_normal((3, 4))
    A, W = weighted_target(U, np.ones(3, dtype=np.int64))
    np.testing.assert_allclose(A, U, rtol=1e-15)
    np.testing.assert_array_equal(W.to_dense(), np.eye(3))


def test_weighted_target_scales_rows_by_root_size():
    U = np.array([[1.0, 2.0], [3.0, 4.0]])
    A, W = weighted_target(U, np.array([4, 9]))
    np.testing.assert_allclose(A, [[2.0, 4.0], [9.0, 12.0]])
    np.testing.assert_array_equal(W.to_dense(), np.diag([2.0, 3.0]))


def test_weighted_target_random_vs_row_scaling_oracle():
    rng = np.random.default_rng(11)
    U = rng.standard_normal((5, 6))
    n = rng.integers(1, 50, 5)
    A, _ = weighted_target(U, n)
    for k in range(5):
        np.testing.assert_allclose(A[k], np.sqrt(n[k]) * U[k], rtol=1e-14)


def test_weighted_target_rejects_empty_cluster():
    with pytest.raises(SingularWeight):
        weighted_target(np.ones((2, 2)), np.array([3, 0]))


# ---------------------------------------------------------------- lloyd_kmeans


def test_lloyd_one_dimensional_exact():
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    model = lloyd_kmeans(X, 2, init_centroids=np.array([[0.0], [10.0]]))
    assert model.iteration_count <= 2
    np.testing.assert_allclose(np.sort(model.centroids_dense[:, 0]), [0.5, 10.5])
    assert model.objective_trace[-1] == pytest.approx(1.0, abs=1e-12)


def test_lloyd_k_equals_n_reaches_zero():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((6, 3))
    model = lloyd_kmeans(X, 6, init_centroids=X.copy())
    assert model.objective_trace[-1] == pytest.approx(0.0, abs=1e-12)


def test_lloyd_trace_non_increasing_over_seeds():
    for seed in range(20):
        ds = make_blobs(BlobsSpec(200, 8, 6, center_std=1.0, seed=seed))
        model = lloyd_kmeans(ds.X, 6, seed=seed)
        tr = np.asarray(model.objective_trace)
        assert np.all(tr[1:] <= tr[:-1] * (1 + 1e-9))


def test_lloyd_model_bookkeeping():
    ds = make_blobs(BlobsSpec(100, 5, 4, seed=3))
    c = OpCounter()
    model = lloyd_kmeans(ds.X, 4, seed=3, counter=c)
    assert model.kind == "dense"
    assert model.cluster_sizes.sum() == 100
    np.testing.assert_array_equal(
        model.cluster_sizes, np.bincount(model.assignments, minlength=4)
    )
    assert len(model.iteration_stats) == model.iteration_count + 1
    assert model.iteration_stats[0]["assign_ops"] == 0
    assert c.multiply_adds == sum(s["assign_ops"] for s in model.iteration_stats)
    assert model.centroids().shape == (4, 5)


def test_draw_initial_centroids_distinct_rows():
    rng = np.random.default_rng(13)
    X = rng.standard_normal((50, 3))
    init = draw_initial_centroids(X, 10, seed=4)
    assert init.shape == (10, 3)
    assert len({tuple(r) for r in init}) == 10
    np.testing.assert_array_equal(init, draw_initial_centroids(X, 10, seed=4))
    with pytest.raises(DimensionMismatch):
        draw_initial_centroids(X, 51, seed=0)


# --------------------------------------------------- decomposition identity


def test_decomposition_identity_at_the_means():
    rng = np.random.default_rng(14)
    X = rng.standard_normal((30, 4))
    t = rng.integers(0, 3, 30)
    U, _ = update_centroids(X, t, 3)
    lhs, rhs = decomposition_identity_check(X, t, U, U)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_decomposition_identity_random_perturbation():
    rng = np.random.default_rng(15)
    X = rng.standard_normal((40, 5))
    t = rng.integers(0, 4, 40)
    U, _ = update_centroids(X, t, 4)
    V = U + 0.3 * rng.standard_normal(U.shape)
    lhs, rhs = decomposition_identity_check(X, t, U, V)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_decomposition_identity_symmetric_cluster():
    # Points symmetric about the mean: the cross term vanishes exactly.
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0], [0.0, -2.0]])
    t = np.zeros(4, dtype=np.int64)
    U = np.zeros((1, 2))
    V = np.array([[0.7, -0.2]])
    lhs, rhs = decomposition_identity_check(X, t, U, V)
    assert lhs == pytest.approx(rhs, rel=1e-12)


# --------------------------------------------------------------------- qkmeans


def test_qkmeans_unconstrained_limit_recovers_means():
    rng = np.random.default_rng(16)
    K, D = 8, 8
    centers = rng.uniform(-10, 10, (K, D))
    X = np.repeat(centers, 20, axis=0)
    cfg = QkConfig(n_clusters=K, sparsity_level=D, n_factors=2, seed=3)
    model = qkmeans(X, cfg, init_centroids=centers)
    assert model.objective_trace[-1] <= 1e-12
    V = materialize(model.centroids_op)
    matched = V[np.argsort(V[:, 0])]
    expected = centers[np.argsort(centers[:, 0])]
    np.testing.assert_allclose(matched, expected, atol=1e-8)


def test_qkmeans_trace_non_increasing_over_seeds():
    for seed in range(10):
        ds = make_blobs(BlobsSpec(500, 32, 16, center_std=1.0, seed=seed))
        model = qkmeans(ds.X, QkConfig(n_clusters=16, sparsity_level=3, seed=seed))
        tr = np.asarray(model.objective_trace)
        assert np.all(tr[1:] <= tr[:-1] * (1 + 1e-9))
        assert tr[-1] <= tr[0] * (1 + 1e-9)


def test_qkmeans_single_full_factor_tracks_lloyd():
    ds = make_blobs(BlobsSpec(300, 8, 5, center_std=1.5, seed=11))
    for cap in (1, 2, 3):
        km = lloyd_kmeans(ds.X, 5, max_iterations=cap, seed=11)
        qm = qkmeans(
            ds.X,
            QkConfig(
                n_clusters=5, sparsity_level=5, n_factors=1,
                max_outer_iterations=cap, seed=11,
            ),
        )
        np.testing.assert_array_equal(km.assignments, qm.assignments)
        assert qm.objective_trace[-1] == pytest.approx(
            km.objective_trace[-1], rel=1e-6
        )


def test_qkmeans_model_bookkeeping():
    ds = make_blobs(BlobsSpec(300, 16, 8, seed=21))
    c = OpCounter()
    model = qkmeans(
        ds.X, QkConfig(n_clusters=8, sparsity_level=2, seed=21), counter=c
    )
    assert model.kind == "factorized"
    assert model.cluster_sizes.sum() == 300
    np.testing.assert_array_equal(
        model.cluster_sizes, np.bincount(model.assignments, minlength=8)
    )
    assert len(model.iteration_stats) == model.iteration_count + 1
    assert model.iteration_stats[0]["assign_ops"] == 0
    assert model.iteration_stats[0]["factorize_ms"] > 0.0  # the init factorization
    assert c.multiply_adds == sum(s["assign_ops"] for s in model.iteration_stats)
    assert model.centroids().shape == (8, 16)
    # The traced objective is the clustering objective of the final state.
    final = clustering_objective(ds.X, model.assignments, model.centroids_op)
    assert model.objective_trace[-1] == pytest.approx(final, rel=1e-12)


def test_qkmeans_hierarchical_init_runs_and_stays_monotone():
    ds = make_blobs(BlobsSpec(200, 16, 4, seed=5))
    model = qkmeans(
        ds.X,
        QkConfig(
            n_clusters=4, sparsity_level=2, seed=5, use_hierarchical=True,
            palm=PalmConfig(max_iterations=60),
        ),
    )
    tr = np.asarray(model.objective_trace)
    assert np.all(tr[1:] <= tr[:-1] * (1 + 1e-9))


def test_qkmeans_accepts_init_factors():
    ds = make_blobs(BlobsSpec(150, 8, 4, seed=6))
    first = qkmeans(ds.X, QkConfig(n_clusters=4, sparsity_level=2, seed=6))
    resumed = qkmeans(
        ds.X,
        QkConfig(n_clusters=4, sparsity_level=2, seed=6, max_outer_iterations=3),
        init_factors=list(first.centroids_op.factors),
    )
    assert resumed.objective_trace[-1] <= first.objective_trace[-1] * (1 + 1e-9)


def test_clustering_objective_dense_and_operator_agree():
    rng = np.random.default_rng(22)
    X = rng.standard_normal((20, 6))
    t = rng.integers(0, 3, 20)
    C = rng.standard_normal((3, 6))
    direct = clustering_objective(X, t, C)
    wrapped = clustering_objective(X, t, fast_operator([sparse_from_dense(C)]))
    assert direct == pytest.approx(wrapped, rel=1e-12)
    oracle = float(np.sum((X - C[t]) ** 2))
    assert direct == pytest.approx(oracle, rel=1e-12)
