"""Lloyd K-means and its variant with factorized centroid matrices.

The factorized variant replaces the centroid matrix by a product of
sparse factors. Each outer iteration assigns points through the fast
operator, recomputes cluster means, and refits the factors to the
weight-scaled mean matrix, warm starting from the previous factors so
the clustering objective never increases.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SingularWeight
from .palm import (
    FixedSingleton,
    PalmConfig,
    ProjectedSparse,
    factor_shapes,
    hierarchical_palm4msa,
    palm4msa,
)
from .sparse import (
    FastOperator,
    OpCounter,
    SparseFactor,
    fast_apply,
    fast_operator,
    materialize,
    sparse_diagonal,
    sparse_identity,
)

__all__ = [
    "Dataset",
    "QkConfig",
    "ClusteringModel",
    "draw_initial_centroids",
    "assign_dense",
    "assign_fast",
    "update_centroids",
    "weighted_target",
    "lloyd_kmeans",
    "qkmeans",
    "clustering_objective",
    "decomposition_identity_check",
]


@dataclass
class Dataset:
    """Points in rows, with optional integer labels."""

    X: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if len(self.labels) != len(self.X):
                raise DimensionMismatch("one label per row expected")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass
class QkConfig:
    """Settings for :func:`qkmeans`."""

    n_clusters: int
    sparsity_level: int
    n_factors: int | None = None
    tolerance: float = 1e-6
    max_outer_iterations: int = 20
    palm: PalmConfig = field(default_factory=PalmConfig)
    use_hierarchical: bool = False
    seed: int = 0


@dataclass
class ClusteringModel:
    """Fitted clustering, either dense or factorized centroids."""

    kind: str
    assignments: np.ndarray
    cluster_sizes: np.ndarray
    objective_trace: list[float]
    iteration_count: int
    centroids_dense: np.ndarray | None = None
    centroids_op: FastOperator | None = None
    iteration_stats: list[dict] = field(default_factory=list)

    def centroids(self) -> np.ndarray:
        if self.kind == "dense":
            return self.centroids_dense
        return materialize(self.centroids_op)


def draw_initial_centroids(X: np.ndarray, n_clusters: int, seed: int) -> np.ndarray:
    """K distinct data points, the shared seeded initialization."""
    n = len(X)
    if n_clusters > n:
        raise DimensionMismatch(f"cannot draw {n_clusters} points from {n}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=n_clusters, replace=False)
    return X[idx].copy()


def assign_dense(X, centroids, counter: OpCounter | None = None):
    """Nearest centroid per point against a dense centroid matrix.

    Returns (assignments, squared distances). Ties go to the smallest
    cluster index. Counter advances by the N*K*D of the inner products.
    """
    X = np.asarray(X, dtype=np.float64)
    centroids = np.asarray(centroids, dtype=np.float64)
    if X.shape[1] != centroids.shape[1]:
        raise DimensionMismatch("points and centroids disagree on dimension")
    n = len(X)
    if counter is not None:
        counter.add(n * centroids.shape[0] * centroids.shape[1])
    dots = X @ centroids.T
    norms = np.sum(centroids * centroids, axis=1)
    crit = norms[None, :] - 2.0 * dots
    t = np.argmin(crit, axis=1).astype(np.int64)
    sq = crit[np.arange(n), t] + np.sum(X * X, axis=1)
    return t, np.maximum(sq, 0.0)


def assign_fast(X, V: FastOperator, counter: OpCounter | None = None, dense_rows=None):
    """Nearest centroid per point, centroids applied as a factor chain.

    The inner products go through the operator one sparse factor at a
    time; centroid norms are read off the materialized rows, which
    advances the counter by K*D on top of the chain cost.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != V.shape[1]:
        raise DimensionMismatch("points and operator disagree on dimension")
    n = len(X)
    dots = fast_apply(V, np.ascontiguousarray(X.T), counter)
    rows = dense_rows if dense_rows is not None else materialize(V)
    if counter is not None:
        counter.add(rows.shape[0] * rows.shape[1])
    norms = np.sum(rows * rows, axis=1)
    crit = norms[:, None] - 2.0 * dots
    t = np.argmin(crit, axis=0).astype(np.int64)
    sq = crit[t, np.arange(n)] + np.sum(X * X, axis=1)
    return t, np.maximum(sq, 0.0)


def update_centroids(X, t, n_clusters: int):
    """Cluster means and sizes for the given assignment.

    An empty cluster's centroid row is re-seeded to the point currently
    farthest from its assigned centroid, and its size is reported as 1
    so the weighting stays invertible. Assignments are left untouched:
    the re-seeded row carries no assigned points, so it cannot disturb
    the clustering objective, while the next assignment round can start
    winning points for it.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    sizes = np.bincount(t, minlength=n_clusters).astype(np.int64)
    sums = np.zeros((n_clusters, d))
    np.add.at(sums, t, X)
    means = np.divide(sums, np.maximum(sizes, 1)[:, None])

    empty = np.flatnonzero(sizes == 0)
    if len(empty) > 0:
        if len(empty) > n:
            raise SingularWeight("not enough points to seed every empty cluster")
        sq = np.sum((X - means[t]) ** 2, axis=1)
        # Farthest points first, ties to the smallest point index; one
        # distinct seed point per empty cluster, in cluster order.
        order = np.argsort(-sq, kind="stable")
        for k, point in zip(empty, order):
            means[k] = X[point]
            sizes[k] = 1
    return means, sizes


def weighted_target(means, sizes):
    """Scale mean rows by sqrt of cluster size; also returns the diagonal."""
    sizes = np.asarray(sizes)
    if np.any(sizes <= 0):
        raise SingularWeight("every cluster must be nonempty")
    root = np.sqrt(sizes.astype(np.float64))
    return root[:, None] * means, sparse_diagonal(root)


def lloyd_kmeans(
    X,
    n_clusters: int,
    init_centroids=None,
    tolerance: float = 1e-6,
    max_iterations: int = 20,
    seed: int = 0,
    counter: OpCounter | None = None,
) -> ClusteringModel:
    """Standard Lloyd iteration with dense centroids.

    The first trace entry is the objective of the initial centroids
    under their own best assignment; each later entry follows a full
    assign-update round and never increases.
    """
    X = np.asarray(X, dtype=np.float64)
    centroids = (
        np.array(init_centroids, dtype=np.float64, copy=True)
        if init_centroids is not None
        else draw_initial_centroids(X, n_clusters, seed)
    )
    k, d = centroids.shape
    trace: list[float] = []
    stats: list[dict] = [
        dict(assign_ops=0, assign_ms=0.0, factorize_ms=0.0, nnz_total=k * d)
    ]
    t = np.zeros(len(X), dtype=np.int64)
    iterations = 0
    for _ in range(max_iterations):
        iterations += 1
        local = OpCounter()
        tick = time.perf_counter()
        t, sq = assign_dense(X, centroids, local)
        assign_ms = (time.perf_counter() - tick) * 1e3
        if counter is not None:
            counter.add(local.multiply_adds)
        if iterations == 1:
            trace.append(float(sq.sum()))
        centroids, _ = update_centroids(X, t, n_clusters)
        trace.append(float(np.sum((X - centroids[t]) ** 2)))
        stats.append(
            dict(
                assign_ops=local.multiply_adds,
                assign_ms=assign_ms,
                factorize_ms=0.0,
                nnz_total=k * d,
            )
        )
        previous, current = trace[-2], trace[-1]
        if previous == 0.0 or abs(previous - current) <= tolerance * previous:
            break
    return ClusteringModel(
        kind="dense",
        assignments=t,
        cluster_sizes=np.bincount(t, minlength=n_clusters).astype(np.int64),
        objective_trace=trace,
        iteration_count=iterations,
        centroids_dense=centroids,
        iteration_stats=stats,
    )


def _default_n_factors(n_clusters: int, n_features: int) -> int:
    return max(1, int(math.floor(math.log2(min(n_clusters, n_features)))))


def qkmeans(
    X,
    config: QkConfig,
    init_centroids=None,
    init_factors=None,
    counter: OpCounter | None = None,
) -> ClusteringModel:
    """K-means whose centroid matrix is a product of sparse factors.

    The initial operator comes from factorizing the initial centroids
    with uniform weights, unless ``init_factors`` is given. Every outer
    iteration refits the factors to the size-weighted means, warm
    starting from the previous factors with a fresh diagonal weight
    factor fixed in front.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    k = config.n_clusters
    n_factors = (
        config.n_factors if config.n_factors is not None else _default_n_factors(k, d)
    )
    shapes = factor_shapes(k, d, n_factors)
    projections = [ProjectedSparse(s, config.sparsity_level) for s in shapes]

    stats: list[dict] = []
    if init_factors is not None:
        factors = list(init_factors)
        stats.append(dict(assign_ops=0, assign_ms=0.0, factorize_ms=0.0,
                          nnz_total=sum(f.nnz for f in factors)))
    else:
        start = (
            np.array(init_centroids, dtype=np.float64, copy=True)
            if init_centroids is not None
            else draw_initial_centroids(X, k, config.seed)
        )
        tick = time.perf_counter()
        if config.use_hierarchical:
            state = hierarchical_palm4msa(
                start, n_factors, config.sparsity_level, config.palm
            )
            factors = list(state.factors)
        else:
            state = palm4msa(
                start,
                [FixedSingleton(sparse_identity(k))] + projections,
                config=config.palm,
            )
            factors = list(state.factors[1:])
        init_ms = (time.perf_counter() - tick) * 1e3
        stats.append(dict(assign_ops=0, assign_ms=0.0, factorize_ms=init_ms,
                          nnz_total=sum(f.nnz for f in factors)))

    operator = fast_operator(factors)
    trace: list[float] = []
    t = np.zeros(n, dtype=np.int64)
    iterations = 0
    for _ in range(config.max_outer_iterations):
        iterations += 1
        local = OpCounter()
        tick = time.perf_counter()
        t, sq = assign_fast(X, operator, local)
        assign_ms = (time.perf_counter() - tick) * 1e3
        if counter is not None:
            counter.add(local.multiply_adds)
        if iterations == 1:
            trace.append(float(sq.sum()))
        means, sizes = update_centroids(X, t, k)
        target, weight = weighted_target(means, sizes)
        tick = time.perf_counter()
        state = palm4msa(
            target,
            [FixedSingleton(weight)] + projections,
            [weight] + factors,
            config.palm,
        )
        factorize_ms = (time.perf_counter() - tick) * 1e3
        factors = list(state.factors[1:])
        operator = fast_operator(factors)
        trace.append(clustering_objective(X, t, operator))
        stats.append(
            dict(
                assign_ops=local.multiply_adds,
                assign_ms=assign_ms,
                factorize_ms=factorize_ms,
                nnz_total=operator.nnz_total,
            )
        )
        previous, current = trace[-2], trace[-1]
        if previous == 0.0 or abs(previous - current) <= config.tolerance * previous:
            break
    return ClusteringModel(
        kind="factorized",
        assignments=t,
        cluster_sizes=np.bincount(t, minlength=k).astype(np.int64),
        objective_trace=trace,
        iteration_count=iterations,
        centroids_op=operator,
        iteration_stats=stats,
    )


def clustering_objective(X, t, centroids) -> float:
    """Sum of squared distances from each point to its centroid row."""
    X = np.asarray(X, dtype=np.float64)
    rows = materialize(centroids) if isinstance(centroids, FastOperator) else np.asarray(centroids)
    return float(np.sum((X - rows[t]) ** 2))


def decomposition_identity_check(X, t, means, centroids):
    """Both sides of the within-cluster splitting of the objective.

    Left side sums point-to-centroid distances. Right side sums
    point-to-mean distances plus size-weighted mean-to-centroid
    distances. They agree whenever ``means`` are the cluster means of
    ``t``, whatever the centroids are.
    """
    X = np.asarray(X, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    rows = materialize(centroids) if isinstance(centroids, FastOperator) else np.asarray(centroids)
    sizes = np.bincount(t, minlength=len(rows)).astype(np.float64)
    lhs = float(np.sum((X - rows[t]) ** 2))
    rhs = float(
        np.sum((X - means[t]) ** 2) + np.sum(sizes[:, None] * (means - rows) ** 2)
    )
    return lhs, rhs
