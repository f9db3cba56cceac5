"""Approximate 1-nearest-neighbor search routed through a clustering.

A query is routed to the cluster whose centroid scores best, then
scanned exactly against that single bucket. With factorized centroids
the routing product runs through the sparse chain, so the per-query
cost is the chain cost plus the bucket scan instead of a full scan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clustering import ClusteringModel, Dataset
from .errors import DimensionMismatch, EmptyIndex
from .sparse import FastOperator, OpCounter, fast_apply

__all__ = [
    "ClusterIndex",
    "BruteForceIndex",
    "build_index",
    "query_1nn",
    "brute_force_1nn",
    "classify_1nn",
]


@dataclass
class ClusterIndex:
    """Bucketed points plus cached routing data."""

    data: Dataset
    kind: str
    buckets: list[np.ndarray]
    centroid_rows: np.ndarray
    centroid_norms: np.ndarray
    operator: FastOperator | None = None

    def query(self, q, counter: OpCounter | None = None):
        return query_1nn(self, q, counter)


@dataclass
class BruteForceIndex:
    """Exact scan over the whole dataset, same query interface."""

    data: Dataset

    def query(self, q, counter: OpCounter | None = None):
        return brute_force_1nn(self.data, q, counter)


def build_index(data: Dataset, model: ClusteringModel) -> ClusterIndex:
    """Group points by the model's assignment and cache routing data."""
    if data.n_samples == 0:
        raise EmptyIndex("cannot index an empty dataset")
    if len(model.assignments) != data.n_samples:
        raise DimensionMismatch("model assignments do not cover the dataset")
    n_clusters = len(model.cluster_sizes)
    buckets = [
        np.flatnonzero(model.assignments == k).astype(np.int64)
        for k in range(n_clusters)
    ]
    rows = model.centroids()
    return ClusterIndex(
        data=data,
        kind=model.kind,
        buckets=buckets,
        centroid_rows=rows,
        centroid_norms=np.sum(rows * rows, axis=1),
        operator=model.centroids_op,
    )


def query_1nn(index: ClusterIndex, q, counter: OpCounter | None = None):
    """Nearest indexed point in the routed bucket.

    Routing scores every centroid; empty buckets fall through to the
    next nearest centroid. Returns (point index, Euclidean distance).
    Counter advances by the routing product plus D per scanned point.
    """
    q = np.asarray(q, dtype=np.float64)
    if index.kind == "factorized":
        z = fast_apply(index.operator, q, counter)
    else:
        if counter is not None:
            counter.add(index.centroid_rows.size)
        z = index.centroid_rows @ q
    crit = index.centroid_norms - 2.0 * z
    X = index.data.X
    for k in np.argsort(crit, kind="stable"):
        bucket = index.buckets[k]
        if len(bucket) == 0:
            continue
        if counter is not None:
            counter.add(len(bucket) * X.shape[1])
        diffs = X[bucket] - q
        sq = np.sum(diffs * diffs, axis=1)
        best = int(np.argmin(sq))
        return int(bucket[best]), math.sqrt(max(float(sq[best]), 0.0))
    raise EmptyIndex("index holds no points")


def brute_force_1nn(data: Dataset, q, counter: OpCounter | None = None):
    """Exact nearest neighbor over all points, the recall oracle."""
    if data.n_samples == 0:
        raise EmptyIndex("empty dataset")
    q = np.asarray(q, dtype=np.float64)
    if counter is not None:
        counter.add(data.n_samples * data.n_features)
    diffs = data.X - q
    sq = np.sum(diffs * diffs, axis=1)
    best = int(np.argmin(sq))
    return best, math.sqrt(max(float(sq[best]), 0.0))


def classify_1nn(index, queries, query_labels=None, counter: OpCounter | None = None):
    """Label queries by their retrieved neighbor's label.

    ``index`` is anything with a ``query(q, counter)`` method over a
    labeled dataset. Returns (predicted labels, accuracy), where the
    accuracy is None unless true query labels are given.
    """
    labels = index.data.labels
    if labels is None:
        raise ValueError("indexed dataset has no labels")
    queries = np.asarray(queries, dtype=np.float64)
    picks = np.empty(len(queries), dtype=np.int64)
    for i, q in enumerate(queries):
        picks[i], _ = index.query(q, counter)
    predicted = labels[picks]
    accuracy = None
    if query_labels is not None:
        accuracy = float(np.mean(predicted == np.asarray(query_labels)))
    return predicted, accuracy
