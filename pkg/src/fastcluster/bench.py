"""Desk-scale experiment harness behind the ``bench`` subcommand.

Each experiment walks a small parameter grid and emits flat result rows
(dicts). Multiply-add counts come from the op counters and are exactly
reproducible for a given seed; wall-clock metrics carry a ``_ms`` or
``_us`` suffix and naturally vary between runs.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ann import BruteForceIndex, build_index, classify_1nn
from .clustering import (
    QkConfig,
    assign_dense,
    assign_fast,
    draw_initial_centroids,
    lloyd_kmeans,
    qkmeans,
)
from .datasets import BlobsSpec, make_blobs, train_test_split
from .errors import ConfigError
from .nystrom import KernelSpec, default_gamma, fit_nystrom, kernel_row, reconstruction_error
from .sparse import (
    FastOperator,
    OpCounter,
    fast_apply,
    fast_operator,
    materialize,
    sparse_from_triplets,
)

__all__ = [
    "ExperimentSpec",
    "EXPERIMENT_NAMES",
    "random_structured_operator",
    "run_experiment",
    "emit_results",
    "compare_traces",
]

COLUMNS = [
    "experiment",
    "dim",
    "k",
    "sparsity",
    "scheme",
    "method",
    "iteration",
    "seed",
    "metric",
    "value",
    "std",
]


@dataclass
class ExperimentSpec:
    """Grid and repeat settings for one named experiment."""

    name: str
    seed: int = 0
    n_repeats: int = 5
    threads: int = 1
    dims: tuple = (64, 128, 256, 512)
    ks: tuple = (32, 64, 128)
    sparsities: tuple = (2, 3, 5)


def random_structured_operator(n: int, n_factors: int, level: int, seed: int) -> FastOperator:
    """Random square operator with exactly ``level`` nonzeros per row.

    Each factor's support is a union of ``level`` distinct circulant
    diagonals, so columns also hold ``level`` entries. Used to measure
    apply and assignment costs without training anything.
    """
    rng = np.random.default_rng(seed)
    base = np.arange(n, dtype=np.int64)
    factors = []
    for _ in range(n_factors):
        shifts = rng.choice(n, size=level, replace=False)
        rows = np.tile(base, level)
        cols = np.concatenate([(base + s) % n for s in shifts])
        vals = rng.standard_normal(level * n)
        factors.append(sparse_from_triplets(n, n, zip(rows, cols, vals)))
    return fast_operator(factors)


def compare_traces(trace_a, trace_b) -> dict:
    """Summary of two objective traces: finals and their ratio."""
    final_a, final_b = float(trace_a[-1]), float(trace_b[-1])
    return dict(
        final_a=final_a,
        final_b=final_b,
        final_ratio=final_b / final_a if final_a else math.inf,
        iterations_a=len(trace_a) - 1,
        iterations_b=len(trace_b) - 1,
    )


def _timed(fn, n_repeats):
    samples = []
    for _ in range(n_repeats):
        tick = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - tick) * 1e3)
    arr = np.asarray(samples)
    return float(arr.mean()), float(arr.std())


def _fig1_point(spec, dim, level):
    q = max(1, int(math.log2(dim)))
    op = random_structured_operator(dim, q, level, spec.seed + 7 * dim + level)
    dense = materialize(op)
    rng = np.random.default_rng(spec.seed + 1)
    X = np.ascontiguousarray(rng.standard_normal((dim, 100)))
    counter = OpCounter()
    fast_apply(op, X, counter)
    fast_madds = counter.multiply_adds // X.shape[1]
    dense_madds = dim * dim
    fast_ms = _timed(lambda: fast_apply(op, X), spec.n_repeats)
    dense_ms = _timed(lambda: dense @ X, spec.n_repeats)
    base = dict(experiment=spec.name, dim=dim, sparsity=level, seed=spec.seed)
    return [
        dict(base, metric="fast_madds_per_column", value=fast_madds, std=0.0),
        dict(base, metric="dense_madds_per_column", value=dense_madds, std=0.0),
        dict(base, metric="madds_ratio", value=fast_madds / dense_madds, std=0.0),
        dict(base, metric="fast_apply_ms", value=fast_ms[0], std=fast_ms[1]),
        dict(base, metric="dense_apply_ms", value=dense_ms[0], std=dense_ms[1]),
    ]


def _fig1(spec):
    return [
        (_fig1_point, (spec, dim, level))
        for dim in spec.dims
        for level in spec.sparsities
    ]


def _fig2_point(spec, level, repeat):
    seed = spec.seed + repeat
    k = spec.ks[0]
    data = make_blobs(BlobsSpec(1000, 64, k, center_std=2.0, seed=seed))
    init = draw_initial_centroids(data.X, k, seed)
    km = lloyd_kmeans(data.X, k, init_centroids=init)
    qk = qkmeans(
        data.X,
        QkConfig(k, level, use_hierarchical=True, seed=seed),
        init_centroids=init,
    )
    rows = []
    for method, model in (("kmeans", km), ("qkmeans", qk)):
        base = dict(
            experiment=spec.name, k=k, sparsity=level, seed=seed, method=method
        )
        for i, value in enumerate(model.objective_trace):
            rows.append(dict(base, iteration=i, metric="objective", value=value, std=0.0))
    summary = compare_traces(km.objective_trace, qk.objective_trace)
    rows.append(
        dict(
            experiment=spec.name,
            k=k,
            sparsity=level,
            seed=seed,
            metric="final_objective_ratio",
            value=summary["final_ratio"],
            std=0.0,
        )
    )
    return rows


def _fig2(spec):
    return [
        (_fig2_point, (spec, level, r))
        for level in spec.sparsities
        for r in range(spec.n_repeats)
    ]


def _fig3_point(spec, dim):
    level = spec.sparsities[-1]
    q = max(1, int(math.log2(dim)))
    op = random_structured_operator(dim, q, level, spec.seed + 13 * dim)
    dense = materialize(op)
    rng = np.random.default_rng(spec.seed + 2)
    X = rng.standard_normal((1000, dim))
    counter = OpCounter()
    assign_fast(X, op, counter)
    fast_per_point = counter.multiply_adds / len(X)
    counter.reset()
    assign_dense(X, dense, counter)
    dense_per_point = counter.multiply_adds / len(X)
    fast_ms = _timed(lambda: assign_fast(X, op), spec.n_repeats)
    dense_ms = _timed(lambda: assign_dense(X, dense), spec.n_repeats)
    base = dict(experiment=spec.name, dim=dim, k=dim, sparsity=level, seed=spec.seed)
    return [
        dict(base, metric="fast_assign_madds_per_point", value=fast_per_point, std=0.0),
        dict(base, metric="dense_assign_madds_per_point", value=dense_per_point, std=0.0),
        dict(base, metric="assign_madds_ratio", value=fast_per_point / dense_per_point, std=0.0),
        dict(base, metric="fast_assign_ms", value=fast_ms[0], std=fast_ms[1]),
        dict(base, metric="dense_assign_ms", value=dense_ms[0], std=dense_ms[1]),
    ]


def _fig3(spec):
    return [(_fig3_point, (spec, dim)) for dim in spec.dims]


def _fig4_point(spec, k, repeat):
    seed = spec.seed + repeat
    data = make_blobs(BlobsSpec(1000, 32, 32, center_std=2.0, seed=seed))
    kernel = KernelSpec(default_gamma(data.X))
    rng = np.random.default_rng(seed)
    landmark_sets = {}
    landmark_sets["uniform"] = data.X[rng.choice(len(data.X), size=k, replace=False)]
    init = draw_initial_centroids(data.X, k, seed)
    landmark_sets["kmeans"] = lloyd_kmeans(data.X, k, init_centroids=init).centroids()
    qk = qkmeans(
        data.X,
        QkConfig(k, spec.sparsities[-1], use_hierarchical=True, seed=seed),
        init_centroids=init,
    )
    landmark_sets["qkmeans"] = qk.centroids_op
    rows = []
    for scheme, landmarks in landmark_sets.items():
        model = fit_nystrom(data.X, landmarks, kernel)
        err = reconstruction_error(model, data.X)
        counter = OpCounter()
        kernel_row(model, data.X[0], counter)
        probe = data.X[:64]
        tick = time.perf_counter()
        for x in probe:
            kernel_row(model, x)
        row_us = (time.perf_counter() - tick) * 1e6 / len(probe)
        base = dict(experiment=spec.name, k=k, scheme=scheme, seed=seed,
                    sparsity=spec.sparsities[-1] if scheme == "qkmeans" else "")
        rows.append(dict(base, metric="reconstruction_error", value=err, std=0.0))
        rows.append(dict(base, metric="ops_per_row", value=counter.multiply_adds, std=0.0))
        rows.append(dict(base, metric="row_time_us", value=row_us, std=0.0))
    return rows


def _fig4(spec):
    return [
        (_fig4_point, (spec, k, r))
        for k in spec.ks
        for r in range(spec.n_repeats)
    ]


def _tab_knn_point(spec, repeat):
    seed = spec.seed + repeat
    k = 16
    level = spec.sparsities[-1]
    data = make_blobs(BlobsSpec(2000, 16, 8, center_std=1.0, seed=seed))
    train, test = train_test_split(data, 0.25, seed)
    init = draw_initial_centroids(train.X, k, seed)
    indexes = {
        "brute": BruteForceIndex(train),
        "kmeans": build_index(train, lloyd_kmeans(train.X, k, init_centroids=init)),
        "qkmeans": build_index(
            train,
            qkmeans(
                train.X,
                QkConfig(k, level, use_hierarchical=True, seed=seed),
                init_centroids=init,
            ),
        ),
    }
    rows = []
    for method, index in indexes.items():
        counter = OpCounter()
        tick = time.perf_counter()
        _, accuracy = classify_1nn(index, test.X, test.labels, counter)
        total_us = (time.perf_counter() - tick) * 1e6
        base = dict(experiment=spec.name, k=k, method=method, seed=seed,
                    sparsity=level if method == "qkmeans" else "")
        rows.append(dict(base, metric="accuracy", value=accuracy, std=0.0))
        rows.append(dict(base, metric="ops_per_query",
                         value=counter.multiply_adds / len(test.X), std=0.0))
        rows.append(dict(base, metric="mean_query_us",
                         value=total_us / len(test.X), std=0.0))
    return rows


def _tab_knn(spec):
    return [(_tab_knn_point, (spec, r)) for r in range(spec.n_repeats)]


EXPERIMENTS = {
    "fig1_apply_timing": _fig1,
    "fig2_objective_curves": _fig2,
    "fig3_assignment_timing": _fig3,
    "fig4_nystrom": _fig4,
    "tab_knn": _tab_knn,
}

EXPERIMENT_NAMES = tuple(sorted(EXPERIMENTS))


def _row_key(row):
    return tuple(str(row.get(c, "")) for c in COLUMNS)


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """Run every grid point of the named experiment and collect rows.

    Grid points are independent and may run on a small thread pool;
    the result order is canonical either way.
    """
    try:
        plan = EXPERIMENTS[spec.name](spec)
    except KeyError:
        raise ConfigError(
            f"unknown experiment {spec.name!r}, expected one of {EXPERIMENT_NAMES}"
        ) from None
    if spec.threads > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            chunks = list(pool.map(lambda job: job[0](*job[1]), plan))
    else:
        chunks = [fn(*args) for fn, args in plan]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=_row_key)
    return rows


def _format_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return "" if v is None else str(v)


def emit_results(rows, path, fmt: str = "csv") -> None:
    """Write rows as CSV with a fixed column order, or as JSON lines."""
    if fmt == "csv":
        with open(path, "w") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(_format_cell(row.get(c, "")) for c in COLUMNS) + "\n")
    elif fmt == "jsonl":
        with open(path, "w") as fh:
            for row in rows:
                fh.write(json.dumps({c: row[c] for c in COLUMNS if c in row}) + "\n")
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
