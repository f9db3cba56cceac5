"""Command-line front end.

Subcommands cover dataset generation, plain and factorized k-means,
standalone matrix factorization, kernel approximation, nearest-neighbor
classification, and the benchmark harness. All outputs are plain CSV,
JSON lines, or sparse triplet text written under ``--out-dir``.

Exit codes: 0 on success, 2 for configuration errors (bad flags,
missing or malformed inputs), 1 for unexpected runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ann import BruteForceIndex, build_index, classify_1nn
from .bench import EXPERIMENT_NAMES, ExperimentSpec, emit_results, run_experiment
from .clustering import (
    ClusteringModel,
    QkConfig,
    draw_initial_centroids,
    lloyd_kmeans,
    qkmeans,
)
from .datasets import BlobsSpec, load_csv, make_blobs, save_csv, train_test_split
from .errors import ConfigError
from .nystrom import (
    KernelSpec,
    approx_kernel_row,
    default_gamma,
    feature_map,
    fit_nystrom,
    kernel_row,
    reconstruction_error,
)
from .palm import PalmConfig, ProjectedSparse, factor_shapes, hierarchical_palm4msa, palm4msa
from .sparse import OpCounter, load_triplets, materialize, save_triplets

TRACE_COLUMNS = ["iter", "objective", "assign_ops", "assign_ms", "factorize_ms", "nnz_total"]


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _write_csv_matrix(path: Path, matrix: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _write_assignments(path: Path, assignments: np.ndarray) -> None:
    with open(path, "w") as fh:
        for t in assignments:
            fh.write(f"{int(t)}\n")


def _write_trace(path: Path, model: ClusteringModel) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for i, (objective, stats) in enumerate(
            zip(model.objective_trace, model.iteration_stats)
        ):
            row = dict(stats, iter=i, objective=objective)
            fh.write(",".join(_fmt(row[c]) for c in TRACE_COLUMNS) + "\n")


def _save_factors(out_dir: Path, model_or_factors) -> list[Path]:
    factors = getattr(model_or_factors, "factors", model_or_factors)
    paths = []
    for i, factor in enumerate(factors):
        path = out_dir / f"factor_{i:02d}.txt"
        save_triplets(factor, path)
        paths.append(path)
    return paths


def _load_matrix(path: str) -> np.ndarray:
    """Load a dense matrix from CSV, or from sparse triplet text.

    Triplet files are recognized by their header: a single line of
    exactly three integers.
    """
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"input file not found: {path}")
    with open(p) as fh:
        first = fh.readline().split()
    if len(first) == 3:
        try:
            [int(tok) for tok in first]
            return load_triplets(p).to_dense()
        except ValueError:
            pass
    return load_csv(p).X


def _load_dataset(path: str, labeled: bool):
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"input file not found: {path}")
    return load_csv(p, labels=labeled)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _add_common_cluster_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="input CSV of samples, one row per point")
    parser.add_argument("--labeled", action="store_true",
                        help="treat the final CSV column as an integer label")
    parser.add_argument("--k", type=int, required=True, help="number of clusters")
    parser.add_argument("--max-iter", type=int, default=20)
    parser.add_argument("--tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fastcluster",
        description="K-means with centroids factored into products of sparse matrices.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomized steps")
    parser.add_argument("--out-dir", default=".", help="directory for output files")
    parser.add_argument("--format", choices=("csv", "jsonl"), default="csv",
                        help="output format for benchmark results")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for benchmark grids "
                             "(default: FASTCLUSTER_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-blobs", help="write a synthetic Gaussian-blob dataset")
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--n-features", type=int, default=32)
    p.add_argument("--n-centers", type=int, default=16)
    p.add_argument("--center-std", type=float, default=1.0)
    p.add_argument("--box-half-width", type=float, default=10.0)
    p.add_argument("--with-labels", action="store_true",
                   help="append the generating center id as a final column")
    p.add_argument("--name", default="blobs.csv", help="output file name")

    p = sub.add_parser("kmeans", help="run plain Lloyd k-means")
    _add_common_cluster_flags(p)

    p = sub.add_parser("qkmeans", help="run k-means with factorized centroids")
    _add_common_cluster_flags(p)
    p.add_argument("--sparsity", type=int, required=True,
                   help="nonzeros per row and per column of each sparse factor")
    p.add_argument("--factors", type=int, default=None,
                   help="number of sparse factors (default: log2 of min(k, dim))")
    p.add_argument("--palm-iter", type=int, default=300)
    p.add_argument("--palm-tol", type=float, default=1e-6)
    p.add_argument("--hierarchical", action="store_true",
                   help="use the greedy hierarchical initializer for the first factorization")

    p = sub.add_parser("factorize", help="factor a fixed matrix into sparse factors")
    p.add_argument("--target", required=True,
                   help="matrix to factor: CSV, or triplet text with 'rows cols nnz' header")
    p.add_argument("--factors", type=int, required=True)
    p.add_argument("--sparsity", type=int, required=True)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--hierarchical", action="store_true")

    p = sub.add_parser("nystrom", help="low-rank Gaussian-kernel approximation")
    p.add_argument("--data", required=True)
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--scheme", choices=("uniform", "kmeans", "qkmeans"), required=True,
                   help="how landmarks are chosen")
    p.add_argument("--k", type=int, required=True, help="number of landmarks")
    p.add_argument("--sparsity", type=int, default=5)
    p.add_argument("--gamma", type=float, default=None,
                   help="kernel width (default: 1 / (dim * variance))")
    p.add_argument("--hierarchical", action="store_true",
                   help="use the greedy hierarchical initializer for qkmeans landmarks")
    p.add_argument("--features", action="store_true",
                   help="also write the training feature map to features.csv")

    p = sub.add_parser("knn", help="nearest-neighbor classification via cluster routing")
    p.add_argument("--train", required=True, help="labeled training CSV")
    p.add_argument("--test", required=True, help="labeled test CSV")
    p.add_argument("--method", choices=("brute", "kmeans", "qkmeans"), required=True)
    p.add_argument("--k", type=int, default=16, help="number of routing clusters")
    p.add_argument("--sparsity", type=int, default=5)
    p.add_argument("--hierarchical", action="store_true",
                   help="use the greedy hierarchical initializer for qkmeans routing")

    p = sub.add_parser("bench", help="run a named experiment grid")
    p.add_argument("--experiment", choices=EXPERIMENT_NAMES, required=True)
    p.add_argument("--n-repeats", type=int, default=5)

    return parser


def _resolve_threads(args) -> int:
    if args.threads is not None:
        threads = args.threads
    else:
        env = os.environ.get("FASTCLUSTER_THREADS", "1")
        try:
            threads = int(env)
        except ValueError:
            raise ConfigError(f"FASTCLUSTER_THREADS must be an integer, got {env!r}") from None
    _require(threads >= 1, "thread count must be at least 1")
    return threads


def _cmd_generate_blobs(args, out_dir: Path) -> None:
    _require(args.n_samples > 0, "--n-samples must be positive")
    _require(args.n_features > 0, "--n-features must be positive")
    _require(args.n_centers > 0, "--n-centers must be positive")
    spec = BlobsSpec(
        args.n_samples,
        args.n_features,
        args.n_centers,
        center_std=args.center_std,
        box_half_width=args.box_half_width,
        seed=args.seed,
    )
    data = make_blobs(spec)
    path = out_dir / args.name
    save_csv(path, data, with_labels=args.with_labels)
    print(f"wrote {path} ({data.n_samples} x {data.n_features}"
          f"{', labeled' if args.with_labels else ''})")


def _cmd_kmeans(args, out_dir: Path) -> None:
    _require(args.k > 0, "--k must be positive")
    data = _load_dataset(args.data, args.labeled)
    counter = OpCounter()
    model = lloyd_kmeans(
        data.X,
        args.k,
        tolerance=args.tol,
        max_iterations=args.max_iter,
        seed=args.seed,
        counter=counter,
    )
    _write_assignments(out_dir / "assignments.csv", model.assignments)
    _write_csv_matrix(out_dir / "centroids.csv", model.centroids())
    _write_trace(out_dir / "trace.csv", model)
    print(f"kmeans: {model.iteration_count} iterations, "
          f"final objective {model.objective_trace[-1]:.17g}, "
          f"{counter.multiply_adds} multiply-adds")


def _cmd_qkmeans(args, out_dir: Path) -> None:
    _require(args.k > 0, "--k must be positive")
    _require(args.sparsity >= 1, "--sparsity must be at least 1")
    data = _load_dataset(args.data, args.labeled)
    config = QkConfig(
        n_clusters=args.k,
        sparsity_level=args.sparsity,
        n_factors=args.factors,
        tolerance=args.tol,
        max_outer_iterations=args.max_iter,
        palm=PalmConfig(max_iterations=args.palm_iter, tolerance=args.palm_tol, seed=args.seed),
        use_hierarchical=args.hierarchical,
        seed=args.seed,
    )
    counter = OpCounter()
    model = qkmeans(data.X, config, counter=counter)
    _write_assignments(out_dir / "assignments.csv", model.assignments)
    _write_csv_matrix(out_dir / "centroids.csv", model.centroids())
    paths = _save_factors(out_dir, model.centroids_op)
    _write_trace(out_dir / "trace.csv", model)
    print(f"qkmeans: {model.iteration_count} iterations, "
          f"final objective {model.objective_trace[-1]:.17g}, "
          f"{model.centroids_op.nnz_total} nonzeros in {len(paths)} factors, "
          f"{counter.multiply_adds} multiply-adds")


def _cmd_factorize(args, out_dir: Path) -> None:
    _require(args.factors >= 1, "--factors must be at least 1")
    _require(args.sparsity >= 1, "--sparsity must be at least 1")
    target = _load_matrix(args.target)
    config = PalmConfig(max_iterations=args.max_iter, tolerance=args.tol, seed=args.seed)
    if args.hierarchical:
        state = hierarchical_palm4msa(target, args.factors, args.sparsity, config=config)
    else:
        shapes = factor_shapes(target.shape[0], target.shape[1], args.factors)
        constraints = [ProjectedSparse(s, args.sparsity) for s in shapes]
        state = palm4msa(target, constraints, config=config)
    _save_factors(out_dir, state.factors)
    with open(out_dir / "trace.jsonl", "w") as fh:
        for i, value in enumerate(state.objective_trace):
            fh.write(json.dumps({"iteration": i, "objective": value}) + "\n")
    approx = materialize(state.operator())
    rel = float(np.linalg.norm(target - approx) / max(np.linalg.norm(target), 1e-300))
    print(f"factorize: {len(state.factors)} factors, "
          f"relative error {rel:.17g}, "
          f"{sum(f.nnz for f in state.factors)} nonzeros")


def _cmd_nystrom(args, out_dir: Path) -> None:
    _require(args.k > 0, "--k must be positive")
    data = _load_dataset(args.data, args.labeled)
    _require(args.k <= data.n_samples, "--k cannot exceed the number of samples")
    gamma = args.gamma if args.gamma is not None else default_gamma(data.X)
    _require(gamma > 0, "--gamma must be positive")
    kernel = KernelSpec(gamma)

    if args.scheme == "uniform":
        rng = np.random.default_rng(args.seed)
        landmarks = data.X[rng.choice(data.n_samples, size=args.k, replace=False)]
    elif args.scheme == "kmeans":
        landmarks = lloyd_kmeans(data.X, args.k, seed=args.seed).centroids()
    else:
        model = qkmeans(
            data.X,
            QkConfig(args.k, args.sparsity,
                     use_hierarchical=args.hierarchical, seed=args.seed),
        )
        landmarks = model.centroids_op

    nys = fit_nystrom(data.X, landmarks, kernel)
    err = reconstruction_error(nys, data.X)

    counter = OpCounter()
    kernel_row(nys, data.X[0], counter)
    ops_per_row = counter.multiply_adds
    probe = data.X[: min(64, data.n_samples)]
    tick = time.perf_counter()
    for x in probe:
        kernel_row(nys, x)
    row_us = (time.perf_counter() - tick) * 1e6 / len(probe)
    # Full approximate row: landmark kernel row extended to all training
    # points through the learned low-rank map.
    tick = time.perf_counter()
    for x in probe:
        approx_kernel_row(nys, x)
    row_full_us = (time.perf_counter() - tick) * 1e6 / len(probe)

    with open(out_dir / "nystrom_error.csv", "w") as fh:
        fh.write("scheme,K,error,row_time_us,ops_per_row,row_full_time_us\n")
        fh.write(f"{args.scheme},{args.k},{err:.17g},{row_us:.17g},"
                 f"{ops_per_row},{row_full_us:.17g}\n")
    if args.features:
        _write_csv_matrix(out_dir / "features.csv", feature_map(nys))
    print(f"nystrom[{args.scheme}]: k={args.k}, relative error {err:.17g}, "
          f"{ops_per_row} multiply-adds per kernel row")


def _cmd_knn(args, out_dir: Path) -> None:
    _require(args.k > 0, "--k must be positive")
    _require(args.sparsity >= 1, "--sparsity must be at least 1")
    train = _load_dataset(args.train, labeled=True)
    test = _load_dataset(args.test, labeled=True)
    _require(train.labels is not None, "--train must include a label column")
    _require(test.labels is not None, "--test must include a label column")

    if args.method == "brute":
        index = BruteForceIndex(train)
    elif args.method == "kmeans":
        index = build_index(train, lloyd_kmeans(train.X, args.k, seed=args.seed))
    else:
        index = build_index(
            train,
            qkmeans(
                train.X,
                QkConfig(args.k, args.sparsity,
                         use_hierarchical=args.hierarchical, seed=args.seed),
            ),
        )

    counter = OpCounter()
    tick = time.perf_counter()
    _, accuracy = classify_1nn(index, test.X, test.labels, counter)
    total_us = (time.perf_counter() - tick) * 1e6
    mean_us = total_us / test.n_samples
    ops = counter.multiply_adds / test.n_samples
    with open(out_dir / "knn_results.csv", "w") as fh:
        fh.write("method,K,accuracy,mean_query_us,ops_per_query\n")
        fh.write(f"{args.method},{args.k},{accuracy:.17g},{mean_us:.17g},{ops:.17g}\n")
    print(f"knn[{args.method}]: accuracy {accuracy:.17g}, "
          f"{ops:.17g} multiply-adds per query")


def _cmd_bench(args, out_dir: Path) -> None:
    _require(args.n_repeats >= 1, "--n-repeats must be at least 1")
    spec = ExperimentSpec(
        name=args.experiment,
        seed=args.seed,
        n_repeats=args.n_repeats,
        threads=_resolve_threads(args),
    )
    rows = run_experiment(spec)
    suffix = "csv" if args.format == "csv" else "jsonl"
    path = out_dir / f"results_{args.experiment}.{suffix}"
    emit_results(rows, path, args.format)
    print(f"wrote {len(rows)} result rows to {path}")


_COMMANDS = {
    "generate-blobs": _cmd_generate_blobs,
    "kmeans": _cmd_kmeans,
    "qkmeans": _cmd_qkmeans,
    "factorize": _cmd_factorize,
    "nystrom": _cmd_nystrom,
    "knn": _cmd_knn,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](args, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
