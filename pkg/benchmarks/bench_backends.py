"""Compare the compiled and pure-Python sparse kernels head to head.

Runs the three hot kernels (sparse x vector, sparse x dense, sparse x
sparse) over a small size grid with both backends, checks that results
agree, and prints a timing table.

Usage: python benchmarks/bench_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fastcluster._kernels import available_backends, get_backend
from fastcluster.bench import random_structured_operator


def _csr_parts(factor):
    return factor.values, factor.col_indices, factor.row_offsets


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        tick = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tick)
    return best * 1e3


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    names = available_backends()
    print(f"available backends: {', '.join(names)}")
    if len(names) < 2:
        print("compiled extension not built; timing the pure backend only")

    rng = np.random.default_rng(0)
    header = f"{'kernel':<12}{'size':<14}" + "".join(f"{n + ' (ms)':>16}" for n in names)
    print(header)
    print("-" * len(header))

    for n in (256, 512, 1024):
        op = random_structured_operator(n, 4, 8, seed=n)
        a, b = op.factors[0], op.factors[1]
        vals, cols, offs = _csr_parts(a)
        x = rng.standard_normal(n)
        X = np.ascontiguousarray(rng.standard_normal((n, 64)))

        b_vals, b_cols, b_offs = _csr_parts(b)
        outputs = {}
        rows = {"matvec": [], "matmat": [], "spmm": []}
        for name in names:
            backend = get_backend(name)
            rows["matvec"].append(_time(lambda: backend.csr_matvec(vals, cols, offs, x), args.repeats))
            rows["matmat"].append(_time(lambda: backend.csr_matmat(vals, cols, offs, X), args.repeats))
            rows["spmm"].append(
                _time(
                    lambda: backend.csr_spmm(vals, cols, offs, b_vals, b_cols, b_offs, b.n_cols),
                    args.repeats,
                )
            )
            outputs[name] = (
                backend.csr_matvec(vals, cols, offs, x),
                backend.csr_matmat(vals, cols, offs, X),
            )

        if len(names) == 2:
            ref, other = outputs[names[0]], outputs[names[1]]
            for got, want in zip(ref, other):
                err = float(np.max(np.abs(got - want)))
                assert err <= 1e-10, f"backend mismatch at n={n}: {err}"

        for kernel, times in rows.items():
            cells = "".join(f"{t:>16.4f}" for t in times)
            print(f"{kernel:<12}{f'{n}x{n}':<14}{cells}")

    print("\nresults agree across backends within 1e-10." if len(names) == 2 else "")


if __name__ == "__main__":
    main()
