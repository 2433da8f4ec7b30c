"""Time the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import timeit

import numpy as np

from metric_knn_lab import _kernels


def cases(rng):
    n_q, n = 200, 4000
    keys = rng.random((n_q, n))
    tied = np.floor(rng.random((n_q, n)) * 50)  # coarse keys so ties are common
    tie = rng.random((1, n))
    # the shape of a test-error evaluation: many queries, a small training sample
    many = rng.random((2000, 250))
    many_tie = rng.random((1, 250))
    seqs = rng.integers(0, 2, (200_000, 52), dtype=np.uint8)
    query = seqs[0].copy()
    return {
        "knn_select 200x4000 k=8": lambda impl: impl.knn_select(keys, tie, 8),
        "knn_select 200x4000 k=64": lambda impl: impl.knn_select(keys, tie, 64),
        "knn_select 200x4000 k=2000": lambda impl: impl.knn_select(keys, tie, n // 2),
        "knn_select tied k=64": lambda impl: impl.knn_select(tied, tie, 64),
        "knn_select 2000x250 k=16": lambda impl: impl.knn_select(many, many_tie, 16),
        "first_diff_index 200k x 52": lambda impl: impl.first_diff_index(seqs, query),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write the timings here as well")
    args = ap.parse_args(argv)
    if _kernels.compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
    rng = np.random.default_rng(0)
    results = []
    print(f"{'case':32s} {'compiled ms':>12s} {'python ms':>12s} {'speedup':>8s}")
    for name, call in cases(rng).items():
        a = call(_kernels.compiled)
        b = call(_kernels.python)
        if not np.array_equal(a, b):
            raise SystemExit(f"backends disagree on {name}")
        tc = min(timeit.repeat(lambda: call(_kernels.compiled), number=1, repeat=args.repeat)) * 1e3
        tp = min(timeit.repeat(lambda: call(_kernels.python), number=1, repeat=args.repeat)) * 1e3
        results.append({"case": name, "compiled_ms": tc, "python_ms": tp, "speedup": tp / tc})
        print(f"{name:32s} {tc:12.2f} {tp:12.2f} {tp / tc:8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
