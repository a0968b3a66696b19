"""Compare the compiled and pure-Python trajectory scan kernels.

    python3 benchmarks/bench_kernels.py [--preset melb] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from poppath import _kernels_py
from poppath.synthetic import PRESETS, generate_dataset

try:
    from poppath import _kernels as compiled
except ImportError:
    compiled = None


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--preset", default="melb", choices=sorted(PRESETS))
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    ds, _, _ = generate_dataset(PRESETS[args.preset], args.preset)
    flat, offsets = ds.flat
    dense = ds.dense_flat
    n = len(ds.poi_index)
    s, d = ds.poi_index[0], ds.poi_index[-1]
    print(f"{args.preset}: {len(ds)} trajectories, {len(flat)} visits, {n} POIs")
    if compiled is None:
        print("compiled kernels not built; only the Python path is timed")

    cases = {
        "find_windows": lambda m: m.find_windows(flat, offsets, s, d),
        "precedence_matrix": lambda m: m.precedence_matrix(dense, offsets, n),
        "pair_counts": lambda m: m.pair_counts(dense, offsets, n),
    }
    print(f"{'kernel':<20}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, call in cases.items():
        py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:<20}{py:>12.2f}{'-':>12}{'-':>10}")
            continue
        a, b = call(_kernels_py), call(compiled)
        if isinstance(a, tuple):
            assert all(np.array_equal(x, y) for x, y in zip(a, b))
        else:
            assert np.array_equal(np.asarray(a), np.asarray(b))
        cy = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20}{py:>12.2f}{cy:>12.2f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
