"""Time the compiled Tanimoto kernels against the numpy fallback.

    python bench/bench_tanimoto.py [--sizes 64 256 1024] [--bits 1024] [--repeat 5]

Prints one row per (kernel, size) with the best-of-``repeat`` wall time of each
backend and the speed-up; both backends are checked to agree before timing.
"""

import argparse
import sys
import timeit

import numpy as np

from genbo import _tanimoto_py, tanimoto

try:
    from genbo import _tanimoto as compiled
except ImportError:
    compiled = None


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 1024])
    parser.add_argument("--bits", type=int, default=1024)
    parser.add_argument("--density", type=float, default=0.05)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; run `pip install --no-build-isolation -e .`",
              file=sys.stderr)
        return 1

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<20} {'n':>6} {'python s':>10} {'compiled s':>11} {'speed-up':>9}")
    for n in args.sizes:
        bits = rng.random((n, args.bits)) < args.density
        packed = tanimoto.pack(bits)
        assert np.array_equal(compiled.intersection_counts(packed, packed),
                              _tanimoto_py.intersection_counts(packed, packed))
        t_py = best_time(lambda: _tanimoto_py.intersection_counts(packed, packed), args.repeat)
        t_c = best_time(lambda: compiled.intersection_counts(packed, packed), args.repeat)
        print(f"{'intersection_counts':<20} {n:>6} {t_py:>10.5f} {t_c:>11.5f} {t_py / t_c:>8.1f}x")

        # joint (parameter, task) kernel over an n_x x n_w grid with n pairs per side
        n_x = max(1, int(np.sqrt(n)))
        n_w = max(1, n // n_x)
        xb = rng.random((n_x, args.bits)) < args.density
        wb = rng.random((n_w, args.bits)) < args.density
        sx = tanimoto.intersection_counts(xb, xb)
        sw = tanimoto.intersection_counts(wb, wb)
        cx, cw = np.diag(sx).copy(), np.diag(sw).copy()
        a = np.column_stack([rng.integers(0, n_x, n), rng.integers(0, n_w, n)])
        call = lambda impl: tanimoto.pair_tanimoto(  # noqa: E731
            sx, sw, cx, cw, a[:, 0], a[:, 1], a[:, 0], a[:, 1], impl=impl)
        assert np.allclose(call(compiled), call(_tanimoto_py), atol=0, rtol=0)
        t_py = best_time(lambda: call(_tanimoto_py), args.repeat)
        t_c = best_time(lambda: call(compiled), args.repeat)
        print(f"{'pair_tanimoto':<20} {n:>6} {t_py:>10.5f} {t_c:>11.5f} {t_py / t_c:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
