"""Compiled kernels against the numpy fallback on the grid sizes the solver uses.

    python3 benchmarks/bench_kernels.py [--n 32 64] [--repeat 5]

Prints one line per kernel and size: best-of-repeat wall time for each backend
and the speed-up.  Both backends receive identical inputs and their outputs are
checked to agree before timing.
"""
import argparse
import timeit

import numpy as np

from gluelab import _kernels_py as pure

try:
    from gluelab import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def _axis(n_src, n_dst, rng):
    i = rng.integers(0, n_src - 1, n_dst)
    idx = np.stack([i, i + 1], axis=1).astype(np.int64)
    u = rng.uniform(size=n_dst)
    w = np.stack([1 - u, u], axis=1)
    return np.ascontiguousarray(idx), np.ascontiguousarray(w)


def cases(n, rng):
    f = rng.normal(size=(3, n, n, n))
    g = rng.normal(size=(3, n, n, n))
    x = np.linspace(-2.0, 2.0, n)
    axes = [_axis(n, n, rng) for _ in range(3)]
    args = [f]
    for idx, w in axes:
        args += [idx, w]
    return {
        "interp_tensor": tuple(args),
        "weighted_lp_sum": (f, x, x, x, 4.0, 10.0, 1.0),
        "weighted_max": (f, x, x, x, 4.0),
        "outer_product": (f, g),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n", type=int, nargs="+", default=[32, 64])
    ap.add_argument("--repeat", type=int, default=5)
    ns = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not importable; build with `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<16} {'n':>4} {'numpy [ms]':>11} {'cython [ms]':>12} {'speed-up':>9}")
    for n in ns.n:
        for name, args in cases(n, rng).items():
            a = np.asarray(getattr(pure, name)(*args))
            b = np.asarray(getattr(compiled, name)(*args))
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * max(1.0, float(np.max(np.abs(a))))), name
            tp = min(timeit.repeat(lambda: getattr(pure, name)(*args), number=1, repeat=ns.repeat))
            tc = min(timeit.repeat(lambda: getattr(compiled, name)(*args), number=1, repeat=ns.repeat))
            print(f"{name:<16} {n:>4} {1e3 * tp:>11.2f} {1e3 * tc:>12.2f} {tp / tc:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
