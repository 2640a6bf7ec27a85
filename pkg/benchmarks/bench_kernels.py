"""Compare the compiled and NumPy stencil kernels.

Run ``python3 benchmarks/bench_kernels.py [n]`` for an ``n x n`` grid
(default 513). Prints the median time per call and the speedup.
"""
import sys
import timeit

import numpy as np

from superl import kernels
from superl.spin2d import DEFAULT_REP


def cases(n):
    rng = np.random.default_rng(0)
    f = rng.standard_normal((n, n))
    psi = rng.standard_normal((2, n, n)) + 1j * rng.standard_normal((2, n, n))
    h = 1.0 / (n - 1)
    xs = rng.uniform(0, 1, n * n // 4)
    ys = rng.uniform(0, 1, n * n // 4)
    g1, g2 = DEFAULT_REP.gamma1, DEFAULT_REP.gamma2
    return {
        "laplacian5": lambda: kernels.laplacian5(f, h),
        "gradient": lambda: kernels.gradient(f, h),
        "dirac": lambda: kernels.dirac(psi, g1, g2, h),
        "bilinear": lambda: kernels.bilinear(f, 0.0, 0.0, h, xs, ys),
    }


def bench(n=513, repeat=7):
    backends = ["python"]
    try:
        kernels.use_backend("cython")
        backends.append("cython")
    except ImportError:
        pass
    times = {}
    for b in backends:
        kernels.use_backend(b)
        for name, fn in cases(n).items():
            fn()
            t = timeit.repeat(fn, number=3, repeat=repeat)
            times[(name, b)] = float(np.median(t)) / 3
    return backends, times


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 513
    backends, times = bench(n)
    print(f"grid {n}x{n}")
    print(f"{'kernel':<12}" + "".join(f"{b + ' [ms]':>16}" for b in backends) + f"{'speedup':>10}")
    for name in ("laplacian5", "gradient", "dirac", "bilinear"):
        row = [times[(name, b)] * 1e3 for b in backends]
        sp = f"{row[0] / row[1]:.2f}x" if len(row) > 1 else "-"
        print(f"{name:<12}" + "".join(f"{v:>16.3f}" for v in row) + f"{sp:>10}")


if __name__ == "__main__":
    main()
