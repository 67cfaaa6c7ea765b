"""Benchmark the compiled facet kernels against the pure numpy fallback.

Times the flow's hot per-step kernels (involution, moment density, gradient,
weighted norm) plus a fused gradient evaluation over increasing torus sizes,
and prints one table per kernel.  Run as::

    python benchmarks/bench_kernels.py [--sizes 8,16,32,64] [--repeat 200]
"""

import argparse
import time

import numpy as np

from isoflow import _core
from isoflow._core import _kernels_py
from isoflow.mesh import build_torus_mesh

try:
    from isoflow._core import _kernels as _compiled
except ImportError:
    _compiled = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(sizes, repeat):
    impls = [("python", _kernels_py)]
    if _compiled is not None:
        impls.append(("cython", _compiled))
    else:
        print("compiled extension not available; timing the fallback only")
    print(f"active backend selected at import: {_core.BACKEND}\n")

    rng = np.random.default_rng(0)
    for n in sizes:
        mesh = build_torus_mesh(n)
        nf = mesh.num_facets
        F = rng.standard_normal((nf, 2, 4))
        out = np.empty_like(F)
        mu = np.empty(nf)
        areas = mesh.facet_area.copy()

        cases = {
            "pm_involution": lambda impl: impl.pm_involution(F, out),
            "moment_density": lambda impl: impl.moment_density(F, mu),
            "gradient": lambda impl: impl.gradient_coeffs(F, mu, out),
            "weighted_norm_sq": lambda impl: impl.weighted_norm_sq(F, areas),
            "fused flow rhs": lambda impl: impl.gradient_coeffs(
                F, impl.moment_density(F, mu), out
            ),
        }

        print(f"N={n} ({nf} facets), best of {repeat}:")
        for case, runner in cases.items():
            times = {}
            for name, impl in impls:
                times[name] = _time(lambda impl=impl: runner(impl), repeat)
            line = f"  {case:<18}"
            for name in times:
                line += f" {name}: {times[name] * 1e6:9.2f} us"
            if len(times) == 2:
                line += f"   speedup: {times['python'] / times['cython']:5.2f}x"
            print(line)
        print()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="8,16,32,64",
                        help="comma-separated torus refinements")
    parser.add_argument("--repeat", type=int, default=200)
    args = parser.parse_args()
    bench([int(s) for s in args.sizes.split(",")], args.repeat)


if __name__ == "__main__":
    main()
