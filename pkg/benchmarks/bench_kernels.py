"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from mlaf import kernels

CASES = {
    "ga-iml L=128 P=8 T=6400": lambda m, x, y, w: m.run_affine(
        x, y, 128, 8, 1.0, kernels.REG_GENIE, 0.0, True, False, w, 1e-4, 0, 0),
    "ga-obml L=128 P=8 T=6400": lambda m, x, y, w: m.run_affine(
        x, y, 128, 8, 1.0, kernels.REG_GENIE, 0.0, False, True, w, 1e-4, 0, 0),
    "nlms L=128 T=6400": lambda m, x, y, w: m.run_affine(
        x, y, 128, 1, 1.0, kernels.REG_FIXED, 0.0, False, False, w, 0.0, 0, 0),
    "rls L=128 T=6400": lambda m, x, y, w: m.run_rls(x, y, 128, 1 - 1e-5, 1e-2, w, 0),
    "bound 1e6 steps": lambda m, x, y, w: m.bound_final(1e6, 0.0027, 1_000_000),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    w = rng.standard_normal(128)
    w /= np.linalg.norm(w)
    x = rng.standard_normal(6400)
    y = np.convolve(x, w)[:6400] + 0.01 * rng.standard_normal(6400)
    impls = kernels.backends()
    print(f"{'case':28s}" + "".join(f"{name:>12s}" for name in impls) + "     speedup")
    for label, fn in CASES.items():
        best = {}
        for name, mod in impls.items():
            times = []
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                fn(mod, x, y, w)
                times.append(time.perf_counter() - t0)
            best[name] = min(times)
        row = f"{label:28s}" + "".join(f"{best[n]:11.4f}s" for n in impls)
        if "cython" in best:
            row += f"  {best['python'] / best['cython']:9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
