"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--levels 4] [--repeat 20]

Reports the median wall time of one smoother application, one residual and
one V-cycle per backend on the finest level, plus the speedup.
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from mgcurl import kernels
from mgcurl.multigrid import build_multigrid
from mgcurl.smoothers import apply_smoother


def median_time(fn, repeat: int) -> float:
    fn()  # warm up
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--levels", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--alpha", type=float, default=1.0)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"levels={args.levels} alpha={args.alpha:g} backends={backends}")
    rng = np.random.default_rng(0)
    for kind in ("edge", "vertex"):
        t0 = time.perf_counter()
        hier = build_multigrid(args.levels, args.alpha, kind)
        setup = time.perf_counter() - t0
        k = hier.top
        A = hier.operators[k].matrix
        blocks = hier.smoothers[k]
        r = rng.standard_normal(A.shape[0])
        z = rng.standard_normal(A.shape[0])
        print(f"\n{kind} smoother, {A.shape[0]} dofs, setup {setup:.2f}s")
        print(f"{'operation':<12}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
        cases = {
            "smoother": lambda: apply_smoother(blocks, r),
            "residual": lambda: kernels.residual(A, r, z),
            "v-cycle": lambda: hier.precondition(r),
        }
        for name, fn in cases.items():
            times = {}
            for b in backends:
                with kernels.use_backend(b):
                    times[b] = median_time(fn, args.repeat)
            cells = "".join(f"{1e3 * times[b]:>10.2f}ms" for b in backends)
            speed = times["python"] / times["compiled"] if "compiled" in times else float("nan")
            print(f"{name:<12}{cells}{speed:>9.2f}x")


if __name__ == "__main__":
    main()
