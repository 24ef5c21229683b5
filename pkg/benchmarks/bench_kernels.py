"""Benchmark the jitted ensemble kernels against the pure-Python fallback.

Run twice (the process-level env flag decides which path is compiled):

    python3 benchmarks/bench_kernels.py
    GW2_DISABLE_NUMBA=1 python3 benchmarks/bench_kernels.py --replicates 2000

Both paths produce bit-identical replicate arrays; this script checks a
digest so a speedup never comes from silently diverging results.
"""

import argparse
import hashlib
import time

import numpy as np

import gw2


def build_scenario(replicates):
    return gw2.ScenarioSpec(
        offspring1=gw2.bernoulli(0.4),
        offspring2=gw2.bernoulli(0.3),
        immigration=gw2.poisson(1.5),
        initial0=gw2.poisson(2.0),
        initialm1=gw2.poisson(2.0),
        horizon=8,
        master_seed=20240817,
        replicates=replicates,
        thresholds=(5.0, 10.0, 20.0),
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--replicates", type=int, default=200_000)
    parser.add_argument("--workers", type=int, default=None)
    args = parser.parse_args()

    scenario = build_scenario(args.replicates)
    label = "numba" if gw2.USING_NUMBA else "fallback"

    # First call includes JIT compilation on the numba path; time it apart.
    t0 = time.perf_counter()
    xn = gw2.sample_xn(scenario, workers=args.workers)
    t1 = time.perf_counter()
    xn = gw2.sample_xn(scenario, workers=args.workers)
    t2 = time.perf_counter()

    digest = hashlib.sha256(np.ascontiguousarray(xn).tobytes()).hexdigest()[:16]
    rate = args.replicates / (t2 - t1)
    print(f"path={label} replicates={args.replicates}")
    print(f"first call  {t1 - t0:8.3f} s (includes compilation on the numba path)")
    print(f"second call {t2 - t1:8.3f} s   ({rate:,.0f} replicates/s)")
    print(f"digest={digest}  (must match between paths at equal replicates/seed)")


if __name__ == "__main__":
    main()
