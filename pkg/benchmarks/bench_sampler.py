"""Compare the numba and pure-numpy batch samplers.

    python benchmarks/bench_sampler.py [--sets 100000] [--parties 2,8,64] [--repeat 5]

Both backends consume the same keyed uniforms, so the script also checks that
they return identical outcomes.
"""
import argparse
import time

import numpy as np

from qclocksync import HAVE_NUMBA
from qclocksync._kernels import sample_sets
from qclocksync.quantum import EVOLUTION_SIGN


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sets", type=int, default=100_000)
    ap.add_argument("--parties", default="2,8,64")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    ids = np.arange(args.sets)
    print(f"{'n':>6} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}  identical")
    for n in (int(x) for x in args.parties.split(",")):
        amps = np.full((1, n), 1 / np.sqrt(n), dtype=complex)
        vac = np.zeros(1, dtype=complex)
        times = np.linspace(0.0, 1.0, n)
        order = np.arange(n)

        def run(use_numba):
            return sample_sets(vac, amps, ids, 1.0, times, order, 12345, EVOLUTION_SIGN, use_numba=use_numba)

        t_np, out_np = timed(lambda: run(False), args.repeat)
        if HAVE_NUMBA:
            run(True)  # compile / load cache
            t_nb, out_nb = timed(lambda: run(True), args.repeat)
            same = bool(np.array_equal(out_np, out_nb))
            print(f"{n:>6} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>8.1f}  {same}")
        else:
            print(f"{n:>6} {t_np:>10.4f} {'n/a':>10} {'':>8}  (numba unavailable)")


if __name__ == "__main__":
    main()
