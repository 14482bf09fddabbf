"""Compiled versus numpy recurrence scan used by the first-order integrator.

    python3 benchmarks/bench_kernels.py --lines 4096 --length 256 --repeat 5

Prints the best wall time of each backend, the speedup and the largest
difference between the two outputs.
"""

import argparse
import time

import numpy as np

from simplechar import _kernels


def make_problem(lines, length, seed=0):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=lines) + 0.05j * np.abs(rng.normal(size=lines))
    a = np.exp(1j * q * 0.25)
    inc = rng.normal(size=(lines, length)) + 1j * rng.normal(size=(lines, length))
    forward = rng.random(lines) < 0.5
    return a, inc, forward


def best_time(func, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = func(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lines", type=int, default=4096)
    ap.add_argument("--length", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)

    problem = make_problem(args.lines, args.length)
    t_np, ref = best_time(_kernels.scan_numpy, problem, args.repeat)
    print(f"lines={args.lines} length={args.length}")
    print(f"numpy : {t_np * 1e3:9.2f} ms")
    if _kernels.scan_numba is None:
        print("numba : unavailable (not installed or SIMPLECHAR_NO_NUMBA set)")
        return
    _kernels.set_threads(args.threads)
    _kernels.scan_numba(*make_problem(4, 8))  # compile outside the timing
    t_nb, out = best_time(_kernels.scan_numba, problem, args.repeat)
    diff = np.max(np.abs(out - ref)) / max(np.max(np.abs(ref)), 1e-300)
    print(f"numba : {t_nb * 1e3:9.2f} ms")
    print(f"speedup {t_np / t_nb:.1f}x, max relative difference {diff:.2e}")


if __name__ == "__main__":
    main()
