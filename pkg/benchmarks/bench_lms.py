"""Compare the compiled and pure-Python NLMS kernels.

Runs the per-symbol adaptive training loop and the static FIR filter
with both backends on identical data, checks that their outputs agree,
and reports wall-clock timings.

    python3 benchmarks/bench_lms.py [--n 200000] [--taps 21] [--repeat 3]
"""

import argparse
import importlib
import time

import numpy as np


def load_kernels():
    kernels = {}
    try:
        kernels["cython"] = importlib.import_module("cvqkdsim.dsp._lms")
    except ImportError:
        print("compiled extension not built; benchmarking python only")
    kernels["python"] = importlib.import_module("cvqkdsim.dsp._lms_py")
    return kernels


def make_problem(n, n_taps, seed=0):
    rng = np.random.default_rng(seed)
    streams = rng.normal(0, 1, (4, n + n_taps - 1))
    targets = rng.normal(0, 1, (2, n))
    taps = np.zeros((2, 4, n_taps))
    taps[0, 0, (n_taps - 1) // 2] = 1.0
    taps[1, 1, (n_taps - 1) // 2] = 1.0
    return np.ascontiguousarray(streams), np.ascontiguousarray(targets), taps


def bench(kernel, streams, targets, taps, mu, repeat):
    train_times, apply_times = [], []
    for _ in range(repeat):
        w = taps.copy()
        t0 = time.perf_counter()
        err = kernel.nlms_train(streams, targets, w, mu, 1e-12)
        train_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        out = kernel.fir_apply(streams, w)
        apply_times.append(time.perf_counter() - t0)
    return min(train_times), min(apply_times), np.asarray(err), np.asarray(out), w


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000,
                    help="training symbols (default 200000)")
    ap.add_argument("--taps", type=int, default=21)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    kernels = load_kernels()
    streams, targets, taps = make_problem(args.n, args.taps)
    results = {}
    for name, kernel in kernels.items():
        results[name] = bench(kernel, streams, targets, taps, 0.01,
                              args.repeat)

    print(f"n={args.n} taps={args.taps} (best of {args.repeat})")
    print(f"{'backend':<8} {'train [ms]':>12} {'apply [ms]':>12} "
          f"{'Msym/s train':>13}")
    for name, (t_train, t_apply, *_rest) in results.items():
        print(f"{name:<8} {t_train * 1e3:>12.1f} {t_apply * 1e3:>12.1f} "
              f"{args.n / t_train / 1e6:>13.2f}")

    if len(results) == 2:
        _, _, err_c, out_c, w_c = results["cython"]
        _, _, err_p, out_p, w_p = results["python"]
        for label, a, b in (("err", err_c, err_p), ("out", out_c, out_p),
                            ("taps", w_c, w_p)):
            worst = float(np.max(np.abs(a - b)))
            print(f"max |cython - python| {label}: {worst:.3e}")
            assert worst < 1e-9, f"{label} mismatch between backends"
        speedup = results["python"][0] / results["cython"][0]
        print(f"training speedup: {speedup:.1f}x")


if __name__ == "__main__":
    main()
