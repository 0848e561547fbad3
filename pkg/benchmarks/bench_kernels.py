"""Time the numba kernels against the numpy reference versions.

    python benchmarks/bench_kernels.py [--batch 256] [--repeat 20]

Compilation happens once before timing; results are the median of
``--repeat`` runs, in microseconds.
"""
import argparse
import time

import numpy as np

from fgo import kernels
from fgo._jit import HAVE_NUMBA


def _median_us(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return 1e6 * float(np.median(times))


def cases(batch, n, d, rng):
    x = rng.standard_normal((batch, n, d))
    cut = rng.integers(0, n + 1, size=batch)
    traj = rng.standard_normal((batch, 64, d))
    h = rng.standard_normal((batch, 128))
    return {
        "dct_forward": lambda k: k.dct_forward(x),
        "dct_inverse": lambda k: k.dct_inverse(x, n // 2),
        "lowpass_varying": lambda k: k.lowpass_varying(x, cut),
        "haar_forward": lambda k: k.haar_forward(x),
        "third_difference": lambda k: k.third_difference(traj),
        "total_variation": lambda k: k.total_variation(traj),
        "gelu": lambda k: k.gelu(h),
        "gelu_grad": lambda k: k.gelu_grad(h),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--batch", type=int, default=256)
    parser.add_argument("--chunk-len", type=int, default=16)
    parser.add_argument("--dims", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is available")
    rng = np.random.default_rng(0)
    print(f"batch={args.batch} N={args.chunk_len} D={args.dims}")
    print(f"{'kernel':<18}{'numpy us':>12}{'numba us':>12}{'speed-up':>10}")
    for name, call in cases(args.batch, args.chunk_len, args.dims, rng).items():
        ref = _median_us(lambda: call(kernels.reference), args.repeat)
        fast = _median_us(lambda: call(kernels.jit), args.repeat)
        print(f"{name:<18}{ref:>12.1f}{fast:>12.1f}{ref / fast:>9.2f}x")


if __name__ == "__main__":
    main()
