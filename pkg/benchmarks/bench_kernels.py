"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

The first numba call of each kernel includes JIT compilation (or a cache
load), so every kernel is warmed up once before timing.  The script also
checks that both backends return identical results.
"""
import argparse
import time

import numpy as np

from eegpaint import kernels
from eegpaint.rng import Pcg32


def _cases():
    rng = Pcg32(0)
    stream = rng.integers(0, 256, 200_000).astype(np.uint8)
    stream[rng.integers(0, stream.size, 4000)] = 0xA0
    cands = kernels.numpy_backend.scan_frames(stream)
    xp = rng.normal(0, 1, (16, 32, 18, 18))
    cols = kernels.numpy_backend.im2col(xp, 4, 4, 2, 8, 8)
    a = rng.normal(0, 1, (96, 512))
    idx = rng.integers(0, 512, (8192, 4))
    w = rng.normal(0, 1, (8192, 4))
    return {
        "pcg32_fill(1e6)": lambda b: b.pcg32_fill(42, 109, 1_000_000)[0],
        "scan_frames(200kB)": lambda b: b.scan_frames(stream),
        "select_frames": lambda b: b.select_frames(cands, stream.size),
        "im2col(16x32x18x18, k4 s2)": lambda b: b.im2col(xp, 4, 4, 2, 8, 8),
        "col2im(same)": lambda b: b.col2im(cols, 16, 32, 18, 18, 4, 4, 2, 8, 8),
        "resample_last_axis(96x512 -> 8192)": lambda b: b.resample_last_axis(a, idx, w),
    }


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.numba_backend is None:
        raise SystemExit("numba is not installed; nothing to compare")
    fast, slow = kernels.numba_backend, kernels.numpy_backend
    print(f"{'kernel':38s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  same")
    for name, call in _cases().items():
        ref, got = call(slow), call(fast)  # also warms up the JIT
        same = np.array_equal(ref, got)
        t_np = best_of(lambda: call(slow), args.repeat)
        t_nb = best_of(lambda: call(fast), args.repeat)
        print(f"{name:38s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:8.1f}  {same}")


if __name__ == "__main__":
    main()
