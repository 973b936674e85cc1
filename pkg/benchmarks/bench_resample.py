"""Benchmark: compiled polyphase kernel vs the pure-numpy fallback.

Run:  python benchmarks/bench_resample.py
"""

import time

import numpy as np

from vibrodiag._kernels import BACKEND, numpy_ref
from vibrodiag._kernels import polyphase_apply as selected_apply
from vibrodiag.sigproc import _design_polyphase

try:
    from vibrodiag._kernels import _polyphase

    cython_apply = _polyphase.polyphase_apply
except ImportError:
    cython_apply = None

CASES = [
    ("upsample 8 kHz -> 16 kHz, 10 s", 8000, 16000, 10.0),
    ("downsample 51.2 kHz -> 16 kHz, 10 s", 51200, 16000, 10.0),
    ("downsample 25 kHz -> 16 kHz, 10 s", 25000, 16000, 10.0),
]


def bench(fn, args, repeats=5):
    fn(*args)  # warmup
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    print(f"selected backend: {BACKEND}")
    header = f"{'case':<40}{'numpy (ms)':>12}{'cython (ms)':>13}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    rng = np.random.default_rng(0)
    for name, src, dst, seconds in CASES:
        n_in = int(src * seconds)
        x = rng.standard_normal(n_in)
        g = np.gcd(src, dst)
        up, down = dst // g, src // g
        n_out = round(n_in * dst / src)
        phases, center = _design_polyphase(up, down)
        taps = phases.shape[1]
        q_max = ((n_out - 1) * down + center) // up
        back = max(q_max - n_in + 1, 0) + taps
        xp = np.concatenate([np.zeros(taps), x, np.zeros(back)])
        args = (xp, phases, up, down, n_out, center, taps)

        t_numpy = bench(numpy_ref.polyphase_apply, args)
        if cython_apply is not None:
            t_cython = bench(cython_apply, args)
            y1 = numpy_ref.polyphase_apply(*args)
            y2 = cython_apply(*args)
            assert np.allclose(y1, y2, atol=1e-12), "backends disagree"
            print(f"{name:<40}{t_numpy*1e3:>12.2f}{t_cython*1e3:>13.2f}"
                  f"{t_numpy/t_cython:>9.2f}x")
        else:
            print(f"{name:<40}{t_numpy*1e3:>12.2f}{'n/a':>13}{'':>9}")


if __name__ == "__main__":
    main()
