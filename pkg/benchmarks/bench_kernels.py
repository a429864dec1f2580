#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run with the package installed:

    python3 benchmarks/bench_kernels.py

The numba path must be importable for the comparison; the script also
verifies that both backends produce bit-identical results before timing.
"""

import time

import numpy as np

from tlsdiff._kernels import (
    USING_NUMBA,
    lorentzian_rates_numpy,
    telegraph_parity_numpy,
)


def _time(fn, *args, repeat=2000):
    fn(*args)  # warm up (JIT compile on the numba path)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def main():
    if not USING_NUMBA:
        print("numba backend unavailable or disabled (TLSDIFF_NUMBA=0); nothing to compare")
        return

    from tlsdiff._kernels import _lorentzian_rates_jit, _telegraph_parity_jit

    rng = np.random.default_rng(0)
    print(f"{'kernel':<44} {'numpy':>10} {'numba':>10} {'speedup':>8}")

    # Telegraph evolution at the default simulation scale and at a dense bath.
    for n_steps, n_tf in ((120, 30), (120, 150), (1200, 300)):
        u = rng.random((n_steps, n_tf))
        p = rng.uniform(0.001, 0.9, n_tf)
        assert np.array_equal(telegraph_parity_numpy(u, p), _telegraph_parity_jit(u, p))
        t_np = _time(telegraph_parity_numpy, u, p)
        t_nb = _time(_telegraph_parity_jit, u, p)
        label = f"telegraph_parity steps={n_steps} fluctuators={n_tf}"
        print(f"{label:<44} {t_np * 1e6:>8.1f}us {t_nb * 1e6:>8.1f}us {t_np / t_nb:>7.1f}x")

    # Spectrum evaluation at dataset-synthesis and fit-loop scales.
    for n_freq, n_peaks in ((401, 4), (401, 13), (61, 1)):
        freqs = 5.6 + np.arange(n_freq) * 0.001
        centers = rng.uniform(5.6, 6.0, n_peaks)
        couplings = rng.uniform(0.1, 0.5, n_peaks)
        widths = rng.uniform(1.0, 10.0, n_peaks)
        args = (freqs, centers, couplings, widths, 0.02)
        assert np.array_equal(lorentzian_rates_numpy(*args), _lorentzian_rates_jit(*args))
        t_np = _time(lorentzian_rates_numpy, *args)
        t_nb = _time(_lorentzian_rates_jit, *args)
        label = f"lorentzian_rates freqs={n_freq} peaks={n_peaks}"
        print(f"{label:<44} {t_np * 1e6:>8.1f}us {t_nb * 1e6:>8.1f}us {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
