"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The numba path is used whenever numba imports successfully. Set
``TLSDIFF_NUMBA=0`` to force the numpy fallback, ``TLSDIFF_NUMBA=1`` to
require numba (import error if unavailable). Both paths are bit-identical:
the telegraph kernel works in integers, and the Lorentzian kernel
accumulates peaks in the same order per grid point.

Run ``benchmarks/bench_kernels.py`` to compare the two backends.
"""

import os

import numpy as np

_TWO_PI = 2.0 * np.pi


def _env_choice():
    val = os.environ.get("TLSDIFF_NUMBA", "").strip().lower()
    if val in ("0", "false", "off", "no"):
        return False
    if val in ("1", "true", "on", "yes"):
        return True
    return None


_choice = _env_choice()
if _choice is False:
    USING_NUMBA = False
else:
    try:
        from numba import njit

        USING_NUMBA = True
    except ImportError:
        if _choice is True:
            raise ImportError(
                "TLSDIFF_NUMBA=1 requires numba, which failed to import"
            )
        USING_NUMBA = False


def telegraph_parity_numpy(uniforms, flip_prob):
    """Cumulative flip parity of N telegraph processes over S steps.

    uniforms: (S, N) draws in [0, 1); flip_prob: (N,) per-step flip
    probabilities. Returns (S, N) uint8: parity of the flip count of
    process k after step s (1 = state inverted relative to start).
    """
    flips = uniforms < flip_prob[None, :]
    return (np.cumsum(flips, axis=0, dtype=np.int64) & 1).astype(np.uint8)


def lorentzian_rates_numpy(freqs_ghz, centers_ghz, couplings_mhz, widths_mhz, background):
    """Sum-of-Lorentzians relaxation rate over a frequency grid.

    rate(f) = sum_i 2 g_i^2 G_i / ((G_i / 2 pi)^2 + (f_i - f)^2) + background

    with f in GHz, detunings and widths in MHz, g in MHz; the result is in
    MHz (numerically equal to us^-1).
    """
    rates = np.full(freqs_ghz.shape, float(background), dtype=np.float64)
    for f0, g, gam in zip(centers_ghz, couplings_mhz, widths_mhz):
        df = (freqs_ghz - f0) * 1e3
        rates += 2.0 * g * g * gam / ((gam / _TWO_PI) ** 2 + df * df)
    return rates


if USING_NUMBA:

    @njit(cache=True)
    def _telegraph_parity_jit(uniforms, flip_prob):
        n_steps, n = uniforms.shape
        out = np.empty((n_steps, n), dtype=np.uint8)
        acc = np.zeros(n, dtype=np.uint8)
        for s in range(n_steps):
            for k in range(n):
                if uniforms[s, k] < flip_prob[k]:
                    acc[k] ^= 1
                out[s, k] = acc[k]
        return out

    @njit(cache=True)
    def _lorentzian_rates_jit(freqs_ghz, centers_ghz, couplings_mhz, widths_mhz, background):
        m = freqs_ghz.shape[0]
        p = centers_ghz.shape[0]
        rates = np.empty(m, dtype=np.float64)
        for j in range(m):
            acc = background
            for i in range(p):
                df = (freqs_ghz[j] - centers_ghz[i]) * 1e3
                g = couplings_mhz[i]
                gam = widths_mhz[i]
                acc += 2.0 * g * g * gam / ((gam / _TWO_PI) ** 2 + df * df)
            rates[j] = acc
        return rates

    def telegraph_parity(uniforms, flip_prob):
        return _telegraph_parity_jit(
            np.ascontiguousarray(uniforms, dtype=np.float64),
            np.ascontiguousarray(flip_prob, dtype=np.float64),
        )

    def lorentzian_rates(freqs_ghz, centers_ghz, couplings_mhz, widths_mhz, background):
        return _lorentzian_rates_jit(
            np.ascontiguousarray(freqs_ghz, dtype=np.float64),
            np.ascontiguousarray(centers_ghz, dtype=np.float64),
            np.ascontiguousarray(couplings_mhz, dtype=np.float64),
            np.ascontiguousarray(widths_mhz, dtype=np.float64),
            float(background),
        )

    telegraph_parity.__doc__ = telegraph_parity_numpy.__doc__
    lorentzian_rates.__doc__ = lorentzian_rates_numpy.__doc__
else:
    telegraph_parity = telegraph_parity_numpy
    lorentzian_rates = lorentzian_rates_numpy
