import os
import subprocess
import sys

import numpy as np
import pytest

from tlsdiff import _kernels
from tlsdiff._kernels import lorentzian_rates_numpy, telegraph_parity_numpy


def test_parity_matches_manual_accumulation():
    rng = np.random.default_rng(0)
    u = rng.random((50, 7))
    p = rng.uniform(0.0, 1.0, 7)
    parity = telegraph_parity_numpy(u, p)
    acc = np.zeros(7, dtype=int)
    for s in range(50):
        acc ^= (u[s] < p).astype(int)
        assert np.array_equal(parity[s], acc)


def test_parity_zero_prob_never_flips():
    u = np.random.default_rng(1).random((30, 4))
    parity = telegraph_parity_numpy(u, np.zeros(4))
    assert not parity.any()


def test_parity_unit_prob_alternates():
    u = np.random.default_rng(2).random((6, 3))
    parity = telegraph_parity_numpy(u, np.ones(3))
    expected = np.tile(np.array([1, 0, 1, 0, 1, 0], dtype=np.uint8)[:, None], (1, 3))
    assert np.array_equal(parity, expected)


def test_lorentzian_rates_background_only():
    freqs = np.linspace(5.0, 6.0, 11)
    rates = lorentzian_rates_numpy(freqs, np.array([]), np.array([]), np.array([]), 0.02)
    assert np.allclose(rates, 0.02)


def test_lorentzian_rates_peak_value():
    # at resonance the excess rate is 8 pi^2 g^2 / Gamma
    g, gamma, bg = 0.25, 5.0, 0.02
    rates = lorentzian_rates_numpy(
        np.array([5.75]), np.array([5.75]), np.array([g]), np.array([gamma]), bg
    )
    assert rates[0] == pytest.approx(bg + 8 * np.pi**2 * g**2 / gamma, rel=1e-12)


@pytest.mark.skipif(not _kernels.USING_NUMBA, reason="numba backend not active")
class TestBackendEquivalence:
    def test_telegraph_bit_identical(self):
        rng = np.random.default_rng(3)
        for shape in ((1, 1), (120, 30), (7, 200)):
            u = rng.random(shape)
            p = rng.uniform(0, 1, shape[1])
            assert np.array_equal(
                telegraph_parity_numpy(u, p), _kernels._telegraph_parity_jit(u, p)
            )

    def test_lorentzian_bit_identical(self):
        rng = np.random.default_rng(4)
        freqs = 5.6 + np.arange(401) * 0.001
        for n_peaks in (0, 1, 5, 13):
            centers = rng.uniform(5.6, 6.0, n_peaks)
            couplings = rng.uniform(0.05, 0.5, n_peaks)
            widths = rng.uniform(0.5, 20.0, n_peaks)
            a = lorentzian_rates_numpy(freqs, centers, couplings, widths, 0.02)
            b = _kernels._lorentzian_rates_jit(freqs, centers, couplings, widths, 0.02)
            assert np.array_equal(a, b)


def test_env_flag_forces_numpy_fallback():
    env = dict(os.environ, TLSDIFF_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "from tlsdiff import _kernels; print(_kernels.USING_NUMBA)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "False"
