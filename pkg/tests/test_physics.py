import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tlsdiff import physics
from tlsdiff.physics import (
    CouplingResult,
    DefectParams,
    DipoleMoment,
    EnvironmentParams,
    PhysicalConstants,
    boltzmann_factor,
    dipole_dipole_gzz,
    g_parallel_from_gzz,
    phonon_rates,
    qubit_defect_coupling,
    transition_energy,
)

Z = np.array([0.0, 0.0, 1.0])
X = np.array([1.0, 0.0, 0.0])


def test_unit_consistency_sentinel():
    # kB * 15 mK / h in GHz, direct constant arithmetic
    ghz = PhysicalConstants.boltzmann_kB * 0.015 / PhysicalConstants.planck_h / 1e9
    assert ghz == pytest.approx(0.3126, rel=1e-3)


class TestTransitionEnergy:
    def test_pythagorean(self):
        assert transition_energy(DefectParams(3.0, 4.0)) == pytest.approx(5.0)

    def test_symmetric_well(self):
        assert transition_energy(DefectParams(0.0, 7.2)) == pytest.approx(7.2)

    def test_no_tunneling(self):
        assert transition_energy(DefectParams(5.5, 0.0)) == pytest.approx(5.5)

    def test_negative_tunneling_rejected(self):
        with pytest.raises(ValueError):
            DefectParams(1.0, -0.1)

    @given(
        eps=st.floats(-50, 50),
        delta=st.floats(0, 50),
        d_eps=st.floats(0, 5),
        d_delta=st.floats(0, 5),
    )
    def test_monotone_in_asymmetry_and_tunneling(self, eps, delta, d_eps, d_delta):
        base = transition_energy(DefectParams(eps, delta))
        grown_eps = transition_energy(DefectParams(math.copysign(abs(eps) + d_eps, eps or 1), delta))
        grown_delta = transition_energy(DefectParams(eps, delta + d_delta))
        assert grown_eps >= base - 1e-12
        assert grown_delta >= base - 1e-12

    def test_lower_bound_max_component(self):
        d = DefectParams(-2.5, 1.2)
        assert transition_energy(d) >= max(abs(d.asymmetry_eps), d.tunneling_delta)


class TestBoltzmannFactor:
    def test_order_of_magnitude_anchor(self):
        # 5.5 GHz at 15 mK is deep in the frozen regime, ~1e-8
        assert boltzmann_factor(5.5, 0.015) == pytest.approx(2.2e-8, rel=0.05)

    def test_zero_energy(self):
        assert boltzmann_factor(0.0, 0.3) == 1.0

    def test_nonpositive_temperature(self):
        with pytest.raises(ValueError):
            boltzmann_factor(1.0, 0.0)
        with pytest.raises(ValueError):
            boltzmann_factor(1.0, -1.0)


class TestPhononRates:
    ENV = EnvironmentParams(temperature=0.015, phonon_alpha=2.0)

    def test_detailed_balance_exact(self):
        tf = DefectParams(0.3, 0.1)
        down, up = phonon_rates(tf, self.ENV)
        e = transition_energy(tf)
        assert up == down * boltzmann_factor(e, self.ENV.temperature)

    def test_rates_positive(self):
        down, up = phonon_rates(DefectParams(0.2, 0.05), self.ENV)
        assert down > 0 and up > 0

    def test_low_temperature_limit(self):
        # E / 2 kB T > 20: coth -> 1, so rate_down -> alpha delta^2 E
        tf = DefectParams(20.0, 5.0)
        e = transition_energy(tf)
        x = PhysicalConstants.planck_h * e * 1e9 / (
            2 * PhysicalConstants.boltzmann_kB * self.ENV.temperature
        )
        assert x > 20
        down, _ = phonon_rates(tf, self.ENV)
        assert down == pytest.approx(self.ENV.phonon_alpha * tf.tunneling_delta**2 * e, rel=1e-8)

    def test_log_ratio_recovers_energy(self):
        tf = DefectParams(0.2, 0.1)
        env = EnvironmentParams(temperature=0.015, phonon_alpha=1.0)
        down, up = phonon_rates(tf, env)
        e = transition_energy(tf)
        expected = PhysicalConstants.planck_h * e * 1e9 / (
            PhysicalConstants.boltzmann_kB * env.temperature
        )
        assert math.log(down / up) == pytest.approx(expected, rel=1e-12)

    def test_zero_energy_rejected(self):
        with pytest.raises(ValueError):
            phonon_rates(DefectParams(0.0, 0.0), self.ENV)


class TestQubitDefectCoupling:
    def test_capacitor_scale(self):
        assert qubit_defect_coupling(1.0, 20e-6, 5.5, 75e-15) == pytest.approx(0.0119, rel=0.02)

    def test_near_junction_scale(self):
        assert qubit_defect_coupling(1.0, 1e-6, 5.5, 75e-15) == pytest.approx(0.238, rel=0.02)

    def test_in_junction_scale(self):
        assert qubit_defect_coupling(1.0, 2e-9, 5.5, 75e-15) == pytest.approx(119.0, rel=0.02)

    def test_scaling_ratios(self):
        base = qubit_defect_coupling(1.0, 1e-6, 5.0, 75e-15)
        assert qubit_defect_coupling(2.0, 1e-6, 5.0, 75e-15) / base == pytest.approx(2.0)
        assert qubit_defect_coupling(1.0, 2e-6, 5.0, 75e-15) / base == pytest.approx(0.5)
        assert qubit_defect_coupling(1.0, 1e-6, 20.0, 75e-15) / base == pytest.approx(2.0)
        assert qubit_defect_coupling(1.0, 1e-6, 5.0, 300e-15) / base == pytest.approx(0.5)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            qubit_defect_coupling(1.0, 0.0, 5.5, 75e-15)
        with pytest.raises(ValueError):
            qubit_defect_coupling(1.0, -1e-6, 5.5, 75e-15)


class TestDipoleDipole:
    def test_collinear_pair_magnitude(self):
        c = dipole_dipole_gzz(DipoleMoment(1.0, Z), DipoleMoment(1.0, Z), 35.0 * Z, 10.0)
        assert abs(c.g_zz_over_h) == pytest.approx(32.0, rel=0.05)

    def test_orthogonal_pair_vanishes(self):
        # p1 along the separation, p2 perpendicular: both tensor terms are zero
        c = dipole_dipole_gzz(DipoleMoment(1.0, Z), DipoleMoment(1.0, X), 35.0 * Z, 10.0)
        assert c.g_zz_over_h == pytest.approx(0.0, abs=1e-12)

    def test_inverse_cube_scaling(self):
        near = dipole_dipole_gzz(DipoleMoment(1.0, Z), DipoleMoment(1.0, Z), 20.0 * Z, 10.0)
        far = dipole_dipole_gzz(DipoleMoment(1.0, Z), DipoleMoment(1.0, Z), 40.0 * Z, 10.0)
        assert near.g_zz_over_h / far.g_zz_over_h == pytest.approx(8.0, rel=1e-9)

    def test_exchange_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            d1 = rng.normal(size=3)
            d2 = rng.normal(size=3)
            p1 = DipoleMoment(0.7, d1 / np.linalg.norm(d1))
            p2 = DipoleMoment(1.2, d2 / np.linalg.norm(d2))
            sep = rng.uniform(-80, 80, 3)
            a = dipole_dipole_gzz(p1, p2, sep, 10.0).g_zz_over_h
            b = dipole_dipole_gzz(p2, p1, sep, 10.0).g_zz_over_h
            c = dipole_dipole_gzz(p1, p2, -sep, 10.0).g_zz_over_h
            assert a == pytest.approx(b, rel=1e-12)
            assert a == pytest.approx(c, rel=1e-12)

    def test_zero_separation_rejected(self):
        with pytest.raises(ValueError):
            dipole_dipole_gzz(DipoleMoment(1.0, Z), DipoleMoment(1.0, Z), [0, 0, 0], 10.0)

    def test_default_parallel_equals_gzz(self):
        c = dipole_dipole_gzz(DipoleMoment(1.0, Z), DipoleMoment(1.0, Z), 35.0 * Z, 10.0)
        assert c.g_parallel_over_h == c.g_zz_over_h

    def test_dipole_validation(self):
        with pytest.raises(ValueError):
            DipoleMoment(1.0, [1.0, 1.0, 0.0])  # not unit norm
        with pytest.raises(ValueError):
            DipoleMoment(-0.1, Z)


class TestGParallel:
    def test_no_tunneling_gives_full_gzz(self):
        tls = DefectParams(4.0, 0.0)
        tf = DefectParams(-0.2, 0.0)
        assert g_parallel_from_gzz(10.0, tls, tf) == pytest.approx(-10.0)

    def test_symmetric_well_vanishes(self):
        assert g_parallel_from_gzz(10.0, DefectParams(0.0, 4.0), DefectParams(0.2, 0.1)) == 0.0

    def test_arithmetic(self):
        # eps/E = 0.6 for a 3-4-5 triple on both sides
        tls = DefectParams(3.0, 4.0)
        tf = DefectParams(0.3, 0.4)
        assert g_parallel_from_gzz(10.0, tls, tf) == pytest.approx(3.6)

    def test_zero_energy_rejected(self):
        with pytest.raises(ValueError):
            g_parallel_from_gzz(1.0, DefectParams(0.0, 0.0), DefectParams(1.0, 0.0))

    @given(
        gzz=st.floats(-100, 100),
        e1=st.floats(-10, 10),
        d1=st.floats(0, 10),
        e2=st.floats(-10, 10),
        d2=st.floats(0, 10),
    )
    def test_magnitude_never_exceeds_gzz(self, gzz, e1, d1, e2, d2):
        tls, tf = DefectParams(e1, d1), DefectParams(e2, d2)
        if transition_energy(tls) == 0 or transition_energy(tf) == 0:
            return
        assert abs(g_parallel_from_gzz(gzz, tls, tf)) <= abs(gzz) + 1e-12


def test_coupling_result_invariant():
    with pytest.raises(ValueError):
        CouplingResult(g_zz_over_h=1.0, g_parallel_over_h=2.0)


def test_environment_validation():
    with pytest.raises(ValueError):
        EnvironmentParams(temperature=0.0)
    with pytest.raises(ValueError):
        EnvironmentParams(temperature=0.1, relative_permittivity_eps_r=0.5)
    with pytest.raises(ValueError):
        EnvironmentParams(temperature=0.1, phonon_alpha=0.0)
