"""Closed-form physics of tunneling defects and their couplings.

Unit conventions used throughout the package:

* energies are stored as frequencies (E/h) in GHz,
* couplings as g/h in MHz,
* dipole moments in e*Angstrom,
* defect separations in nm,
* temperatures in K.

Keeping a single convention with explicit conversions at the SI boundary
avoids the usual factor-of-h and factor-of-2*pi mistakes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class PhysicalConstants:
    """CODATA values in SI units. Fixed, never configurable."""

    planck_h = 6.62607015e-34  # J s
    boltzmann_kB = 1.380649e-23  # J / K
    electron_charge_e = 1.602176634e-19  # C
    vacuum_permittivity_eps0 = 8.8541878128e-12  # F / m
    speed_of_light_c = 299792458.0  # m / s


# Scale factors to SI.
GHZ = 1e9  # Hz per GHz
MHZ = 1e6  # Hz per MHz
NM = 1e-9  # m per nm
E_ANGSTROM = PhysicalConstants.electron_charge_e * 1e-10  # C m per e*Angstrom


@dataclass(frozen=True)
class DefectParams:
    """Two-well tunneling defect: well asymmetry and tunneling energy.

    Both energies are expressed as frequencies (energy/h) in GHz. The
    asymmetry may take either sign; the tunneling energy is nonnegative.
    """

    asymmetry_eps: float  # GHz
    tunneling_delta: float  # GHz

    def __post_init__(self):
        if self.tunneling_delta < 0:
            raise ValueError(
                f"tunneling_delta must be >= 0, got {self.tunneling_delta}"
            )


@dataclass(frozen=True)
class EnvironmentParams:
    """Host-material and bath parameters.

    ``phonon_alpha`` is the prefactor of the phonon-mediated flip rate; its
    magnitude depends on material properties and is left fully configurable.
    With energies as GHz, alpha carries units of rate/GHz^3 and the returned
    rates share alpha's time base (e.g. alpha in hr^-1 GHz^-3 gives hr^-1).
    """

    temperature: float  # K
    relative_permittivity_eps_r: float = 10.0
    phonon_alpha: float = 1.0  # rate / GHz^3

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.relative_permittivity_eps_r < 1:
            raise ValueError(
                "relative_permittivity_eps_r must be >= 1, got "
                f"{self.relative_permittivity_eps_r}"
            )
        if self.phonon_alpha <= 0:
            raise ValueError(f"phonon_alpha must be > 0, got {self.phonon_alpha}")


@dataclass(frozen=True)
class DipoleMoment:
    """Electric dipole moment: magnitude in e*Angstrom plus a unit direction."""

    magnitude: float  # e * Angstrom
    orientation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(
            self, "orientation", np.asarray(self.orientation, dtype=float)
        )
        if self.magnitude < 0:
            raise ValueError(f"magnitude must be >= 0, got {self.magnitude}")
        if self.orientation.shape != (3,):
            raise ValueError("orientation must be a 3-vector")
        norm = float(np.linalg.norm(self.orientation))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"orientation must be unit norm, |v| = {norm}")

    def vector(self) -> np.ndarray:
        """Dipole vector in e*Angstrom."""
        return self.magnitude * self.orientation


@dataclass(frozen=True)
class CouplingResult:
    """Longitudinal defect-defect coupling, as frequencies g/h in MHz.

    ``g_parallel_over_h`` is the part of the static coupling that survives
    diagonalization; its magnitude never exceeds ``g_zz_over_h`` because the
    two asymmetry/energy ratios scaling it are at most 1.
    """

    g_zz_over_h: float  # MHz
    g_parallel_over_h: float  # MHz

    def __post_init__(self):
        if abs(self.g_parallel_over_h) > abs(self.g_zz_over_h) * (1 + 1e-12):
            raise ValueError("|g_parallel| cannot exceed |g_zz|")


def transition_energy(defect: DefectParams) -> float:
    """Transition energy E/h = sqrt(eps^2 + delta^2) in GHz."""
    return math.hypot(defect.asymmetry_eps, defect.tunneling_delta)


def boltzmann_factor(e_over_h_ghz: float, temperature_k: float) -> float:
    """Thermal occupation factor exp(-h*E / kB*T) for a transition at E/h GHz."""
    if temperature_k <= 0:
        raise ValueError(f"temperature must be > 0, got {temperature_k}")
    c = PhysicalConstants
    x = c.planck_h * e_over_h_ghz * GHZ / (c.boltzmann_kB * temperature_k)
    return math.exp(-x)


def phonon_rates(
    tf: DefectParams, env: EnvironmentParams
) -> tuple[float, float]:
    """Phonon-mediated relaxation and excitation rates of a fluctuator.

    Returns ``(rate_down, rate_up)`` where

        rate_down = alpha * delta^2 * E * coth(h E / 2 kB T)
        rate_up   = exp(-h E / kB T) * rate_down

    so the two rates obey detailed balance exactly by construction. Units
    follow ``env.phonon_alpha`` (see :class:`EnvironmentParams`).
    """
    e = transition_energy(tf)
    if e == 0:
        raise ValueError("transition energy must be > 0 (coth diverges at 0)")
    c = PhysicalConstants
    half_x = c.planck_h * e * GHZ / (2.0 * c.boltzmann_kB * env.temperature)
    rate_down = env.phonon_alpha * tf.tunneling_delta**2 * e / math.tanh(half_x)
    rate_up = rate_down * boltzmann_factor(e, env.temperature)
    return rate_down, rate_up


def qubit_defect_coupling(
    dipole_length_angstrom: float,
    field_length_m: float,
    frequency_ghz: float,
    qubit_capacitance_f: float,
) -> float:
    """Maximum transverse qubit-defect coupling g/h in MHz.

    Models a dipole of length ``d`` sitting in the qubit's electric field of
    characteristic extent ``x``: g = (2 e d / x) * sqrt(h f / 2 C). The
    dipole-field angle is dropped, so this is an upper bound.
    """
    if dipole_length_angstrom <= 0:
        raise ValueError("dipole length must be > 0")
    if field_length_m <= 0:
        raise ValueError("field length must be > 0")
    if frequency_ghz <= 0:
        raise ValueError("frequency must be > 0")
    if qubit_capacitance_f <= 0:
        raise ValueError("capacitance must be > 0")
    c = PhysicalConstants
    d_m = dipole_length_angstrom * 1e-10
    g_joule = (2.0 * c.electron_charge_e * d_m / field_length_m) * math.sqrt(
        c.planck_h * frequency_ghz * GHZ / (2.0 * qubit_capacitance_f)
    )
    return g_joule / c.planck_h / MHZ


def dipole_dipole_gzz(
    p1: DipoleMoment,
    p2: DipoleMoment,
    separation_nm,
    eps_r: float,
) -> CouplingResult:
    """Static dipole-dipole coupling between two defects, as g/h in MHz.

    Decomposes each dipole into components parallel and perpendicular to the
    separation axis:

        g_zz / 2 = (p1_perp . p2_perp - 2 p1_par p2_par) / (4 pi eps0 eps_r r^3)

    The returned ``g_parallel_over_h`` equals ``g_zz_over_h``, which is the
    slow-fluctuator limit (tunneling energy much smaller than asymmetry, so
    both eps/E ratios are ~1). Use :func:`g_parallel_from_gzz` to apply the
    ratios when the defect energies are known.
    """
    sep = np.asarray(separation_nm, dtype=float)
    if sep.shape != (3,):
        raise ValueError("separation must be a 3-vector in nm")
    r_m = float(np.linalg.norm(sep)) * NM
    if r_m == 0:
        raise ValueError("separation must be nonzero (1/r^3 singularity)")
    n_hat = sep / np.linalg.norm(sep)

    c = PhysicalConstants
    v1 = p1.vector() * E_ANGSTROM  # C m
    v2 = p2.vector() * E_ANGSTROM
    par1 = float(np.dot(v1, n_hat))
    par2 = float(np.dot(v2, n_hat))
    perp_dot = float(np.dot(v1 - par1 * n_hat, v2 - par2 * n_hat))

    prefactor = 1.0 / (
        4.0 * math.pi * c.vacuum_permittivity_eps0 * eps_r * r_m**3
    )
    g_zz_joule = 2.0 * prefactor * (perp_dot - 2.0 * par1 * par2)
    g_zz_mhz = g_zz_joule / c.planck_h / MHZ
    return CouplingResult(g_zz_over_h=g_zz_mhz, g_parallel_over_h=g_zz_mhz)


def g_parallel_from_gzz(
    g_zz_mhz: float, tls: DefectParams, tf: DefectParams
) -> float:
    """Scale a static g_zz by the asymmetry/energy ratio of each defect."""
    e_tls = transition_energy(tls)
    e_tf = transition_energy(tf)
    if e_tls == 0 or e_tf == 0:
        raise ValueError("both defects must have nonzero transition energy")
    return g_zz_mhz * (tls.asymmetry_eps / e_tls) * (tf.asymmetry_eps / e_tf)
