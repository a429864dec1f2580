"""Monte Carlo simulation of defect spectral diffusion.

A probe defect (TLS) sits at the center of a thin dielectric cuboid that is
randomly populated with thermal two-state fluctuators. Each fluctuator
telegraphs between its states at a fixed rate; every flip shifts the probe
transition frequency by twice the pair's longitudinal coupling. Evolving
the bath in discrete time yields trajectories of the probe frequency
offset, which wander diffusively for dense weak baths and telegraphically
when a single strong fluctuator dominates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tlsdiff import physics
from tlsdiff._kernels import telegraph_parity

REFERENCE_AXIS = np.array([0.0, 0.0, 1.0])  # probe dipole direction (in plane)


@dataclass
class SimConfig:
    """Bath geometry, fluctuator statistics and time stepping.

    Lengths in nm, times in hours, rates in 1/hour, densities per GHz per
    um^3, dipole moments in e*Angstrom. ``gamma_min``/``gamma_max`` default
    to 1/(2 t_sim) and 1/dt: slower fluctuators would not flip during the
    run, faster ones would alias the time step.
    """

    tf_density: float  # GHz^-1 um^-3
    cuboid_dims: tuple[float, float, float] = (3.0, 1000.0, 1000.0)  # nm
    energy_bandwidth: float = 1.0  # GHz
    p_max: float = 1.5  # e * Angstrom
    eps_r: float = 10.0
    dt: float = 0.25  # hours
    t_sim: float = 30.0  # hours
    gamma_min: float | None = None  # hr^-1
    gamma_max: float | None = None  # hr^-1
    rng_seed: int = 0

    def __post_init__(self):
        if self.tf_density < 0:
            raise ValueError(f"tf_density must be >= 0, got {self.tf_density}")
        if len(self.cuboid_dims) != 3 or any(d <= 0 for d in self.cuboid_dims):
            raise ValueError(f"cuboid_dims must be 3 positive lengths, got {self.cuboid_dims}")
        if self.energy_bandwidth <= 0:
            raise ValueError("energy_bandwidth must be > 0")
        if self.p_max <= 0:
            raise ValueError("p_max must be > 0")
        if self.eps_r < 1:
            raise ValueError("eps_r must be >= 1")
        if self.dt <= 0 or self.t_sim <= 0:
            raise ValueError("dt and t_sim must be > 0")
        steps = self.t_sim / self.dt
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ValueError(
                f"t_sim/dt must be a positive integer step count, got {steps}"
            )
        if self.gamma_min is None:
            self.gamma_min = 1.0 / (2.0 * self.t_sim)
        if self.gamma_max is None:
            self.gamma_max = 1.0 / self.dt
        if not (0 < self.gamma_min < self.gamma_max):
            raise ValueError(
                f"need 0 < gamma_min < gamma_max, got ({self.gamma_min}, {self.gamma_max})"
            )
        if self.gamma_max * self.dt > 1.0 + 1e-12:
            raise ValueError(
                "gamma_max must not exceed 1/dt (flip probability above 1): "
                f"gamma_max*dt = {self.gamma_max * self.dt}"
            )

    @property
    def n_steps(self) -> int:
        return round(self.t_sim / self.dt)

    @property
    def volume_um3(self) -> float:
        a, b, c = self.cuboid_dims
        return a * b * c * 1e-9  # nm^3 -> um^3

    @property
    def mean_fluctuator_count(self) -> float:
        return self.tf_density * self.volume_um3 * self.energy_bandwidth


@dataclass
class Fluctuator:
    """One thermal two-state fluctuator coupled to the probe defect."""

    position: np.ndarray  # nm, within the cuboid
    dipole: physics.DipoleMoment
    flip_rate_Gamma: float  # hr^-1
    state: int  # +1 or -1
    g_parallel_over_h: float  # MHz shift coupling to the probe

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.state not in (-1, 1):
            raise ValueError(f"state must be +1 or -1, got {self.state}")
        if self.flip_rate_Gamma < 0:
            raise ValueError("flip_rate_Gamma must be >= 0")


@dataclass
class Trajectory:
    """Probe frequency offset versus time, relative to the first sample."""

    times: np.ndarray  # hours, uniform grid
    delta_E_over_h: np.ndarray  # MHz

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.delta_E_over_h = np.asarray(self.delta_E_over_h, dtype=float)
        if self.times.shape != self.delta_E_over_h.shape or self.times.ndim != 1:
            raise ValueError("times and delta_E_over_h must be equal-length 1-D arrays")
        if self.times.size == 0:
            raise ValueError("trajectory must contain at least one sample")
        if self.delta_E_over_h[0] != 0.0:
            raise ValueError("first trajectory sample must be exactly 0")


def sample_flip_rate(u, gamma_min: float, gamma_max: float):
    """Inverse-CDF sample of the 1/Gamma rate distribution on [gamma_min, gamma_max].

    The normalized density C/Gamma integrates to a log-uniform law, so
    Gamma = gamma_min * (gamma_max/gamma_min)**u for u uniform in [0, 1].
    Accepts scalar or array ``u``.
    """
    if not (0 < gamma_min < gamma_max):
        raise ValueError(f"need 0 < gamma_min < gamma_max, got ({gamma_min}, {gamma_max})")
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError("u must lie in [0, 1]")
    out = gamma_min * (gamma_max / gamma_min) ** u
    return float(out) if out.ndim == 0 else out


def sample_dipole_magnitude(rng: np.random.Generator, p_max: float = 1.5, size=None):
    """Sample dipole magnitudes from the density ~ sqrt(1 - (p/p_max)^2).

    Rejection sampling under the quarter-circle envelope; acceptance rate
    pi/4. Returns a float when ``size`` is None, else an array.
    """
    if p_max <= 0:
        raise ValueError("p_max must be > 0")
    n = 1 if size is None else int(size)
    out = np.empty(n)
    have = 0
    while have < n:
        m = max(16, int((n - have) * 1.4))
        x = rng.random(m)
        y = rng.random(m)
        accepted = x[y * y <= 1.0 - x * x]  # y <= sqrt(1-x^2), both sides >= 0
        take = min(accepted.size, n - have)
        out[have : have + take] = accepted[:take]
        have += take
    out *= p_max
    return float(out[0]) if size is None else out


def _unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    """n directions uniform on the sphere (normalized Gaussian triples)."""
    v = rng.normal(size=(n, 3))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    # Resample the measure-zero chance of a zero vector.
    while np.any(norms == 0):
        bad = norms[:, 0] == 0
        v[bad] = rng.normal(size=(int(bad.sum()), 3))
        norms = np.linalg.norm(v, axis=1, keepdims=True)
    return v / norms


def _pair_couplings_mhz(
    probe_vec_ea: np.ndarray,
    tf_vecs_ea: np.ndarray,
    separations_nm: np.ndarray,
    eps_r: float,
) -> np.ndarray:
    """Vectorized dipole-dipole g_zz/h in MHz for one probe against many TFs.

    Same formula as :func:`tlsdiff.physics.dipole_dipole_gzz`, batched over
    rows of ``tf_vecs_ea`` and ``separations_nm``.
    """
    c = physics.PhysicalConstants
    r_nm = np.linalg.norm(separations_nm, axis=1)
    n_hat = separations_nm / r_nm[:, None]
    v1 = probe_vec_ea * physics.E_ANGSTROM
    v2 = tf_vecs_ea * physics.E_ANGSTROM
    par1 = n_hat @ v1
    par2 = np.einsum("ij,ij->i", n_hat, v2)
    perp_dot = v2 @ v1 - par1 * par2  # (v1 - par1 n).(v2 - par2 n)
    r_m = r_nm * physics.NM
    pref = 2.0 / (4.0 * math.pi * c.vacuum_permittivity_eps0 * eps_r * r_m**3)
    return pref * (perp_dot - 2.0 * par1 * par2) / c.planck_h / physics.MHZ


def populate_fluctuators(config: SimConfig, rng: np.random.Generator) -> list[Fluctuator]:
    """Draw one random fluctuator bath around a probe at the cuboid center.

    The count is Poisson with mean density * volume * energy bandwidth.
    Positions are uniform in the cuboid, dipole directions uniform on the
    sphere, magnitudes from the quarter-circle density, flip rates from the
    1/Gamma law, and initial states equiprobable. The probe dipole magnitude
    is sampled from the same density with its direction fixed along
    ``REFERENCE_AXIS``; each pair coupling is the static dipole-dipole g_zz
    taken in the slow-fluctuator limit (g_parallel ~ g_zz).

    Draw order (count, probe magnitude, positions, directions, magnitudes,
    rates, states) is part of the reproducibility contract.
    """
    n = int(rng.poisson(config.mean_fluctuator_count))
    probe_magnitude = sample_dipole_magnitude(rng, config.p_max)
    if n == 0:
        return []
    dims = np.asarray(config.cuboid_dims, dtype=float)
    positions = rng.random((n, 3)) * dims
    directions = _unit_vectors(rng, n)
    magnitudes = sample_dipole_magnitude(rng, config.p_max, size=n)
    rates = sample_flip_rate(rng.random(n), config.gamma_min, config.gamma_max)
    states = rng.integers(0, 2, size=n) * 2 - 1

    center = dims / 2.0
    probe_vec = probe_magnitude * REFERENCE_AXIS
    tf_vecs = magnitudes[:, None] * directions
    g_par = _pair_couplings_mhz(probe_vec, tf_vecs, positions - center, config.eps_r)

    return [
        Fluctuator(
            position=positions[k],
            dipole=physics.DipoleMoment(magnitudes[k], directions[k]),
            flip_rate_Gamma=float(rates[k]),
            state=int(states[k]),
            g_parallel_over_h=float(g_par[k]),
        )
        for k in range(n)
    ]


def step(
    fluctuators: list[Fluctuator],
    current_offset: float,
    dt: float,
    rng: np.random.Generator,
) -> float:
    """Advance the bath one time step, mutating fluctuator states.

    Each fluctuator flips independently with probability Gamma*dt; a flip
    moves the probe offset by 2*g_parallel times the sign of the new state.
    Returns the new offset in MHz.
    """
    if not fluctuators:
        return current_offset
    probs = np.array([f.flip_rate_Gamma * dt for f in fluctuators])
    if np.any(probs > 1.0 + 1e-12):
        raise ValueError("flip probability Gamma*dt exceeds 1; reduce dt or gamma_max")
    u = rng.random(len(fluctuators))
    offset = current_offset
    for k, f in enumerate(fluctuators):
        if u[k] < probs[k]:
            f.state = -f.state
            offset += 2.0 * f.g_parallel_over_h * f.state
    return offset


def run_trajectory(
    config: SimConfig,
    rng_seed=None,
    fluctuators: list[Fluctuator] | None = None,
) -> Trajectory:
    """Simulate one spectral diffusion trajectory.

    Populates a fresh bath (unless ``fluctuators`` is supplied, which is
    left unmodified) and evolves it for t_sim/dt steps. The first sample is
    exactly 0. Bit-reproducible for a given seed; ``rng_seed`` defaults to
    ``config.rng_seed`` and may be anything ``np.random.default_rng``
    accepts.
    """
    rng = np.random.default_rng(config.rng_seed if rng_seed is None else rng_seed)
    if fluctuators is None:
        fluctuators = populate_fluctuators(config, rng)
    n_steps = config.n_steps
    times = np.arange(n_steps + 1) * config.dt

    if not fluctuators:
        return Trajectory(times=times, delta_E_over_h=np.zeros(n_steps + 1))

    probs = np.array([f.flip_rate_Gamma * config.dt for f in fluctuators])
    if np.any(probs > 1.0 + 1e-12):
        raise ValueError("flip probability Gamma*dt exceeds 1; reduce dt or gamma_max")
    weights = np.array([2.0 * f.g_parallel_over_h * f.state for f in fluctuators])

    uniforms = rng.random((n_steps, len(fluctuators)))
    parity = telegraph_parity(uniforms, probs)
    # state(t) = s0 * (1 - 2*parity)  =>  offset(t) = -sum_k 2 g_k s0_k parity_k(t)
    offsets = np.empty(n_steps + 1)
    offsets[0] = 0.0
    offsets[1:] = parity.astype(np.float64) @ -weights
    return Trajectory(times=times, delta_E_over_h=offsets)


def run_ensemble(
    config: SimConfig, n_trajectories: int, master_seed=None
) -> list[Trajectory]:
    """Simulate independent trajectories with deterministic substreams.

    Each trajectory gets its own bath and an RNG child spawned from the
    master seed, so results do not depend on execution order and are
    reproducible per (master_seed, index).
    """
    if n_trajectories < 1:
        raise ValueError("n_trajectories must be >= 1")
    if master_seed is None:
        master_seed = config.rng_seed
    if not isinstance(master_seed, np.random.SeedSequence):
        master_seed = np.random.SeedSequence(master_seed)
    children = master_seed.spawn(n_trajectories)
    return [run_trajectory(config, rng_seed=child) for child in children]
