"""Forward models: relaxation spectra, decay curves, and T1 datasets.

The relaxation rate of a qubit tuned across frequency is modeled as a sum
of Lorentzian resonances (one per coupled defect or spurious mode) on top
of a constant background rate. Composing that spectrum with per-defect
frequency trajectories produces spectrally and temporally resolved T1
datasets; adding shot sampling produces raw decay curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tlsdiff import physics
from tlsdiff._kernels import lorentzian_rates
from tlsdiff.diffusion import Trajectory

TWO_PI = 2.0 * math.pi

# Measurement protocol defaults: 40 log-spaced delays, 2000 shots each.
DEFAULT_DELAYS_US = np.logspace(math.log10(0.01), math.log10(100.0), 40)
DEFAULT_SHOTS = 2000
DEFAULT_INIT_FIDELITY = 0.99
DEFAULT_READOUT_FIDELITY = 0.95

DEFAULT_BACKGROUND_GAMMA_1Q = 0.02  # MHz == us^-1, i.e. a 50 us T1 floor
DEFAULT_QUBIT_GAMMA_Q = 0.70  # MHz


@dataclass(frozen=True)
class LorentzianPeak:
    """One relaxation resonance.

    ``decoherence_Gamma_i`` is the total decoherence rate of the coupled
    system stored as an angular rate in MHz, so the resonance half-width in
    ordinary frequency is Gamma_i / 2 pi (MHz).
    """

    center_frequency_f_i: float  # GHz
    coupling_g_i_over_h: float  # MHz
    decoherence_Gamma_i: float  # MHz (angular-rate convention)

    def __post_init__(self):
        if self.coupling_g_i_over_h <= 0:
            raise ValueError("coupling_g_i_over_h must be > 0")
        if self.decoherence_Gamma_i <= 0:
            raise ValueError("decoherence_Gamma_i must be > 0")

    def regime_valid(
        self,
        background_Gamma_1Q: float,
        qubit_dephasing_Gamma_Q: float = DEFAULT_QUBIT_GAMMA_Q,
        gamma_1_i: float | None = None,
    ) -> bool:
        """Check the weak-coupling window Gamma_1i > 2 pi g_i/h > Gamma_1Q.

        When the coupled system's own energy-relaxation rate ``gamma_1_i``
        is unknown, the upper test uses the bound Gamma_1i <= 2 (Gamma_i -
        Gamma_Q) implied by the decomposition of the total width, i.e. the
        flag then means "the window can hold", not "it does".
        """
        angular_g = TWO_PI * self.coupling_g_i_over_h
        if gamma_1_i is None:
            gamma_1_i = 2.0 * max(self.decoherence_Gamma_i - qubit_dephasing_Gamma_Q, 0.0)
        return gamma_1_i > angular_g > background_Gamma_1Q


@dataclass
class SpectrumModel:
    """Sum-of-Lorentzians relaxation model with a constant background."""

    peaks: list[LorentzianPeak] = field(default_factory=list)
    background_Gamma_1Q: float = DEFAULT_BACKGROUND_GAMMA_1Q  # MHz
    qubit_dephasing_Gamma_Q: float = DEFAULT_QUBIT_GAMMA_Q  # MHz

    def __post_init__(self):
        if self.background_Gamma_1Q < 0:
            raise ValueError("background_Gamma_1Q must be >= 0")

    def peak_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        centers = np.array([p.center_frequency_f_i for p in self.peaks])
        couplings = np.array([p.coupling_g_i_over_h for p in self.peaks])
        widths = np.array([p.decoherence_Gamma_i for p in self.peaks])
        return centers, couplings, widths


@dataclass
class RelaxationSpectrum:
    """Relaxation rate 1/T1 over an ordered frequency grid."""

    frequencies: np.ndarray  # GHz, strictly increasing
    relaxation_rates: np.ndarray  # us^-1
    t1_stderr: np.ndarray | None = None  # us, optional per-point T1 errors

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.relaxation_rates = np.asarray(self.relaxation_rates, dtype=float)
        if self.frequencies.ndim != 1 or self.frequencies.size == 0:
            raise ValueError("frequencies must be a nonempty 1-D array")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if self.relaxation_rates.shape != self.frequencies.shape:
            raise ValueError("relaxation_rates must match frequencies")
        if not np.all(np.isfinite(self.relaxation_rates)) or np.any(
            self.relaxation_rates <= 0
        ):
            raise ValueError("relaxation rates must be positive and finite")
        if self.t1_stderr is not None:
            self.t1_stderr = np.asarray(self.t1_stderr, dtype=float)
            if self.t1_stderr.shape != self.frequencies.shape:
                raise ValueError("t1_stderr must match frequencies")


@dataclass
class DecayCurve:
    """Excited-state survival estimates from repeated delay-and-measure runs."""

    delays: np.ndarray  # us, strictly increasing
    excited_population: np.ndarray  # fraction in [0, 1]
    shots_per_delay: int

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=float)
        self.excited_population = np.asarray(self.excited_population, dtype=float)
        if np.any(np.diff(self.delays) <= 0):
            raise ValueError("delays must be strictly increasing")
        if self.excited_population.shape != self.delays.shape:
            raise ValueError("excited_population must match delays")
        if np.any((self.excited_population < 0) | (self.excited_population > 1)):
            raise ValueError("populations must lie in [0, 1]")
        if self.shots_per_delay < 1:
            raise ValueError("shots_per_delay must be >= 1")


@dataclass
class T1Dataset:
    """T1 values on a (time, frequency) grid plus provenance metadata."""

    time_stamps: np.ndarray  # hours
    frequencies: np.ndarray  # GHz
    t1_grid: np.ndarray  # us, shape (n_times, n_freqs)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.time_stamps = np.asarray(self.time_stamps, dtype=float)
        self.frequencies = np.asarray(self.frequencies, dtype=float)
        self.t1_grid = np.asarray(self.t1_grid, dtype=float)
        if self.t1_grid.shape != (self.time_stamps.size, self.frequencies.size):
            raise ValueError(
                f"t1_grid shape {self.t1_grid.shape} does not match axes "
                f"({self.time_stamps.size}, {self.frequencies.size})"
            )
        if np.any(self.t1_grid <= 0):
            raise ValueError("all T1 values must be > 0")


@dataclass
class MeasurementNoise:
    """Optional measurement imperfections applied during dataset synthesis.

    ``t1_sigma`` applies multiplicative log-normal scatter to each T1 value;
    ``freq_jitter_MHz`` draws one uniform frequency-calibration offset per
    time slice within +/- the bound. ``shot_level=True`` replaces the
    analytic T1 with a full simulate-and-refit of each decay curve.
    """

    t1_sigma: float = 0.0
    freq_jitter_MHz: float = 0.0
    shot_level: bool = False
    shots: int = DEFAULT_SHOTS
    delays_us: np.ndarray = field(default_factory=lambda: DEFAULT_DELAYS_US.copy())
    init_fidelity: float = DEFAULT_INIT_FIDELITY
    readout_fidelity: float = DEFAULT_READOUT_FIDELITY


def synth_spectrum(model: SpectrumModel, grid) -> RelaxationSpectrum:
    """Evaluate the relaxation model on a sorted frequency grid (GHz)."""
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("frequency grid must be nonempty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("frequency grid must be strictly increasing")
    centers, couplings, widths = model.peak_arrays()
    rates = lorentzian_rates(grid, centers, couplings, widths, model.background_Gamma_1Q)
    return RelaxationSpectrum(frequencies=grid, relaxation_rates=rates)


def half_wave_spacing(cable_length_m: float, eps_r: float) -> float:
    """Half-wave mode spacing c / (2 L sqrt(eps_r)) of a cable, in GHz."""
    if cable_length_m <= 0:
        raise ValueError("cable length must be > 0")
    if eps_r < 1:
        raise ValueError("eps_r must be >= 1")
    c = physics.PhysicalConstants.speed_of_light_c
    return c / (2.0 * cable_length_m * math.sqrt(eps_r)) / physics.GHZ


def spurious_resonances(
    cable_length_m: float, eps_r: float, band_ghz: tuple[float, float]
) -> np.ndarray:
    """All half-wave cable mode frequencies inside ``band_ghz`` (inclusive)."""
    lo, hi = band_ghz
    f_r = half_wave_spacing(cable_length_m, eps_r)
    if hi < lo:
        return np.array([])
    n_lo = max(1, math.ceil(lo / f_r - 1e-12))
    n_hi = math.floor(hi / f_r + 1e-12)
    if n_hi < n_lo:
        return np.array([])
    return np.arange(n_lo, n_hi + 1) * f_r


def synth_decay(
    t1_us: float,
    delays_us=DEFAULT_DELAYS_US,
    shots: int = DEFAULT_SHOTS,
    init_fidelity: float = DEFAULT_INIT_FIDELITY,
    readout_fidelity: float = DEFAULT_READOUT_FIDELITY,
    rng_seed=0,
) -> DecayCurve:
    """Simulate a shot-sampled T1 decay curve.

    The ideal excited-state probability F_init * exp(-t/T1) is passed
    through a symmetric readout-error channel and binomially sampled with
    the given shot count. Deterministic for a given seed.
    """
    if t1_us <= 0:
        raise ValueError("t1 must be > 0")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    for name, f in (("init_fidelity", init_fidelity), ("readout_fidelity", readout_fidelity)):
        if not (0.5 < f <= 1.0):
            raise ValueError(f"{name} must lie in (0.5, 1], got {f}")
    delays = np.asarray(delays_us, dtype=float)
    rng = np.random.default_rng(rng_seed)
    p_ideal = init_fidelity * np.exp(-delays / t1_us)
    p_meas = readout_fidelity * p_ideal + (1.0 - readout_fidelity) * (1.0 - p_ideal)
    counts = rng.binomial(shots, p_meas)
    return DecayCurve(
        delays=delays,
        excited_population=counts / shots,
        shots_per_delay=shots,
    )


def _shifted_rates(model, grid_ghz, shifts_mhz, mobile_indices):
    centers, couplings, widths = model.peak_arrays()
    centers = centers.copy()
    for j, idx in enumerate(mobile_indices):
        centers[idx] += shifts_mhz[j] / 1e3
    return lorentzian_rates(grid_ghz, centers, couplings, widths, model.background_Gamma_1Q)


def synth_dataset(
    model: SpectrumModel,
    trajectories: list[Trajectory],
    grid,
    time_stamps,
    noise: MeasurementNoise | None = None,
    rng_seed=0,
    mobile_indices: list[int] | None = None,
) -> T1Dataset:
    """Compose frequency trajectories with the spectrum model into a T1 grid.

    At each time stamp the mobile peaks are shifted by their trajectory
    value (linear interpolation on the trajectory grid) and the model is
    evaluated on the frequency grid; T1 is the analytic 1/rate unless
    ``noise.shot_level`` requests a full decay simulation and refit per
    point. Randomness flows through one substream per time slice derived
    from ``rng_seed``, so slices are reproducible independent of evaluation
    order.
    """
    grid = np.asarray(grid, dtype=float)
    time_stamps = np.asarray(time_stamps, dtype=float)
    if noise is None:
        noise = MeasurementNoise()
    if mobile_indices is None:
        mobile_indices = list(range(len(trajectories)))
    if len(mobile_indices) != len(trajectories):
        raise ValueError(
            f"{len(trajectories)} trajectories for {len(mobile_indices)} mobile peaks"
        )
    for idx in mobile_indices:
        if not (0 <= idx < len(model.peaks)):
            raise ValueError(f"mobile peak index {idx} out of range")
    for traj in trajectories:
        if traj.times[0] > time_stamps.min() or traj.times[-1] < time_stamps.max():
            raise ValueError("trajectory time axis does not cover the time stamps")

    if isinstance(rng_seed, np.random.SeedSequence):
        seed_seq, seed_repr = rng_seed, rng_seed.entropy
    else:
        seed_seq, seed_repr = np.random.SeedSequence(rng_seed), rng_seed
    children = seed_seq.spawn(max(time_stamps.size, 1))
    t1_grid = np.empty((time_stamps.size, grid.size))
    for i, t in enumerate(time_stamps):
        rng = np.random.default_rng(children[i])
        shifts = np.array(
            [np.interp(t, traj.times, traj.delta_E_over_h) for traj in trajectories]
        )
        eval_grid = grid
        if noise.freq_jitter_MHz > 0:
            jitter_ghz = rng.uniform(-noise.freq_jitter_MHz, noise.freq_jitter_MHz) / 1e3
            eval_grid = grid + jitter_ghz
        rates = _shifted_rates(model, eval_grid, shifts, mobile_indices)
        t1 = 1.0 / rates
        if noise.t1_sigma > 0:
            t1 = t1 * np.exp(noise.t1_sigma * rng.standard_normal(t1.shape))
        if noise.shot_level:
            from tlsdiff.analysis import fit_decay  # deferred: analysis imports spectra

            for j in range(grid.size):
                curve = synth_decay(
                    t1[j],
                    noise.delays_us,
                    noise.shots,
                    noise.init_fidelity,
                    noise.readout_fidelity,
                    rng_seed=rng,
                )
                fit = fit_decay(curve)
                if fit.ok:
                    t1[j] = fit.t1_us
        t1_grid[i] = t1

    provenance = {
        "rng_seed": seed_repr,
        "model": {
            "peaks": [
                {
                    "center_frequency_f_i": p.center_frequency_f_i,
                    "coupling_g_i_over_h": p.coupling_g_i_over_h,
                    "decoherence_Gamma_i": p.decoherence_Gamma_i,
                }
                for p in model.peaks
            ],
            "background_Gamma_1Q": model.background_Gamma_1Q,
            "qubit_dephasing_Gamma_Q": model.qubit_dephasing_Gamma_Q,
        },
        "mobile_indices": list(mobile_indices),
        "noise": {
            "t1_sigma": noise.t1_sigma,
            "freq_jitter_MHz": noise.freq_jitter_MHz,
            "shot_level": noise.shot_level,
        },
    }
    return T1Dataset(
        time_stamps=time_stamps,
        frequencies=grid,
        t1_grid=t1_grid,
        provenance=provenance,
    )
