"""Estimators and inverse problems for relaxation and diffusion data.

Covers exponential T1 fits, multi-Lorentzian spectrum fits with
Jacobian-based 68% confidence intervals, windowed trajectory extraction
from T1 grids, telegraph jump detection, jump-rate and fluctuator-energy
estimators, diffusivity fits, and T1 histogram diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks, peak_widths

from tlsdiff._kernels import lorentzian_rates
from tlsdiff.diffusion import Trajectory
from tlsdiff.spectra import (
    DEFAULT_QUBIT_GAMMA_Q,
    DecayCurve,
    LorentzianPeak,
    RelaxationSpectrum,
    T1Dataset,
)

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# Exponential decay fitting


@dataclass
class DecayFit:
    """Result of fitting A exp(-t/T1) + B to a decay curve."""

    t1_us: float
    t1_ci_us: float  # 68% half-width
    amplitude: float
    offset: float
    ok: bool
    message: str = ""


def _decay_model(x, t):
    amp, log_t1, off = x
    return amp * np.exp(-t / np.exp(log_t1)) + off


def fit_decay(curve: DecayCurve) -> DecayFit:
    """Least-squares exponential fit of a decay curve.

    Returns a flagged (``ok=False``) result instead of raising when the
    data do not decay, e.g. for a constant curve or when the best-fit T1
    runs away beyond any measured delay.
    """
    t = curve.delays
    p = curve.excited_population
    if t.size < 4:
        raise ValueError("need at least 4 delay points")

    if np.ptp(p) == 0:
        return DecayFit(np.nan, np.nan, 0.0, float(p[0]), ok=False, message="constant curve")

    off0 = float(np.mean(p[-3:]))
    amp0 = float(p[0] - off0)
    if amp0 <= 0:
        return DecayFit(np.nan, np.nan, amp0, off0, ok=False, message="no initial excess population")
    # Crude T1 guess: first crossing of the 1/e level, else mid-range.
    level = off0 + amp0 / math.e
    below = np.nonzero(p <= level)[0]
    t1_0 = float(t[below[0]]) if below.size else float(t[t.size // 2])
    t1_0 = min(max(t1_0, t[0]), t[-1])

    res = least_squares(
        lambda x: _decay_model(x, t) - p,
        x0=[amp0, math.log(t1_0), off0],
        method="lm",
        max_nfev=2000,
    )
    amp, log_t1, off = res.x
    t1 = math.exp(log_t1)

    if not res.success:
        return DecayFit(t1, np.nan, amp, off, ok=False, message="fit did not converge")
    if t1 > 100.0 * t[-1] or amp <= 0:
        return DecayFit(t1, np.nan, amp, off, ok=False, message="decay not resolved")

    dof = max(t.size - 3, 1)
    s2 = 2.0 * res.cost / dof
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj) * s2
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj) * s2
    t1_ci = t1 * math.sqrt(max(cov[1, 1], 0.0))
    return DecayFit(t1, t1_ci, amp, off, ok=True)


# ---------------------------------------------------------------------------
# Multi-Lorentzian spectrum fitting


@dataclass
class PeakEstimate:
    """One fitted resonance with 68% confidence half-widths."""

    peak: LorentzianPeak
    center_ci_GHz: float
    coupling_ci_MHz: float
    decoherence_ci_MHz: float
    regime_valid: bool


@dataclass
class FitResult:
    """Multi-Lorentzian fit: peaks sorted by center frequency, plus background."""

    peaks: list[PeakEstimate]
    background_Gamma_1Q: float
    background_ci: float
    residual_norm: float
    dof: int
    converged: bool
    message: str = ""


def _pack(centers, couplings, widths, background):
    return np.concatenate(
        [
            np.asarray(centers, dtype=float),
            np.log(couplings),
            np.log(widths),
            [math.log(background)],
        ]
    )


def _unpack(x, n_peaks):
    centers = x[:n_peaks]
    couplings = np.exp(x[n_peaks : 2 * n_peaks])
    widths = np.exp(x[2 * n_peaks : 3 * n_peaks])
    background = math.exp(x[-1])
    return centers, couplings, widths, background


def _detect_peaks(freqs, rates, min_height_factor):
    """Seed peaks from local maxima rising above the background estimate."""
    bg0 = float(np.median(rates))
    idx, props = find_peaks(rates, height=max(bg0 * min_height_factor, 1e-12))
    if idx.size == 0:
        return bg0, [], [], []
    widths_pts = peak_widths(rates, idx, rel_height=0.5)[0]
    df_mhz = float(np.mean(np.diff(freqs))) * 1e3
    centers, couplings, gammas = [], [], []
    for k, i in enumerate(idx):
        excess = max(rates[i] - bg0, 1e-12)
        fwhm_mhz = max(widths_pts[k], 0.5) * df_mhz
        gamma0 = math.pi * fwhm_mhz
        g0 = math.sqrt(excess * gamma0 / (8.0 * math.pi**2))
        centers.append(float(freqs[i]))
        couplings.append(g0)
        gammas.append(gamma0)
    return bg0, centers, couplings, gammas


def fit_lorentzians(
    spectrum: RelaxationSpectrum,
    init: list[LorentzianPeak] | None = None,
    min_height_factor: float = 3.0,
    qubit_dephasing_Gamma_Q: float = DEFAULT_QUBIT_GAMMA_Q,
    max_nfev: int = 5000,
) -> FitResult:
    """Fit the sum-of-Lorentzians relaxation model to a rate spectrum.

    Fitting happens on rates (the model is additive in rates), weighted by
    per-point rate uncertainties when the spectrum carries T1 standard
    errors. Couplings, widths and the background are fit in log space to
    stay positive. Initialization uses ``init`` hints when given, otherwise
    local maxima above ``min_height_factor`` times the median rate.
    Non-convergence yields a flagged partial result, not an exception.
    """
    freqs = spectrum.frequencies
    rates = spectrum.relaxation_rates

    weights = np.ones_like(rates)
    if spectrum.t1_stderr is not None:
        sigma_rate = spectrum.t1_stderr * rates**2
        good = np.isfinite(sigma_rate) & (sigma_rate > 0)
        if np.any(good):
            fill = float(np.median(sigma_rate[good]))
            sigma_rate = np.where(good, sigma_rate, fill)
            weights = 1.0 / sigma_rate

    if init is not None:
        centers = [p.center_frequency_f_i for p in init]
        couplings = [p.coupling_g_i_over_h for p in init]
        gammas = [p.decoherence_Gamma_i for p in init]
        bg0 = float(np.median(rates))
    else:
        bg0, centers, couplings, gammas = _detect_peaks(freqs, rates, min_height_factor)

    # Keep the problem identifiable even on noisy over-detection.
    max_peaks = max((freqs.size - 1) // 3, 0)
    if len(centers) > max_peaks:
        order = np.argsort(couplings)[::-1][:max_peaks]
        keep = sorted(order)
        centers = [centers[i] for i in keep]
        couplings = [couplings[i] for i in keep]
        gammas = [gammas[i] for i in keep]

    n_peaks = len(centers)
    if freqs.size < 3 * n_peaks + 1:
        raise ValueError(
            f"{freqs.size} points cannot constrain {n_peaks} peaks plus background"
        )

    if n_peaks == 0:
        bg = float(np.sum(rates * weights**2) / np.sum(weights**2))
        resid = (rates - bg) * weights
        dof = max(freqs.size - 1, 1)
        bg_ci = float(np.sqrt(np.sum(resid**2) / dof / np.sum(weights**2)))
        return FitResult(
            peaks=[],
            background_Gamma_1Q=bg,
            background_ci=bg_ci,
            residual_norm=float(np.linalg.norm(resid)),
            dof=freqs.size - 1,
            converged=True,
        )

    def residual(x):
        c, g, w, b = _unpack(x, n_peaks)
        return (lorentzian_rates(freqs, c, g, w, b) - rates) * weights

    x0 = _pack(centers, couplings, gammas, max(bg0, 1e-9))
    res = least_squares(residual, x0, method="lm", max_nfev=max_nfev)
    c, g, w, b = _unpack(res.x, n_peaks)

    n_params = res.x.size
    dof = freqs.size - n_params
    s2 = 2.0 * res.cost / max(dof, 1)
    jtj = res.jac.T @ res.jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    sig = np.sqrt(np.clip(np.diag(cov) * s2, 0.0, None))

    estimates = []
    for i in range(n_peaks):
        peak = LorentzianPeak(
            center_frequency_f_i=float(c[i]),
            coupling_g_i_over_h=float(g[i]),
            decoherence_Gamma_i=float(w[i]),
        )
        estimates.append(
            PeakEstimate(
                peak=peak,
                center_ci_GHz=float(sig[i]),
                coupling_ci_MHz=float(g[i] * sig[n_peaks + i]),
                decoherence_ci_MHz=float(w[i] * sig[2 * n_peaks + i]),
                regime_valid=peak.regime_valid(b, qubit_dephasing_Gamma_Q),
            )
        )
    estimates.sort(key=lambda e: e.peak.center_frequency_f_i)

    return FitResult(
        peaks=estimates,
        background_Gamma_1Q=float(b),
        background_ci=float(b * sig[-1]),
        residual_norm=float(np.sqrt(2.0 * res.cost)),
        dof=dof,
        converged=bool(res.success),
        message="" if res.success else str(res.message),
    )


# ---------------------------------------------------------------------------
# Trajectory extraction from T1 grids


@dataclass
class ExtractedTrajectory:
    """Windowed-argmax trajectory of one resonance through a T1 dataset."""

    trajectory: Trajectory
    centers_GHz: np.ndarray
    window_clipped: bool  # window hit the dataset frequency boundary


def extract_trajectory(
    dataset: T1Dataset,
    window_center_ghz: float,
    window_halfwidth_mhz: float = 20.0,
) -> ExtractedTrajectory:
    """Track a resonance as the argmax of 1/T1 inside a moving window.

    The window is re-centered on the previous slice's estimate each time
    step (first slice: ``window_center_ghz``). If the window runs into the
    dataset frequency boundary it is clipped there and the result is
    flagged. The returned trajectory is the frequency offset relative to
    the first slice, in MHz.
    """
    freqs = dataset.frequencies
    hw = window_halfwidth_mhz / 1e3
    if not (freqs[0] <= window_center_ghz - hw and window_center_ghz + hw <= freqs[-1]):
        raise ValueError(
            f"window {window_center_ghz} +/- {hw} GHz not inside dataset range "
            f"[{freqs[0]}, {freqs[-1]}]"
        )

    centers = np.empty(dataset.time_stamps.size)
    center = window_center_ghz
    clipped = False
    for i in range(dataset.time_stamps.size):
        lo, hi = center - hw, center + hw
        if lo < freqs[0] or hi > freqs[-1]:
            clipped = True
            lo, hi = max(lo, freqs[0]), min(hi, freqs[-1])
        sel = np.nonzero((freqs >= lo) & (freqs <= hi))[0]
        rates = 1.0 / dataset.t1_grid[i, sel]
        center = float(freqs[sel[np.argmax(rates)]])
        centers[i] = center

    delta = (centers - centers[0]) * 1e3
    delta[0] = 0.0
    traj = Trajectory(times=dataset.time_stamps.copy(), delta_E_over_h=delta)
    return ExtractedTrajectory(trajectory=traj, centers_GHz=centers, window_clipped=clipped)


# ---------------------------------------------------------------------------
# Telegraph jumps


@dataclass(frozen=True)
class JumpEvent:
    """A discrete frequency jump: signed amplitude at a trajectory step."""

    time: float  # hours
    amplitude: float  # MHz


def detect_jumps(traj: Trajectory, min_jump: float, kappa: float = 5.0) -> list[JumpEvent]:
    """Flag steps whose increment clears both min_jump and the noise floor.

    The noise floor is ``kappa`` times the median absolute successive
    difference, so dense small diffusive steps raise the bar while sparse
    telegraph jumps (where most increments are ~0) do not.
    """
    if min_jump <= 0:
        raise ValueError("min_jump must be > 0")
    diffs = np.diff(traj.delta_E_over_h)
    if diffs.size == 0:
        return []
    noise_floor = kappa * float(np.median(np.abs(diffs)))
    threshold = max(min_jump, noise_floor)
    idx = np.nonzero(np.abs(diffs) >= threshold)[0]
    return [JumpEvent(time=float(traj.times[k + 1]), amplitude=float(diffs[k])) for k in idx]


def g_parallel_from_jumps(events: list[JumpEvent]) -> float | None:
    """Coupling estimate: half the median absolute jump amplitude."""
    if not events:
        return None
    return 0.5 * float(np.median(np.abs([e.amplitude for e in events])))


@dataclass
class JumpStats:
    """Mean jump rate, plus a fluctuator-energy estimate when resolvable."""

    mean_rate_per_hr: float
    e_tf_over_kbt: float | None  # absent unless the trajectory telegraphs enough


def jump_statistics(
    events: list[JumpEvent],
    total_time: float,
    min_jumps_for_energy: int = 10,
) -> JumpStats:
    """Jump-count rate estimate and dwell-time energy estimate.

    The mean rate is simply count/time (the average of the up and down
    rates when they are comparable). When the events alternate in sign --
    a two-valued telegraph -- and there are at least
    ``min_jumps_for_energy`` of them, the ratio of mean dwell times in the
    two levels gives |E_TF / kB T| = |ln(rate_down / rate_up)|.
    """
    if total_time <= 0:
        raise ValueError("total_time must be > 0")
    rate = len(events) / total_time
    if len(events) < max(min_jumps_for_energy, 2):
        return JumpStats(mean_rate_per_hr=rate, e_tf_over_kbt=None)

    signs = np.sign([e.amplitude for e in events])
    if np.any(signs[1:] == signs[:-1]):
        return JumpStats(mean_rate_per_hr=rate, e_tf_over_kbt=None)  # not two-valued

    dwell_upper, dwell_lower = [], []
    for i in range(len(events) - 1):
        dwell = events[i + 1].time - events[i].time
        (dwell_upper if signs[i] > 0 else dwell_lower).append(dwell)
    if not dwell_upper or not dwell_lower:
        return JumpStats(mean_rate_per_hr=rate, e_tf_over_kbt=None)
    energy = abs(math.log(float(np.mean(dwell_upper)) / float(np.mean(dwell_lower))))
    return JumpStats(mean_rate_per_hr=rate, e_tf_over_kbt=energy)


# ---------------------------------------------------------------------------
# Diffusivity


@dataclass
class DiffusivityFit:
    """Diffusivity D from sigma(t) = 2 D sqrt(t), with a 68% half-width."""

    D: float  # MHz / sqrt(hour)
    ci: float


def estimate_diffusivity(trajectories: list[Trajectory]) -> DiffusivityFit:
    """Fit the cross-trajectory spread against 2 sqrt(t), through the origin.

    sigma(t) is the sample standard deviation of the frequency offsets
    across trajectories at each time; the fit is least squares of sigma on
    x = 2 sqrt(t) with zero intercept (the spread vanishes at t = 0 by
    construction), and the confidence half-width comes from the fit
    residuals.
    """
    if len(trajectories) < 2:
        raise ValueError("need at least 2 trajectories")
    times = trajectories[0].times
    for traj in trajectories[1:]:
        if traj.times.shape != times.shape or not np.allclose(traj.times, times):
            raise ValueError("trajectories must share a common time grid")

    deltas = np.vstack([t.delta_E_over_h for t in trajectories])
    sigma = np.std(deltas, axis=0, ddof=1)
    mask = times > 0
    x = 2.0 * np.sqrt(times[mask])
    y = sigma[mask]
    sxx = float(np.sum(x * x))
    if sxx == 0:
        raise ValueError("no positive-time samples to fit")
    d = float(np.sum(x * y) / sxx)
    resid = y - d * x
    n = x.size
    ci = float(np.sqrt(np.sum(resid**2) / max(n - 1, 1) / sxx))
    return DiffusivityFit(D=d, ci=ci)


# ---------------------------------------------------------------------------
# T1 distributions


@dataclass
class T1Histogram:
    """Histogram of T1 values along one dataset cut, with a bimodality check."""

    values: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray
    bimodal: bool
    separation: float  # two-cluster separation statistic behind the flag


def _two_cluster_separation(values: np.ndarray) -> float:
    """Best two-cluster split separation |mu1 - mu2| / sqrt((s1^2+s2^2)/2).

    The split point is chosen on the sorted values to minimize the pooled
    within-cluster sum of squares (exact 1-D 2-means). Returns 0 for
    constant or single-point data.
    """
    v = np.sort(values.astype(float))
    n = v.size
    if n < 4 or np.ptp(v) == 0:
        return 0.0
    csum = np.cumsum(v)
    csum2 = np.cumsum(v * v)
    ks = np.arange(2, n - 1)  # at least 2 points per cluster
    left_ss = csum2[ks - 1] - csum[ks - 1] ** 2 / ks
    right_n = n - ks
    right_sum = csum[-1] - csum[ks - 1]
    right_ss = (csum2[-1] - csum2[ks - 1]) - right_sum**2 / right_n
    k = int(ks[np.argmin(left_ss + right_ss)])
    mu1, mu2 = np.mean(v[:k]), np.mean(v[k:])
    s1, s2 = np.std(v[:k]), np.std(v[k:])
    pooled = math.sqrt((s1**2 + s2**2) / 2.0)
    if pooled == 0:
        return math.inf if mu1 != mu2 else 0.0
    return abs(mu1 - mu2) / pooled


def t1_distributions(
    dataset: T1Dataset,
    time_index: int | None = None,
    frequency_index: int | None = None,
    bins="auto",
    separation_threshold: float = 2.0,
) -> T1Histogram:
    """Histogram a constant-time or constant-frequency cut of a dataset.

    Exactly one of ``time_index``/``frequency_index`` selects the cut. The
    ``bimodal`` flag is a documented heuristic: it fires when the best
    two-cluster split of the values is separated by more than
    ``separation_threshold`` pooled standard deviations (Ashman-style
    criterion), which telegraphing resonances produce and unimodal scatter
    does not.
    """
    if (time_index is None) == (frequency_index is None):
        raise ValueError("give exactly one of time_index or frequency_index")
    if time_index is not None:
        values = dataset.t1_grid[time_index, :].copy()
    else:
        values = dataset.t1_grid[:, frequency_index].copy()
    counts, edges = np.histogram(values, bins=bins)
    sep = _two_cluster_separation(values)
    return T1Histogram(
        values=values,
        bin_edges=edges,
        counts=counts,
        bimodal=bool(sep > separation_threshold),
        separation=float(sep),
    )


# ---------------------------------------------------------------------------
# Regime classification


def classify_regime(
    traj: Trajectory,
    min_jump: float = 5.0,
    kappa: float = 5.0,
    jump_fraction: float = 0.8,
) -> str:
    """Label a trajectory 'telegraphic', 'diffusive' or 'mixed'.

    Heuristic, thresholds configurable: telegraphic when detected jumps
    carry at least ``jump_fraction`` of the total variation; diffusive when
    no jumps are detected but the excursion still clears the noise floor;
    mixed otherwise.
    """
    diffs = np.diff(traj.delta_E_over_h)
    if diffs.size == 0:
        return "mixed"
    events = detect_jumps(traj, min_jump=min_jump, kappa=kappa)
    total_variation = float(np.sum(np.abs(diffs)))
    if events:
        jump_variation = float(np.sum(np.abs([e.amplitude for e in events])))
        if total_variation > 0 and jump_variation >= jump_fraction * total_variation:
            return "telegraphic"
        return "mixed"
    noise_floor = kappa * float(np.median(np.abs(diffs)))
    if float(np.max(np.abs(traj.delta_E_over_h))) > noise_floor > 0:
        return "diffusive"
    return "mixed"


# ---------------------------------------------------------------------------
# Consolidated per-defect report


@dataclass
class DefectReport:
    """Consolidated estimates for one defect, one row of the report table."""

    qubit: str
    defect: str
    g_i_over_h_MHz: float
    g_i_ci_MHz: float
    Gamma_i_MHz: float
    Gamma_i_ci_MHz: float
    g_parallel_over_h_MHz: float | None = None
    mean_jump_rate_per_hr: float | None = None
    e_tf_over_kbt: float | None = None
    regime: str = ""
