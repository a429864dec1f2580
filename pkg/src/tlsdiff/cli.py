"""Command-line front end and reproduction harness.

Subcommands: ``synth`` (T1 dataset synthesis), ``simulate`` (spectral
diffusion trajectories), ``analyze`` (fit/extract/report pipeline),
``sweep-density`` (diffusivity versus fluctuator density), ``constants``
(closed-form sanity table). Every command reads a flat JSON config, accepts
flag overrides, and writes a manifest with the resolved config, master seed
and output digests; passing a manifest back as ``--config`` repeats the run
byte-identically.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 fit
convergence failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from tlsdiff import __version__, analysis, diffusion, physics, spectra
from tlsdiff import io as tio
from tlsdiff.io import DataFormatError
from tlsdiff.manifest import (
    ConfigError,
    check_keys,
    finalize_manifest,
    load_config,
    new_manifest,
    write_manifest,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4

MAX_DENSITY = 5.0e4  # GHz^-1 um^-3; pair interactions between fluctuators
# are neglected, which stops being defensible above this density.

SIM_KEYS = {
    "tf_density",
    "cuboid_dims",
    "energy_bandwidth",
    "p_max",
    "eps_r",
    "dt",
    "t_sim",
    "gamma_min",
    "gamma_max",
    "rng_seed",
}

PEAK_KEYS = {"center_frequency_f_i", "coupling_g_i_over_h", "decoherence_Gamma_i", "mobile"}

NOISE_KEYS = {
    "t1_sigma",
    "freq_jitter_MHz",
    "shot_level",
    "shots",
    "init_fidelity",
    "readout_fidelity",
}

SYNTH_KEYS = {
    "rng_seed",
    "freq_start_GHz",
    "freq_stop_GHz",
    "freq_step_MHz",
    "t_stop_hr",
    "t_step_hr",
    "peaks",
    "background_Gamma_1Q",
    "qubit_dephasing_Gamma_Q",
    "noise",
    "diffusion",
    "trajectory_file",
    "write_ground_truth",
}

ANALYZE_KEYS = {
    "dataset",
    "qubit_label",
    "reference_slice",
    "window_halfwidth_MHz",
    "min_jump_MHz",
    "kappa",
    "min_jumps_for_energy",
    "min_height_factor",
    "mask_GHz",
    "mask_halfwidth_MHz",
}

SWEEP_KEYS = SIM_KEYS | {"densities", "repetitions", "n_trajectories"}
SIMULATE_KEYS = SIM_KEYS | {"n_trajectories"}


def _require(config: dict, key: str, context: str):
    if key not in config:
        raise ConfigError(f"{context}: missing required config key '{key}'")
    return config[key]


def _sim_config(config: dict, context: str) -> diffusion.SimConfig:
    kwargs = {k: config[k] for k in SIM_KEYS if k in config}
    if "cuboid_dims" in kwargs:
        kwargs["cuboid_dims"] = tuple(kwargs["cuboid_dims"])
    _require(config, "tf_density", context)
    try:
        return diffusion.SimConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from None


def _uniform_grid(start: float, stop: float, step: float, context: str) -> np.ndarray:
    if step <= 0:
        raise ConfigError(f"{context}: step must be > 0")
    n = (stop - start) / step
    if n < 0 or abs(n - round(n)) > 1e-9:
        raise ConfigError(
            f"{context}: span {stop - start} is not an integer multiple of step {step}"
        )
    return start + np.arange(round(n) + 1) * step


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# synth


def _build_model(config: dict) -> tuple[spectra.SpectrumModel, list[int]]:
    peaks_cfg = _require(config, "peaks", "synth")
    peaks, mobile = [], []
    for i, pk in enumerate(peaks_cfg):
        check_keys(pk, PEAK_KEYS, f"synth: peaks[{i}]")
        try:
            peaks.append(
                spectra.LorentzianPeak(
                    center_frequency_f_i=float(_require(pk, "center_frequency_f_i", f"peaks[{i}]")),
                    coupling_g_i_over_h=float(_require(pk, "coupling_g_i_over_h", f"peaks[{i}]")),
                    decoherence_Gamma_i=float(_require(pk, "decoherence_Gamma_i", f"peaks[{i}]")),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"synth: peaks[{i}]: {exc}") from None
        if pk.get("mobile", False):
            mobile.append(i)
    model = spectra.SpectrumModel(
        peaks=peaks,
        background_Gamma_1Q=float(config.get("background_Gamma_1Q", spectra.DEFAULT_BACKGROUND_GAMMA_1Q)),
        qubit_dephasing_Gamma_Q=float(config.get("qubit_dephasing_Gamma_Q", spectra.DEFAULT_QUBIT_GAMMA_Q)),
    )
    return model, mobile


def _build_noise(config: dict) -> spectra.MeasurementNoise:
    noise_cfg = config.get("noise", {})
    check_keys(noise_cfg, NOISE_KEYS, "synth: noise")
    return spectra.MeasurementNoise(
        t1_sigma=float(noise_cfg.get("t1_sigma", 0.0)),
        freq_jitter_MHz=float(noise_cfg.get("freq_jitter_MHz", 0.0)),
        shot_level=bool(noise_cfg.get("shot_level", False)),
        shots=int(noise_cfg.get("shots", spectra.DEFAULT_SHOTS)),
        init_fidelity=float(noise_cfg.get("init_fidelity", spectra.DEFAULT_INIT_FIDELITY)),
        readout_fidelity=float(noise_cfg.get("readout_fidelity", spectra.DEFAULT_READOUT_FIDELITY)),
    )


def cmd_synth(args) -> int:
    config = load_config(args.config, expected_command="synth")
    check_keys(config, SYNTH_KEYS, "synth")
    if args.seed is not None:
        config["rng_seed"] = args.seed
    seed = int(config.get("rng_seed", 0))
    config["rng_seed"] = seed

    grid = _uniform_grid(
        float(_require(config, "freq_start_GHz", "synth")),
        float(_require(config, "freq_stop_GHz", "synth")),
        float(_require(config, "freq_step_MHz", "synth")) / 1e3,
        "synth: frequency grid",
    )
    stamps = _uniform_grid(
        0.0,
        float(_require(config, "t_stop_hr", "synth")),
        float(config.get("t_step_hr", 0.25)),
        "synth: time grid",
    )

    model, mobile_idx = _build_model(config)
    noise = _build_noise(config)

    seed_seq = np.random.SeedSequence(seed)
    traj_seq, noise_seq = seed_seq.spawn(2)

    trajectories: list[diffusion.Trajectory] = []
    if config.get("trajectory_file"):
        by_id = tio.read_trajectories_long(config["trajectory_file"])
        trajectories = [by_id[k] for k in sorted(by_id)]
        if len(trajectories) != len(mobile_idx):
            raise ConfigError(
                f"synth: {len(trajectories)} trajectories in file for "
                f"{len(mobile_idx)} mobile peaks"
            )
    elif mobile_idx:
        diff_cfg = dict(config.get("diffusion", {}))
        if not diff_cfg:
            raise ConfigError(
                "synth: mobile peaks need either 'diffusion' settings or a 'trajectory_file'"
            )
        diff_cfg.setdefault("dt", float(config.get("t_step_hr", 0.25)))
        diff_cfg.setdefault("t_sim", float(stamps[-1]) if stamps[-1] > 0 else 30.0)
        sim_cfg = _sim_config(diff_cfg, "synth: diffusion")
        if sim_cfg.t_sim < stamps[-1]:
            raise ConfigError(
                f"synth: diffusion t_sim {sim_cfg.t_sim} does not cover t_stop_hr {stamps[-1]}"
            )
        trajectories = [
            diffusion.run_trajectory(sim_cfg, rng_seed=child)
            for child in traj_seq.spawn(len(mobile_idx))
        ]

    try:
        dataset = spectra.synth_dataset(
            model,
            trajectories,
            grid,
            stamps,
            noise=noise,
            rng_seed=noise_seq,
            mobile_indices=mobile_idx,
        )
    except ValueError as exc:
        raise ConfigError(f"synth: {exc}") from None

    out = _out_dir(args)
    manifest = new_manifest("synth", config, seed, __version__)
    dataset_path = out / "dataset.csv"
    tio.write_t1_dataset(dataset_path, dataset, sidecar={"software_version": __version__})
    outputs = [dataset_path, dataset_path.with_suffix(".json")]

    if config.get("write_ground_truth", False):
        truth_peaks = out / "truth_peaks.csv"
        with open(truth_peaks, "w", newline="") as fh:
            fh.write("index,center_frequency_f_i,coupling_g_i_over_h,decoherence_Gamma_i,mobile\n")
            for i, pk in enumerate(model.peaks):
                fh.write(
                    f"{i},{tio.fmt(pk.center_frequency_f_i)},{tio.fmt(pk.coupling_g_i_over_h)},"
                    f"{tio.fmt(pk.decoherence_Gamma_i)},{int(i in mobile_idx)}\n"
                )
        outputs.append(truth_peaks)
        if trajectories:
            truth_traj = out / "truth_trajectories.csv"
            tio.write_trajectories_long(
                truth_traj, trajectories, ids=[f"d{i}" for i in mobile_idx]
            )
            outputs.append(truth_traj)

    finalize_manifest(manifest, outputs, out)
    write_manifest(out / "synth_manifest.json", manifest)
    print(f"wrote {dataset_path} ({dataset.time_stamps.size} x {dataset.frequencies.size} grid)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    config = load_config(args.config, expected_command="simulate")
    check_keys(config, SIMULATE_KEYS, "simulate")
    if args.seed is not None:
        config["rng_seed"] = args.seed
    config.setdefault("rng_seed", 0)
    n_traj = int(config.get("n_trajectories", 13))
    if n_traj < 1:
        raise ConfigError("simulate: n_trajectories must be >= 1")
    sim_cfg = _sim_config(config, "simulate")

    trajectories = diffusion.run_ensemble(sim_cfg, n_traj, master_seed=sim_cfg.rng_seed)

    out = _out_dir(args)
    manifest = new_manifest("simulate", config, sim_cfg.rng_seed, __version__)
    outputs = []
    for k, traj in enumerate(trajectories):
        path = out / f"trajectory_{k:03d}.csv"
        tio.write_trajectory(path, traj)
        outputs.append(path)

    if n_traj >= 2:
        fit = analysis.estimate_diffusivity(trajectories)
        print(f"ensemble diffusivity D = {fit.D:.4g} +/- {fit.ci:.2g} MHz/sqrt(hr)")
    finalize_manifest(manifest, outputs, out)
    write_manifest(out / "simulate_manifest.json", manifest)
    print(f"wrote {n_traj} trajectories to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _masked_spectrum(dataset, slice_idx, masks_ghz, mask_hw_mhz):
    freqs = dataset.frequencies
    keep = np.ones(freqs.size, dtype=bool)
    hw = mask_hw_mhz / 1e3
    for m in masks_ghz:
        keep &= np.abs(freqs - m) > hw
    if not np.any(keep):
        raise DataFormatError("all frequencies are masked; nothing to fit")
    rates = 1.0 / dataset.t1_grid[slice_idx, keep]
    return spectra.RelaxationSpectrum(frequencies=freqs[keep], relaxation_rates=rates), keep


def cmd_analyze(args) -> int:
    config = load_config(args.config, expected_command="analyze") if args.config else {}
    check_keys(config, ANALYZE_KEYS, "analyze")
    if args.dataset is not None:
        config["dataset"] = args.dataset
    if args.mask:
        config["mask_GHz"] = [float(m) for m in args.mask]
    dataset_path = config.get("dataset")
    if not dataset_path:
        raise ConfigError("analyze: no dataset given (positional argument or 'dataset' key)")

    qubit = str(config.get("qubit_label", "q0"))
    slice_idx = int(config.get("reference_slice", 0))
    window_hw = float(config.get("window_halfwidth_MHz", 20.0))
    min_jump = float(config.get("min_jump_MHz", 5.0))
    kappa = float(config.get("kappa", 5.0))
    min_jumps_e = int(config.get("min_jumps_for_energy", 10))
    min_height = float(config.get("min_height_factor", 3.0))
    masks = [float(m) for m in config.get("mask_GHz", [])]
    mask_hw = float(config.get("mask_halfwidth_MHz", 3.0))

    dataset = tio.read_t1_dataset(dataset_path)
    if not (0 <= slice_idx < dataset.time_stamps.size):
        raise ConfigError(f"analyze: reference_slice {slice_idx} out of range")

    spectrum, _ = _masked_spectrum(dataset, slice_idx, masks, mask_hw)
    fit = analysis.fit_lorentzians(spectrum, min_height_factor=min_height)

    freqs = dataset.frequencies
    hw_ghz = window_hw / 1e3
    total_time = float(dataset.time_stamps[-1] - dataset.time_stamps[0])

    reports, trajectories, ids = [], [], []
    out = _out_dir(args)
    outputs = []
    for est in fit.peaks:
        f_i = est.peak.center_frequency_f_i
        if any(abs(f_i - m) <= mask_hw / 1e3 for m in masks):
            continue  # user-declared spurious line
        label = f"d{len(reports)}"
        center = min(max(f_i, freqs[0] + hw_ghz), freqs[-1] - hw_ghz)
        extracted = analysis.extract_trajectory(dataset, center, window_hw)
        traj = extracted.trajectory
        events = analysis.detect_jumps(traj, min_jump=min_jump, kappa=kappa)
        stats = analysis.jump_statistics(events, total_time, min_jumps_e)
        reports.append(
            analysis.DefectReport(
                qubit=qubit,
                defect=label,
                g_i_over_h_MHz=est.peak.coupling_g_i_over_h,
                g_i_ci_MHz=est.coupling_ci_MHz,
                Gamma_i_MHz=est.peak.decoherence_Gamma_i,
                Gamma_i_ci_MHz=est.decoherence_ci_MHz,
                g_parallel_over_h_MHz=analysis.g_parallel_from_jumps(events),
                mean_jump_rate_per_hr=stats.mean_rate_per_hr if events else None,
                e_tf_over_kbt=stats.e_tf_over_kbt,
                regime=analysis.classify_regime(traj, min_jump=min_jump, kappa=kappa),
            )
        )
        trajectories.append(traj)
        ids.append(label)
        hist = analysis.t1_distributions(
            dataset, frequency_index=int(np.argmin(np.abs(freqs - f_i)))
        )
        hist_path = out / f"hist_{label}.csv"
        tio.write_histogram_csv(hist_path, hist)
        outputs.append(hist_path)

    report_path = out / "report.csv"
    tio.write_defect_reports(report_path, reports)
    outputs.append(report_path)
    if trajectories:
        traj_path = out / "trajectories.csv"
        tio.write_trajectories_long(traj_path, trajectories, ids=ids)
        outputs.append(traj_path)

    summary = {
        "n_defects": len(reports),
        "background_Gamma_1Q": fit.background_Gamma_1Q,
        "fit_converged": fit.converged,
    }
    if len(trajectories) >= 2:
        dfit = analysis.estimate_diffusivity(trajectories)
        summary["D_MHz_per_sqrt_hr"] = dfit.D
        summary["D_ci"] = dfit.ci
        print(f"ensemble diffusivity D = {dfit.D:.4g} +/- {dfit.ci:.2g} MHz/sqrt(hr)")
    summary_path = out / "summary.json"
    import json as _json

    summary_path.write_text(_json.dumps(summary, indent=2, sort_keys=True) + "\n")
    outputs.append(summary_path)

    manifest = new_manifest("analyze", config, None, __version__)
    finalize_manifest(manifest, outputs, out)
    write_manifest(out / "analyze_manifest.json", manifest)
    print(f"found {len(reports)} defects; report in {report_path}")
    if not fit.converged:
        print(f"warning: spectrum fit did not converge: {fit.message}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep-density


def _sweep_task(task):
    sim_kwargs, n_traj, child = task
    cfg = diffusion.SimConfig(**sim_kwargs)
    trajectories = diffusion.run_ensemble(cfg, n_traj, master_seed=child)
    return analysis.estimate_diffusivity(trajectories).D


def cmd_sweep_density(args) -> int:
    config = load_config(args.config, expected_command="sweep-density")
    check_keys(config, SWEEP_KEYS, "sweep-density")
    if args.seed is not None:
        config["rng_seed"] = args.seed
    config.setdefault("rng_seed", 0)
    seed = int(config["rng_seed"])

    densities = [float(d) for d in _require(config, "densities", "sweep-density")]
    if not densities:
        raise ConfigError("sweep-density: densities list is empty")
    for d in densities:
        if d <= 0:
            raise ConfigError(f"sweep-density: density must be > 0, got {d}")
        if d > MAX_DENSITY:
            raise ConfigError(
                f"sweep-density: density {d} exceeds {MAX_DENSITY:g} GHz^-1 um^-3; "
                "above this spacing the neglected fluctuator-fluctuator "
                "interactions start to matter, so the sweep refuses to run"
            )
    repetitions = int(config.get("repetitions", 300))
    n_traj = int(config.get("n_trajectories", 13))
    if repetitions < 1 or n_traj < 1:
        raise ConfigError("sweep-density: repetitions and n_trajectories must be >= 1")

    base_kwargs = {k: config[k] for k in SIM_KEYS if k in config and k != "tf_density"}
    if "cuboid_dims" in base_kwargs:
        base_kwargs["cuboid_dims"] = tuple(base_kwargs["cuboid_dims"])
    children = np.random.SeedSequence(seed).spawn(len(densities) * repetitions)

    tasks = []
    for di, density in enumerate(densities):
        kwargs = dict(base_kwargs, tf_density=density)
        for rep in range(repetitions):
            tasks.append((kwargs, n_traj, children[di * repetitions + rep]))

    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            ds = list(pool.map(_sweep_task, tasks, chunksize=8))
    else:
        ds = [_sweep_task(t) for t in tasks]

    rows = []
    for di, density in enumerate(densities):
        sample = ds[di * repetitions : (di + 1) * repetitions]
        rows.extend((density, rep, d) for rep, d in enumerate(sample))
        print(f"density {density:g}: median D = {np.median(sample):.4g} MHz/sqrt(hr)")

    out = _out_dir(args)
    sweep_path = out / "sweep.csv"
    tio.write_sweep_csv(sweep_path, rows)
    manifest = new_manifest("sweep-density", config, seed, __version__)
    finalize_manifest(manifest, [sweep_path], out)
    write_manifest(out / "sweep_density_manifest.json", manifest)
    print(f"wrote {sweep_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# constants


def _constants_rows():
    c = physics
    return [
        (
            "control_line_mode_spacing_MHz",
            spectra.half_wave_spacing(0.5842, 2.1) * 1e3,
            177.0,
        ),
        (
            "thermal_occupation_5.5GHz_15mK",
            c.boltzmann_factor(5.5, 0.015),
            1e-8,
        ),
        (
            "qubit_defect_coupling_x20um_MHz",
            c.qubit_defect_coupling(1.0, 20e-6, 5.5, 75e-15),
            0.010,
        ),
        (
            "qubit_defect_coupling_x1um_MHz",
            c.qubit_defect_coupling(1.0, 1e-6, 5.5, 75e-15),
            0.250,
        ),
        (
            "qubit_defect_coupling_x2nm_MHz",
            c.qubit_defect_coupling(1.0, 2e-9, 5.5, 75e-15),
            100.0,
        ),
        (
            "collinear_dipole_gzz_35nm_MHz",
            abs(
                c.dipole_dipole_gzz(
                    c.DipoleMoment(1.0), c.DipoleMoment(1.0), [0.0, 0.0, 35.0], 10.0
                ).g_zz_over_h
            ),
            30.0,
        ),
    ]


def cmd_constants(args) -> int:
    rows = _constants_rows()
    width = max(len(r[0]) for r in rows)
    print(f"{'quantity':<{width}}  {'computed':>12}  {'reference':>12}")
    for name, computed, reference in rows:
        print(f"{name:<{width}}  {computed:>12.4g}  {reference:>12.4g}")

    out = _out_dir(args)
    path = out / "constants.csv"
    with open(path, "w", newline="") as fh:
        fh.write("quantity,computed,reference\n")
        for name, computed, reference in rows:
            fh.write(f"{name},{tio.fmt(computed)},{tio.fmt(reference)}\n")
    manifest = new_manifest("constants", {}, None, __version__)
    finalize_manifest(manifest, [path], out)
    write_manifest(out / "constants_manifest.json", manifest)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tlsdiff",
        description="Synthesize and analyze defect-driven qubit T1 datasets.",
    )
    parser.add_argument("--version", action="version", version=f"tlsdiff {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument(
            "--config",
            required=config_required,
            help="JSON config file (or a previously written manifest)",
        )
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes")

    p = sub.add_parser("synth", help="synthesize a T1 dataset")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="simulate spectral diffusion trajectories")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="fit, extract and report defects from a dataset")
    p.add_argument("dataset", nargs="?", default=None, help="dataset CSV path")
    p.add_argument("--config", required=False, help="JSON config file or manifest")
    p.add_argument("--seed", type=int, default=None, help="unused; kept for symmetry")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument(
        "--mask",
        nargs="*",
        type=float,
        default=None,
        metavar="GHZ",
        help="frequencies of known spurious lines to exclude",
    )
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep-density", help="diffusivity versus fluctuator density")
    common(p)
    p.set_defaults(func=cmd_sweep_density)

    p = sub.add_parser("constants", help="print the closed-form sanity table")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_constants)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
