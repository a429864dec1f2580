"""CSV serialization for datasets, curves, trajectories and reports.

All numeric output uses 9 significant digits and "\\n" line endings so
that repeated runs with the same seed produce byte-identical files on one
platform (digest-based reproducibility). Parse errors raise
:class:`DataFormatError` naming the offending file, row and column.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from tlsdiff.analysis import DefectReport, T1Histogram
from tlsdiff.diffusion import Trajectory
from tlsdiff.spectra import DecayCurve, T1Dataset

REPORT_HEADER = (
    "qubit,defect,g_i_MHz,g_i_ci,Gamma_i_MHz,Gamma_i_ci,"
    "g_par_MHz,jump_rate_hr,E_TF_over_kBT"
)


class DataFormatError(ValueError):
    """A data file failed to parse or failed consistency checks."""


def fmt(x) -> str:
    """Format one float with 9 significant digits."""
    return f"{float(x):.9g}"


def _parse_float(token: str, path, line_no: int, column: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataFormatError(
            f"{path}:{line_no}: bad value {token!r} in column '{column}'"
        ) from None


def _read_rows(path, expected_header: str):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    lines = text.splitlines()
    if not lines:
        raise DataFormatError(f"{path}:1: empty file")
    if lines[0].strip() != expected_header:
        raise DataFormatError(
            f"{path}:1: expected header '{expected_header}', got '{lines[0].strip()}'"
        )
    n_cols = len(expected_header.split(","))
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_cols:
            raise DataFormatError(
                f"{path}:{i}: expected {n_cols} columns, got {len(parts)}"
            )
        rows.append((i, parts))
    return rows


# ---------------------------------------------------------------------------
# T1 datasets


def write_t1_dataset(path, dataset: T1Dataset, sidecar: dict | None = None) -> None:
    """Write a dataset as long-format CSV plus a JSON provenance sidecar.

    Rows are ordered time-major. The sidecar lands next to the CSV with a
    '.json' suffix and carries the dataset provenance (seed, model
    parameters, software version) plus any extra fields supplied.
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write("time_hr,freq_GHz,t1_us\n")
        for i, t in enumerate(dataset.time_stamps):
            t_str = fmt(t)
            for j, f in enumerate(dataset.frequencies):
                fh.write(f"{t_str},{fmt(f)},{fmt(dataset.t1_grid[i, j])}\n")
    meta = dict(dataset.provenance)
    if sidecar:
        meta.update(sidecar)
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_t1_dataset(path) -> T1Dataset:
    """Read a long-format dataset CSV back into a T1Dataset."""
    rows = _read_rows(path, "time_hr,freq_GHz,t1_us")
    if not rows:
        raise DataFormatError(f"{path}:2: dataset contains no rows")
    times: list[float] = []
    freqs: list[float] = []
    t_index: dict[float, int] = {}
    f_index: dict[float, int] = {}
    parsed = []
    for line_no, parts in rows:
        t = _parse_float(parts[0], path, line_no, "time_hr")
        f = _parse_float(parts[1], path, line_no, "freq_GHz")
        t1 = _parse_float(parts[2], path, line_no, "t1_us")
        if t1 <= 0:
            raise DataFormatError(f"{path}:{line_no}: t1_us must be > 0, got {t1}")
        if t not in t_index:
            t_index[t] = len(times)
            times.append(t)
        if f not in f_index:
            f_index[f] = len(freqs)
            freqs.append(f)
        parsed.append((t_index[t], f_index[f], t1))
    grid = np.full((len(times), len(freqs)), np.nan)
    for i, j, t1 in parsed:
        grid[i, j] = t1
    if np.any(np.isnan(grid)):
        missing = int(np.isnan(grid).sum())
        raise DataFormatError(f"{path}: grid is not complete; {missing} cells missing")
    sidecar_path = Path(path).with_suffix(".json")
    provenance = {}
    if sidecar_path.exists():
        provenance = json.loads(sidecar_path.read_text())
    return T1Dataset(
        time_stamps=np.array(times),
        frequencies=np.array(freqs),
        t1_grid=grid,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# Decay curves


def write_decay_curve(path, curve: DecayCurve) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("delay_us,p1,shots\n")
        for d, p in zip(curve.delays, curve.excited_population):
            fh.write(f"{fmt(d)},{fmt(p)},{curve.shots_per_delay}\n")


def read_decay_curve(path) -> DecayCurve:
    rows = _read_rows(path, "delay_us,p1,shots")
    if not rows:
        raise DataFormatError(f"{path}:2: decay curve contains no rows")
    delays, pops, shots = [], [], []
    for line_no, parts in rows:
        delays.append(_parse_float(parts[0], path, line_no, "delay_us"))
        pops.append(_parse_float(parts[1], path, line_no, "p1"))
        shots.append(int(_parse_float(parts[2], path, line_no, "shots")))
    return DecayCurve(
        delays=np.array(delays),
        excited_population=np.array(pops),
        shots_per_delay=shots[0],
    )


# ---------------------------------------------------------------------------
# Trajectories


def write_trajectory(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("time_hr,delta_E_MHz\n")
        for t, d in zip(traj.times, traj.delta_E_over_h):
            fh.write(f"{fmt(t)},{fmt(d)}\n")


def read_trajectory(path) -> Trajectory:
    rows = _read_rows(path, "time_hr,delta_E_MHz")
    if not rows:
        raise DataFormatError(f"{path}:2: trajectory contains no rows")
    times, deltas = [], []
    for line_no, parts in rows:
        times.append(_parse_float(parts[0], path, line_no, "time_hr"))
        deltas.append(_parse_float(parts[1], path, line_no, "delta_E_MHz"))
    return Trajectory(times=np.array(times), delta_E_over_h=np.array(deltas))


def write_trajectories_long(path, trajectories, ids=None) -> None:
    """Write several trajectories to one long-format CSV."""
    if ids is None:
        ids = [f"d{i}" for i in range(len(trajectories))]
    with open(path, "w", newline="") as fh:
        fh.write("traj_id,time_hr,delta_E_MHz\n")
        for tid, traj in zip(ids, trajectories):
            for t, d in zip(traj.times, traj.delta_E_over_h):
                fh.write(f"{tid},{fmt(t)},{fmt(d)}\n")


def read_trajectories_long(path) -> dict[str, Trajectory]:
    """Read a long-format trajectory CSV, keyed by trajectory id."""
    rows = _read_rows(path, "traj_id,time_hr,delta_E_MHz")
    if not rows:
        raise DataFormatError(f"{path}:2: no trajectories found")
    grouped: dict[str, tuple[list, list]] = {}
    for line_no, parts in rows:
        tid = parts[0].strip()
        times, deltas = grouped.setdefault(tid, ([], []))
        times.append(_parse_float(parts[1], path, line_no, "time_hr"))
        deltas.append(_parse_float(parts[2], path, line_no, "delta_E_MHz"))
    return {
        tid: Trajectory(times=np.array(ts), delta_E_over_h=np.array(ds))
        for tid, (ts, ds) in grouped.items()
    }


# ---------------------------------------------------------------------------
# Reports, sweeps, histograms


def _opt(value) -> str:
    return "" if value is None else fmt(value)


def write_defect_reports(path, reports: list[DefectReport]) -> None:
    """Write per-defect estimates to CSV; absent estimates become empty cells."""
    with open(path, "w", newline="") as fh:
        fh.write(REPORT_HEADER + "\n")
        for r in reports:
            fh.write(
                ",".join(
                    [
                        r.qubit,
                        r.defect,
                        fmt(r.g_i_over_h_MHz),
                        fmt(r.g_i_ci_MHz),
                        fmt(r.Gamma_i_MHz),
                        fmt(r.Gamma_i_ci_MHz),
                        _opt(r.g_parallel_over_h_MHz),
                        _opt(r.mean_jump_rate_per_hr),
                        _opt(r.e_tf_over_kbt),
                    ]
                )
                + "\n"
            )


def write_sweep_csv(path, rows) -> None:
    """Write (density, rep, D) rows to CSV."""
    with open(path, "w", newline="") as fh:
        fh.write("density,rep,D_MHz_per_sqrt_hr\n")
        for density, rep, d in rows:
            fh.write(f"{fmt(density)},{int(rep)},{fmt(d)}\n")


def read_sweep_csv(path):
    rows = _read_rows(path, "density,rep,D_MHz_per_sqrt_hr")
    out = []
    for line_no, parts in rows:
        out.append(
            (
                _parse_float(parts[0], path, line_no, "density"),
                int(_parse_float(parts[1], path, line_no, "rep")),
                _parse_float(parts[2], path, line_no, "D_MHz_per_sqrt_hr"),
            )
        )
    return out


def write_histogram_csv(path, hist: T1Histogram) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# bimodal={hist.bimodal} separation={fmt(hist.separation)}\n")
        fh.write("bin_left_us,bin_right_us,count\n")
        for k in range(hist.counts.size):
            fh.write(
                f"{fmt(hist.bin_edges[k])},{fmt(hist.bin_edges[k + 1])},{int(hist.counts[k])}\n"
            )
