"""CSV serialization of measures, trajectories, paths and reports.

All numeric output uses a fixed decimal format, so identical runs produce
byte-identical files. Wall-clock timings are written to a separate file and
are the only non-deterministic artifact.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .digraph import DigraphMeasure
from .experiments import ConvergenceReport
from .finite_dynamics import Trajectory
from .meanfield import DensityField, MeasurePath
from .measure_kit import HybridMeasure

FMT = "%.12e"


def _fmt(x) -> str:
    return FMT % float(x)


def output_dir(cfg_dir: str, override: str | None = None) -> Path:
    """Resolve the output directory: flag > COEVKM_OUTDIR > config value."""
    path = Path(override or os.environ.get("COEVKM_OUTDIR") or cfg_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_measure_csv(mu: HybridMeasure, path) -> None:
    """Rows (kind, position-or-cell, weight): atoms then density cells."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "position_or_cell", "weight"])
        for p, a in zip(mu.atom_positions, mu.atom_weights):
            w.writerow(["atom", _fmt(p), _fmt(a)])
        for k, d in enumerate(mu.density):
            w.writerow(["density", str(k), _fmt(d)])


def write_dgm_csv(eta: DigraphMeasure, directory, prefix: str = "fiber") -> None:
    """One CSV per fiber plus a partition manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "partition.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", "lower_edge", "upper_edge", "representative"])
        part = eta.partition
        for i in range(part.m):
            w.writerow([str(i), _fmt(part.edges[i]), _fmt(part.edges[i + 1]),
                        _fmt(part.representatives[i])])
    for i, fiber in enumerate(eta.fibers):
        write_measure_csv(fiber, directory / f"{prefix}_{i:04d}.csv")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """time, per-node phases, optional weight summary columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        n = traj.phases.shape[1]
        header = ["time"] + [f"phi_{i}" for i in range(n)]
        if traj.weight_stats is not None:
            header += ["w_min", "w_max", "w_mean"]
        w.writerow(header)
        for k, t in enumerate(traj.times):
            row = [_fmt(t)] + [_fmt(p) for p in traj.phases[k]]
            if traj.weight_stats is not None:
                row += [_fmt(v) for v in traj.weight_stats[k]]
            w.writerow(row)


def write_path_csv(path_obj: MeasurePath, path) -> None:
    """time, cell, atom, position, weight."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "cell", "atom", "position", "weight"])
        n = path_obj.n
        for k, t in enumerate(path_obj.times):
            for i in range(path_obj.partition.m):
                wt = path_obj.masses[i] / n
                for j in range(n):
                    w.writerow([_fmt(t), str(i), str(j),
                                _fmt(path_obj.positions[k, i, j]), _fmt(wt)])


def read_path_csv(path, partition) -> MeasurePath:
    """Rebuild a measure path written by write_path_csv (audit route:
    report distances are reproducible from the stored artifacts)."""
    times, cells, atoms, pos, wts = [], [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            times.append(float(row[0]))
            cells.append(int(row[1]))
            atoms.append(int(row[2]))
            pos.append(float(row[3]))
            wts.append(float(row[4]))
    t_nodes = np.unique(times)
    m = max(cells) + 1
    n = max(atoms) + 1
    positions = np.empty((t_nodes.size, m, n))
    masses = np.zeros(m)
    k_of = {t: k for k, t in enumerate(t_nodes)}
    for t, i, j, p, wt in zip(times, cells, atoms, pos, wts):
        positions[k_of[t], i, j] = p
        masses[i] = wt * n
    return MeasurePath(partition, t_nodes, positions, masses)


def write_density_csv(field: DensityField, path, node: int = -1) -> None:
    """cell, phi_cell, density at one time node (default: final)."""
    node = range(field.times.size)[node]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time", "cell", "phi_cell", "density"])
        t = field.times[node]
        for i in range(field.rho.shape[1]):
            for k in range(field.phi_cells):
                w.writerow([_fmt(t), str(i), str(k), _fmt(field.rho[node, i, k])])


def write_residual_log(residuals, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual"])
        for i, r in enumerate(residuals, start=1):
            w.writerow([str(i), _fmt(r)])


def write_report_csv(report: ConvergenceReport, path) -> None:
    """Deterministic distance table; timings go to <stem>_timings.csv."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "t", "d_bl"])
        for row in report.rows:
            w.writerow([row.level, _fmt(row.t), _fmt(row.distance)])
    timings = path.with_name(path.stem + "_timings" + path.suffix)
    with open(timings, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "t", "wall_seconds"])
        w.writerow([f"ref({report.reference_label})", "", _fmt(report.reference_wall)])
        for row in report.rows:
            w.writerow([row.level, _fmt(row.t), _fmt(row.wall)])
