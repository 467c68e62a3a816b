"""Experiment drivers: finite-size runs, the mean-field reference solution,
and self-convergence studies against the finest-level fixed point.

No closed-form limiting solution exists for the built-in families, so studies
are Cauchy-style: distances to the finest discretization's fixed point must
shrink as the finite systems grow.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ExperimentConfig
from .digraph import DigraphMeasure, sup_fiber_bl
from .discretize import discretize_nu, weights_from_dgm
from .finite_dynamics import (
    CoupledState,
    LatticeState,
    empirical_path,
    integrate_coupled,
    integrate_lattice,
)
from .meanfield import (
    DensityField,
    MeasurePath,
    bl_distance,
    solve_vlasov_fixed_point,
    solve_vlasov_pde,
)
from .model import ModelSpec
from .presets import Preset, get_preset, initial_phases


class NumericalFlag(Exception):
    """A run completed but a numerical guarantee failed (exit code 1)."""


@dataclass(frozen=True)
class ReportRow:
    level: str
    t: float
    distance: float
    wall: float


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    non_monotone: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    reference_label: str = ""
    reference_wall: float = 0.0

    def add(self, level, t, distance, wall):
        if distance < 0:
            raise ValueError("distances must be nonnegative")
        self.rows.append(ReportRow(str(level), float(t), float(distance), float(wall)))

    def check_monotone(self):
        """Flag report times whose fiber-sup distance column is not strictly decreasing."""
        by_t: dict = {}
        for row in self.rows:
            if row.level.endswith(":aggregate"):
                continue
            by_t.setdefault(row.t, []).append(row.distance)
        self.non_monotone = [
            t for t, col in sorted(by_t.items())
            if any(b >= a for a, b in zip(col, col[1:]))
        ]
        return self.non_monotone


def build_model(preset: Preset, cfg: ExperimentConfig) -> ModelSpec:
    return preset.model(cfg.epsilon, cfg.omega_spec())


def finite_run(preset: Preset, model: ModelSpec, N: int, T: float, dt: float,
               mode: str = "quantile", seed: int = 0,
               backend: str | None = None):
    """Coupled run of the size-N preset; returns the trajectory and its
    one-atom-per-cell empirical measure path."""
    preset.check_size(N)
    W = preset.weight_matrix(N)
    phases0 = initial_phases(N, preset.nu0_profile(), mode, seed)
    part = preset.partition(N)
    centers = part.representatives
    traj = integrate_coupled(
        CoupledState(phases0, W), model,
        lambda t: model.omega.eval(t, centers), T, dt, backend=backend,
    )
    path = MeasurePath(part, traj.times, traj.phases[:, :, None], np.ones(N))
    return traj, path


def lattice_run(preset: Preset, model: ModelSpec, m: int, n: int, T: float,
                dt: float, backend: str | None = None):
    """Cell-structured run of the (m, n) discretization; returns the
    trajectory and its empirical measure path."""
    part = preset.partition(m)
    nu0 = discretize_nu(preset.nu0_profile(), part, n)
    eta0 = preset.limit_dgm(part)
    wts = weights_from_dgm(eta0, part)
    pos0 = np.stack([f.atom_positions for f in nu0.fibers])
    state = LatticeState(part, nu0.masses(), pos0, wts)
    traj = integrate_lattice(state, model,
                             lambda t: model.omega.eval(t, part.representatives),
                             T, dt, backend=backend)
    return traj, empirical_path(traj)


def mfl_reference(preset: Preset, model: ModelSpec, m: int, n: int, T: float,
                  dt: float, tol: float, max_iter: int, M_eval: int,
                  backend: str | None = None):
    """Fixed point on the (m, n) discretization of the preset's initial data."""
    part = preset.partition(m)
    nu0 = discretize_nu(preset.nu0_profile(), part, n)
    eta0 = preset.limit_dgm(part)
    result = solve_vlasov_fixed_point(nu0, eta0, model, T, dt, tol=tol,
                                      max_iter=max_iter, M_eval=M_eval,
                                      backend=backend)
    return result, nu0, eta0


def _distance_rows(report: ConvergenceReport, level: str, path: MeasurePath,
                   ref: MeasurePath, times, M_eval: int, wall: float,
                   aggregate: bool):
    for t in times:
        ka = path.index_of_time(t)
        kb = ref.index_of_time(t)
        d = sup_fiber_bl(path.partition, path.node_fibers(ka),
                         ref.partition, ref.node_fibers(kb), M_eval)
        report.add(level, t, d, wall)
        if aggregate:
            da = bl_distance(path.aggregate_fiber(ka), ref.aggregate_fiber(kb), M_eval)
            report.add(f"{level}:aggregate", t, da, wall)


def convergence_study(cfg: ExperimentConfig, aggregate: bool = False,
                      backend: str | None = None) -> ConvergenceReport:
    """Distance table of increasingly fine runs against the fixed-point reference.

    The default level kind is "lattice": level N is the cell-structured run
    with m = n = sqrt(N), the family whose empirical paths converge to the
    reference. Kind "coupled" runs the plain N-oscillator preset instead.
    """
    levels = cfg["levels.N"]
    if len(levels) < 3:
        raise ConfigError("a convergence study needs at least 3 levels")
    report, _ = _study(cfg, levels, aggregate=aggregate, backend=backend,
                       kind=cfg["levels.kind"])
    return report


def _level_path(preset, model, kind, N, T, dt, cfg, backend):
    if kind == "coupled":
        _, path = finite_run(preset, model, N, T, dt, cfg["init.mode"],
                             cfg["init.seed"], backend=backend)
        return path
    root = int(round(np.sqrt(N)))
    if root * root != N:
        raise ConfigError(
            f"lattice levels need perfect-square sizes (m = n = sqrt(N)); got {N}"
        )
    _, path = lattice_run(preset, model, root, root, T, dt, backend=backend)
    return path


def _study(cfg: ExperimentConfig, levels, aggregate: bool,
           backend: str | None, kind: str = "coupled"):
    cfg.validate_dynamics()
    preset = get_preset(cfg.example)
    model = build_model(preset, cfg)
    T = cfg.horizon()
    dt = float(cfg["solver.dt"])
    times = cfg.report_times(T, dt)
    report = ConvergenceReport()

    t0 = time.perf_counter()
    ref, nu0, eta0 = mfl_reference(preset, model, cfg["mfl.m"], cfg["mfl.n"],
                                   T, dt, float(cfg["solver.tol"]),
                                   cfg["solver.max_iter"], cfg["solver.M_eval"],
                                   backend=backend)
    report.residuals = list(ref.residuals)
    report.reference_label = f"m={cfg['mfl.m']},n={cfg['mfl.n']}"
    report.reference_wall = time.perf_counter() - t0
    if not ref.converged:
        raise NumericalFlag(
            "reference fixed point did not converge; residuals: "
            + ", ".join(f"{r:.3e}" for r in ref.residuals)
        )

    for N in levels:
        t0 = time.perf_counter()
        path = _level_path(preset, model, kind, N, T, dt, cfg, backend)
        wall = time.perf_counter() - t0
        _distance_rows(report, str(N), path, ref.path, times,
                       cfg["solver.M_eval"], wall, aggregate)
    report.check_monotone()
    return report, (ref, nu0, eta0, preset, model)


def _admissible_size(preset: Preset, N: int) -> int:
    """Largest admissible system size at most max(N, 3) for the preset."""
    if not preset.restricted_sizes:
        return max(N, 3)
    k = 1
    while 2 ** (k + 2) - 1 <= max(N, 3):
        k += 1
    return 2 ** (k + 1) - 1


def run_example(name: str, cfg: ExperimentConfig,
                backend: str | None = None):
    """Preset run: finite systems, fixed-point reference, distance report.

    Returns (report, artifacts) where artifacts maps logical names to
    in-memory objects for the CLI to serialize.
    """
    values = dict(cfg.values)
    values["example"] = name
    cfg = ExperimentConfig(values)
    T = cfg.horizon()
    dt = float(cfg["solver.dt"])

    report, (ref, nu0, eta0, preset, model) = _study(
        cfg, cfg["levels.N"], aggregate=True, backend=backend,
        kind=cfg["levels.kind"]
    )
    N_traj = _admissible_size(preset, max(cfg["levels.N"]))
    traj, _ = finite_run(preset, model, N_traj, T, dt,
                         cfg["init.mode"], cfg["init.seed"], backend=backend)
    artifacts = {
        "report": report,
        "mfl": ref,
        "nu0": nu0,
        "eta0": eta0,
        "trajectory": traj,
        "model": model,
    }
    return report, artifacts


def cfl_safe_dt(model: ModelSpec, eta0: DigraphMeasure, nu_mass_bound: float,
                phi_cells: int, T: float) -> float:
    """Step size below the CFL limit from the a priori velocity bound.

    |V| <= sup|omega| + sup|g| (sup_x |eta_t^x| ) with
    sup_x |eta_t^x| <= ||eta_0|| + ||nu|| ||h||.
    """
    vbound = model.omega.sup_norm(T) + model.g.sup_norm_bound() * (
        eta0.norm() + nu_mass_bound * model.h.sup_norm_bound()
    )
    dphi = 1.0 / phi_cells
    if vbound <= 0:
        return T
    steps = max(1, int(np.ceil(T * vbound / (0.9 * dphi))))
    return T / steps


def pde_run(cfg: ExperimentConfig, backend: str | None = None) -> DensityField:
    """Density-transport run of the configured example (constant-h presets)."""
    cfg.validate_dynamics()
    preset = get_preset(cfg.example)
    model = build_model(preset, cfg)
    T = cfg.horizon()
    m = cfg["mfl.m"]
    part = preset.partition(m)
    eta0 = preset.limit_dgm(part)
    Mphi = cfg["pde.phi_cells"]
    amp = float(cfg["pde.init_amplitude"])
    if not -1.0 <= amp <= 1.0:
        raise ConfigError("pde.init_amplitude must lie in [-1, 1]")
    centers = (np.arange(Mphi) + 0.5) / Mphi
    rho0 = np.tile(1.0 + amp * np.sin(2 * np.pi * centers), (m, 1))
    dt = cfg["pde.dt"]
    if dt is None:
        dt = cfl_safe_dt(model, eta0, 1.0, Mphi, T)
    return solve_vlasov_pde(rho0, eta0, model, T, float(dt))
