"""Command-line interface.

Subcommands: ``simulate`` (finite system), ``mfl`` (fixed point), ``pde``
(density transport), ``converge`` (self-convergence study), ``example``
(preset end-to-end run). ``--set key=value`` overrides config keys; the
output directory resolves flag > COEVKM_OUTDIR > config.

Exit codes: 0 all checks passed, 1 a numerical flag was raised, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io
from .config import ConfigError, ExperimentConfig, apply_overrides, emit_config, parse_config
from .experiments import (
    NumericalFlag,
    build_model,
    convergence_study,
    finite_run,
    mfl_reference,
    pde_run,
    run_example,
)
from .presets import get_preset


def _load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig({})
    cfg = apply_overrides(cfg, args.set or [])
    if getattr(args, "example", None):
        values = dict(cfg.values)
        values["example"] = args.example
        cfg = ExperimentConfig(values)
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    cfg.validate_dynamics()
    out = io.output_dir(cfg["output.dir"], args.out)
    preset = get_preset(cfg.example)
    model = build_model(preset, cfg)
    T, dt = cfg.horizon(), float(cfg["solver.dt"])
    for N in cfg["levels.N"]:
        traj, _ = finite_run(preset, model, N, T, dt, cfg["init.mode"],
                             cfg["init.seed"])
        io.write_trajectory_csv(traj, out / f"trajectory_N{N}.csv")
        print(f"simulate: N={N} -> {out / f'trajectory_N{N}.csv'}")
    return 0


def _cmd_mfl(args) -> int:
    cfg = _load_config(args)
    cfg.validate_dynamics()
    out = io.output_dir(cfg["output.dir"], args.out)
    preset = get_preset(cfg.example)
    model = build_model(preset, cfg)
    result, _, _ = mfl_reference(
        preset, model, cfg["mfl.m"], cfg["mfl.n"], cfg.horizon(),
        float(cfg["solver.dt"]), float(cfg["solver.tol"]),
        cfg["solver.max_iter"], cfg["solver.M_eval"],
    )
    io.write_path_csv(result.path, out / "mfl_path.csv")
    io.write_residual_log(result.residuals, out / "mfl_residuals.csv")
    status = "converged" if result.converged else "NOT converged"
    print(f"mfl: {status} after {result.iterations} sweeps, "
          f"residual {result.residuals[-1]:.3e}")
    if not result.converged:
        raise NumericalFlag("fixed-point iteration did not reach tolerance")
    return 0


def _cmd_pde(args) -> int:
    cfg = _load_config(args)
    out = io.output_dir(cfg["output.dir"], args.out)
    field = pde_run(cfg)
    io.write_density_csv(field, out / "density_final.csv")
    masses0 = field.masses(0)
    massesT = field.masses(-1)
    drift = float(np.abs(massesT - masses0).max())
    print(f"pde: final density -> {out / 'density_final.csv'}; "
          f"max fiber-mass drift {drift:.3e}")
    if drift > 1e-10:
        raise NumericalFlag(f"fiber mass drifted by {drift:.3e}")
    return 0


def _cmd_converge(args) -> int:
    cfg = _load_config(args)
    out = io.output_dir(cfg["output.dir"], args.out)
    report = convergence_study(cfg)
    io.write_report_csv(report, out / "convergence.csv")
    io.write_residual_log(report.residuals, out / "reference_residuals.csv")
    for row in report.rows:
        print(f"converge: level {row.level:>16s} t={row.t:.4f} d_bl={row.distance:.6e}")
    if report.non_monotone:
        raise NumericalFlag(
            f"distance column not strictly decreasing at t={report.non_monotone}"
        )
    return 0


def _cmd_example(args) -> int:
    cfg = _load_config(args)
    out = io.output_dir(cfg["output.dir"], args.out)
    report, artifacts = run_example(args.example, cfg)
    io.write_report_csv(report, out / f"{args.example}_report.csv")
    io.write_residual_log(artifacts["mfl"].residuals, out / f"{args.example}_residuals.csv")
    io.write_trajectory_csv(artifacts["trajectory"], out / f"{args.example}_trajectory.csv")
    io.write_path_csv(artifacts["mfl"].path, out / f"{args.example}_mfl_path.csv")
    io.write_dgm_csv(artifacts["eta0"], out / f"{args.example}_eta0")
    for row in report.rows:
        print(f"example {args.example}: {row.level:>16s} t={row.t:.4f} "
              f"d_bl={row.distance:.6e}")
    if report.non_monotone:
        print(f"note: distances not strictly decreasing at t={report.non_monotone}")
    return 0


def _cmd_config(args) -> int:
    cfg = _load_config(args)
    sys.stdout.write(emit_config(cfg))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coevkm",
        description="Co-evolutionary oscillator networks and their mean-field limit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="YAML config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (dotted name)")
        p.add_argument("--out", help="output directory (overrides COEVKM_OUTDIR)")

    common(sub.add_parser("simulate", help="integrate the finite coupled system"))
    common(sub.add_parser("mfl", help="solve the mean-field fixed point"))
    common(sub.add_parser("pde", help="run the density-transport solver"))
    common(sub.add_parser("converge", help="self-convergence study"))
    p_ex = sub.add_parser("example", help="end-to-end preset run")
    p_ex.add_argument("example", choices=["ring", "tree", "dense"])
    common(p_ex)
    p_cfg = sub.add_parser("config", help="print the normalized config")
    common(p_cfg)
    return parser


_DISPATCH = {
    "simulate": _cmd_simulate,
    "mfl": _cmd_mfl,
    "pde": _cmd_pde,
    "converge": _cmd_converge,
    "example": _cmd_example,
    "config": _cmd_config,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _DISPATCH[args.command](args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFlag as exc:
        print(f"numerical flag: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
