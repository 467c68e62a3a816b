"""Experiment configuration: YAML with flat sections, validated against a schema.

Unknown keys are rejected by their full dotted name; parse errors carry line
numbers. ``emit_config`` writes a canonical normalized form, so
parse -> emit -> parse is the identity on normalized configs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .model import OmegaSpec, positivity_horizon
from .presets import get_preset, reference_time


class ConfigError(Exception):
    pass


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _num_list(v):
    return isinstance(v, list) and all(_is_num(x) for x in v)


# dotted key -> (validator, default)
SCHEMA = {
    "example": (lambda v: v in ("ring", "tree", "dense", "custom"), "ring"),
    "levels.N": (_num_list, [16, 64, 256]),
    "levels.kind": (lambda v: v in ("lattice", "coupled"), "lattice"),
    "mfl.m": (_is_num, 16),
    "mfl.n": (_is_num, 16),
    "model.epsilon": (_is_num, 1.0),
    "model.omega": (lambda v: v is None or isinstance(v, dict), None),
    "time.T": (lambda v: v is None or _is_num(v), None),
    "time.star_fraction": (_is_num, 1.0),
    "time.report_fractions": (_num_list, [0.5, 1.0]),
    "solver.dt": (_is_num, 1e-3),
    "solver.tol": (_is_num, 1e-4),
    "solver.max_iter": (_is_num, 25),
    "solver.M_eval": (_is_num, 2048),
    "init.mode": (lambda v: v in ("quantile", "random"), "quantile"),
    "init.seed": (_is_num, 0),
    "pde.phi_cells": (_is_num, 128),
    "pde.dt": (lambda v: v is None or _is_num(v), None),
    "pde.init_amplitude": (_is_num, 0.5),
    "custom.eta_density": (_is_num, 1.0),
    "output.dir": (lambda v: isinstance(v, str), "out"),
}

_INT_KEYS = {"mfl.m", "mfl.n", "solver.max_iter", "solver.M_eval", "init.seed",
             "pde.phi_cells"}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {k: d for k, (_, d) in SCHEMA.items()}
        for k, v in self.values.items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown key {k!r}")
            check, _ = SCHEMA[k]
            if not check(v):
                raise ConfigError(f"invalid value for {k!r}: {v!r}")
            merged[k] = v
        for k in _INT_KEYS:
            merged[k] = int(merged[k])
        merged["levels.N"] = [int(x) for x in merged["levels.N"]]
        self.values = merged

    def __getitem__(self, key):
        return self.values[key]

    # -- derived quantities --------------------------------------------------
    @property
    def example(self) -> str:
        return self.values["example"]

    @property
    def epsilon(self) -> float:
        return float(self.values["model.epsilon"])

    def horizon(self) -> float:
        """Absolute time horizon: explicit T, or a fraction of the reference time."""
        if self.values["time.T"] is not None:
            return float(self.values["time.T"])
        return float(self.values["time.star_fraction"]) * reference_time(self.epsilon)

    def report_times(self, T: float, dt: float):
        """Report times snapped to integrator nodes."""
        out = []
        for frac in self.values["time.report_fractions"]:
            k = round(frac * T / dt)
            out.append(k * dt)
        return out

    def omega_spec(self) -> OmegaSpec | None:
        raw = self.values["model.omega"]
        if raw is None:
            return None
        kind = raw.get("kind")
        if kind == "constant":
            return OmegaSpec.constant(raw["value"])
        if kind == "affine":
            return OmegaSpec.affine(raw["a"], raw["b"])
        if kind == "cosine":
            return OmegaSpec.cosine(raw["a"], raw["b"])
        raise ConfigError(f"unknown omega kind {raw!r}")

    def validate_dynamics(self) -> None:
        """Horizon/step compatibility checks shared by all commands.

        The horizon snaps to the nearest whole step; it must cover at least
        one step.
        """
        T = self.horizon()
        dt = float(self.values["solver.dt"])
        if round(T / dt) < 1:
            raise ConfigError(f"horizon T={T} is below one step of solver.dt={dt}")
        if self.example in ("ring", "tree", "dense"):
            preset = get_preset(self.example)
            hplus = preset.h.positive_part_sup()
            if hplus > 0:
                hor = positivity_horizon(preset.beta, 1.0, preset.h, self.epsilon)
                if T > hor + 1e-12:
                    raise ConfigError(
                        f"T={T} exceeds the positivity horizon {hor} of example "
                        f"{self.example!r}"
                    )


def _flatten(tree, prefix=""):
    out = {}
    for key, val in tree.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict) and name not in SCHEMA:
            out.update(_flatten(val, prefix=f"{name}."))
        else:
            out[name] = val
    return out


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"malformed config{where}: {getattr(exc, 'problem', exc)}")
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of sections")
    return ExperimentConfig(_flatten(raw))


def parse_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def emit_config(cfg: ExperimentConfig) -> str:
    """Canonical normalized YAML (sections and keys sorted)."""
    tree: dict = {}
    for key in sorted(cfg.values):
        val = cfg.values[key]
        if "." in key:
            section, leaf = key.split(".", 1)
            tree.setdefault(section, {})[leaf] = val
        else:
            tree[key] = val
    return yaml.safe_dump(tree, sort_keys=True, default_flow_style=False)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    """Apply 'dotted.key=value' strings (values parsed as YAML scalars)."""
    vals = dict(cfg.values)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        vals[key] = yaml.safe_load(raw)
    return ExperimentConfig(vals)
