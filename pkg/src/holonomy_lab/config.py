"""Experiment configuration: YAML in, validated dataclass out."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .geometry import ModelSpace, default_perturbation, random_perturbation

SEED_ENV = "HOLONOMY_LAB_SEED"
SEED_MAX = 2 ** 64 - 1

EXPERIMENTS = (
    "bracket-table",
    "hyperbolic-holonomy",
    "uniform-bound",
    "curvature-morphism",
    "structural-identities",
    "equivariance",
    "rank-survey",
    "holonomy-group",
    "flat-control",
    "line-bundle",
    "pinching",
    "fixed-subspaces",
    "containment-audit",
)

BUNDLES = ("Frame", "E_u", "E_s")
SPACE_KINDS = ("hyperbolic", "perturbed")
TOP_KEYS = {"experiment", "n", "space", "bundle", "seed", "tolerances", "T_max", "num_loops", "loop_scale",
            "h", "params", "output"}


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


@dataclass
class SpaceSpec:
    kind: str = "hyperbolic"
    amplitude: float = 0.003
    r0: float = 1.5
    modes: int | None = None  # None: the fixed three-mode perturbation
    perturbation_seed: int = 0

    def build(self, n: int) -> ModelSpace:
        if self.kind == "hyperbolic":
            return ModelSpace.hyperbolic(n)
        if self.modes is None:
            pert = default_perturbation(n, self.amplitude, self.r0)
        else:
            pert = random_perturbation(n, self.modes, self.amplitude, self.r0, self.perturbation_seed)
        return ModelSpace.perturbed(n, pert)


@dataclass
class ExperimentConfig:
    experiment: str
    n: int = 3
    space: SpaceSpec = field(default_factory=SpaceSpec)
    bundle: str = "Frame"
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    T_max: float = 40.0
    num_loops: int = 12
    loop_scale: float = 0.3
    h: float = 1e-2
    params: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def param(self, name: str, default: Any) -> Any:
        return self.params.get(name, default)

    def to_dict(self) -> dict:
        return asdict(self)


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _number(d: dict, key: str, kind=float, positive: bool = True):
    if key not in d:
        return None
    v = d[key]
    ok = isinstance(v, (int, float)) and not isinstance(v, bool)
    if kind is int:
        ok = isinstance(v, int) and not isinstance(v, bool)
    _require(ok, f"'{key}' must be a {'integer' if kind is int else 'number'}, got {v!r}")
    if positive:
        _require(v > 0, f"'{key}' must be positive")
    return kind(v)


def parse_config(raw: Any, env: dict | None = None) -> ExperimentConfig:
    """Validate a parsed YAML mapping; ``HOLONOMY_LAB_SEED`` in ``env`` overrides the seed."""
    env = os.environ if env is None else env
    _require(isinstance(raw, dict), "config must be a mapping")
    unknown = set(raw) - TOP_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")
    _require("experiment" in raw, "missing 'experiment'")
    exp = raw["experiment"]
    _require(exp in EXPERIMENTS, f"unknown experiment {exp!r}; choose one of {', '.join(EXPERIMENTS)}")
    cfg = ExperimentConfig(experiment=exp)
    n = _number(raw, "n", int)
    if n is not None:
        _require(n >= 3, "'n' must be at least 3")
        cfg.n = n
    sp = raw.get("space", {})
    if isinstance(sp, str):
        sp = {"kind": sp}
    _require(isinstance(sp, dict), "'space' must be a mapping or a kind name")
    bad = set(sp) - {"kind", "amplitude", "r0", "modes", "perturbation_seed"}
    _require(not bad, f"unknown space keys: {sorted(bad)}")
    kind = sp.get("kind", "hyperbolic")
    _require(kind in SPACE_KINDS, f"space kind must be one of {SPACE_KINDS}")
    spec = SpaceSpec(kind=kind)
    for key in ("amplitude", "r0"):
        v = _number(sp, key)
        if v is not None:
            setattr(spec, key, v)
    if sp.get("modes") is not None:
        spec.modes = _number(sp, "modes", int)
    if "perturbation_seed" in sp:
        spec.perturbation_seed = _number(sp, "perturbation_seed", int, positive=False)
    if kind == "perturbed" and spec.modes is None:
        _require(cfg.n <= 8, "the fixed perturbation is defined for n <= 8; set space.modes")
    cfg.space = spec
    if "bundle" in raw:
        _require(raw["bundle"] in BUNDLES, f"bundle must be one of {BUNDLES}")
        cfg.bundle = raw["bundle"]
    if "seed" in raw:
        s = _number(raw, "seed", int, positive=False)
        _require(0 <= s <= SEED_MAX, "seed must be a 64-bit unsigned integer")
        cfg.seed = s
    if env.get(SEED_ENV) not in (None, ""):
        try:
            s = int(env[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
        _require(0 <= s <= SEED_MAX, f"{SEED_ENV} must be a 64-bit unsigned integer")
        cfg.seed = s
    tols = raw.get("tolerances", {}) or {}
    _require(isinstance(tols, dict), "'tolerances' must be a mapping")
    for k in tols:
        _number(tols, k)
    cfg.tolerances = {k: float(v) for k, v in tols.items()}
    for key, kind_ in (("T_max", float), ("loop_scale", float), ("h", float)):
        v = _number(raw, key, kind_)
        if v is not None:
            setattr(cfg, key, v)
    v = _number(raw, "num_loops", int)
    if v is not None:
        cfg.num_loops = v
    params = raw.get("params", {}) or {}
    _require(isinstance(params, dict), "'params' must be a mapping")
    cfg.params = dict(params)
    out = raw.get("output", {}) or {}
    _require(isinstance(out, dict), "'output' must be a mapping")
    cfg.output = dict(out)
    return cfg


def load_config(path: str | Path, env: dict | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    return parse_config(raw, env)


__all__ = ["ConfigError", "ExperimentConfig", "SpaceSpec", "load_config", "parse_config", "EXPERIMENTS"]
