"""Campaign configuration: flat ``key=value`` files, flag overrides, seeds.

Precedence, highest first: command-line flags, the config file, the
``RANDGAP_SEED`` environment variable (seed only), built-in defaults.
"""

import os
from dataclasses import dataclass, fields, replace
from enum import Enum

import numpy as np

from .inference import InferenceConfig

__all__ = ["Suite", "ConfigError", "CampaignConfig", "parse_config_text", "load_config",
           "build_config", "DEFAULT_DELTAS"]

DEFAULT_DELTAS = (0.0, 1e-5, 1e-4, 1e-3, 1e-2)


class ConfigError(ValueError):
    """Malformed, unknown or missing configuration."""


class Suite(Enum):
    GAPS = "gaps"
    AMPLITUDE = "amplitude"
    CONTROLMAP = "controlmap"
    TURNPIKE = "turnpike"
    DESIGNCHECK = "designcheck"


CONTROLMAP_MODES = ("diagonal", "triangular", "two-by-two", "miscalibration")
DESIGN_SAMPLERS = ("haar", "euler", "clifford", "identity")


def _floats(text):
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def _ints(text):
    return tuple(int(x) for x in str(text).replace(",", " ").split())


@dataclass
class CampaignConfig:
    suite: Suite
    dim: int = None
    instances: int = 50
    experiments: int = None
    seed: int = None
    out: str = None
    jobs: int = 1
    accept_threshold: int = 10_000
    max_attempts_factor: int = 1000
    pgh_prefactor: float = 0.5
    t_max: float = 1e6
    prior_draws: int = 10_000
    # adiabatic variant of the gaps suite
    anneal_time: float = None
    adiabatic_indices: tuple = None
    # amplitude suite
    theta_min: float = 0.05
    theta_max: float = np.pi / 8 - 0.05
    # controlmap suite
    mode: str = None
    deltas: tuple = DEFAULT_DELTAS
    prior_sd: float = 0.3
    # designcheck suite
    sampler: str = "haar"
    samples: int = 100_000
    # turnpike suite
    gaps_file: str = None
    tolerance: float = None

    @property
    def inference(self):
        return InferenceConfig(
            accept_threshold=self.accept_threshold,
            max_attempts_factor=self.max_attempts_factor,
            pgh_prefactor=self.pgh_prefactor,
            max_experiments=self.experiments or 1,
            rng_seed=self.seed or 0,
            t_max=self.t_max,
        )


_CASTS = {
    "dim": int, "instances": int, "experiments": int, "seed": int, "out": str, "jobs": int,
    "accept_threshold": int, "max_attempts_factor": int, "pgh_prefactor": float,
    "t_max": float, "prior_draws": int, "anneal_time": float, "adiabatic_indices": _ints,
    "theta_min": float, "theta_max": float, "mode": str, "deltas": _floats,
    "prior_sd": float, "sampler": str, "samples": int, "gaps_file": str, "tolerance": float,
}

_DEFAULT_EXPERIMENTS = {Suite.GAPS: 200, Suite.AMPLITUDE: 200, Suite.CONTROLMAP: 600}


def _key(name):
    return name.strip().lower().replace("-", "_")


def parse_config_text(text, source="<config>"):
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _key(key)
        if key == "suite":
            out[key] = value
            continue
        if key not in _CASTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _CASTS[key](value)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def build_config(suite, file_values=None, overrides=None, environ=None):
    """Merge sources into a validated :class:`CampaignConfig`."""
    suite = Suite(suite)
    environ = os.environ if environ is None else environ
    values = {}
    if "RANDGAP_SEED" in environ:
        try:
            values["seed"] = int(environ["RANDGAP_SEED"])
        except ValueError:
            raise ConfigError(f"RANDGAP_SEED is not an integer: {environ['RANDGAP_SEED']!r}") from None
    file_values = dict(file_values or {})
    file_suite = file_values.pop("suite", None)
    if file_suite is not None and file_suite != suite.value:
        raise ConfigError(f"config file is for suite {file_suite!r}, not {suite.value!r}")
    values.update(file_values)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = CampaignConfig(suite=suite, **values)
    if cfg.experiments is None and suite in _DEFAULT_EXPERIMENTS:
        cfg = replace(cfg, experiments=_DEFAULT_EXPERIMENTS[suite])
    if cfg.seed is None:
        cfg = replace(cfg, seed=0)
    validate(cfg)
    return cfg


def _require(cfg, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"missing required field: {name}")


def validate(cfg):
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name in ("instances", "experiments", "jobs", "accept_threshold",
                      "max_attempts_factor", "prior_draws", "samples") and v is not None:
            if v < 1:
                raise ConfigError(f"{f.name} must be positive, got {v}")
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    if not cfg.pgh_prefactor > 0 or not cfg.t_max > 0:
        raise ConfigError("pgh_prefactor and t_max must be positive")
    s = cfg.suite
    if s is Suite.GAPS:
        _require(cfg, "dim", "out")
        if not 2 <= cfg.dim <= 16:
            raise ConfigError(f"dim must be in 2..16, got {cfg.dim}")
        if cfg.anneal_time is not None and cfg.anneal_time <= 0:
            raise ConfigError("anneal_time must be positive")
        if cfg.adiabatic_indices is not None:
            if cfg.anneal_time is None:
                raise ConfigError("adiabatic_indices needs anneal_time")
            idx = cfg.adiabatic_indices
            if len(set(idx)) != len(idx) or len(idx) < 2 or min(idx) < 0 or max(idx) >= cfg.dim:
                raise ConfigError(f"adiabatic_indices must be >= 2 distinct levels below dim, got {idx}")
    elif s is Suite.AMPLITUDE:
        _require(cfg, "out")
        if cfg.dim not in (None, 2):
            raise ConfigError("the amplitude suite runs at dim 2")
        if not 0 < cfg.theta_min < cfg.theta_max < np.pi / 8:
            raise ConfigError("need 0 < theta_min < theta_max < pi/8")
    elif s is Suite.CONTROLMAP:
        _require(cfg, "mode", "out")
        if cfg.mode not in CONTROLMAP_MODES:
            raise ConfigError(f"mode must be one of {', '.join(CONTROLMAP_MODES)}; got {cfg.mode!r}")
        if cfg.dim not in (None, 2, 3):
            raise ConfigError("control maps are 2x2 or 3x3")
        if cfg.mode == "triangular" and cfg.dim not in (None, 3):
            raise ConfigError("triangular maps are 3x3")
        if cfg.mode == "two-by-two" and cfg.dim not in (None, 2):
            raise ConfigError("two-by-two maps are 2x2")
        if any(not 0 <= d <= 1e-2 for d in cfg.deltas) or not cfg.deltas:
            raise ConfigError("deltas must lie in [0, 1e-2]")
    elif s is Suite.DESIGNCHECK:
        _require(cfg, "out")
        if cfg.sampler not in DESIGN_SAMPLERS:
            raise ConfigError(f"sampler must be one of {', '.join(DESIGN_SAMPLERS)}")
        dim = cfg.dim or 2
        if cfg.sampler in ("euler", "clifford") and dim != 2:
            raise ConfigError(f"the {cfg.sampler} sampler is single-qubit (dim 2)")
        if not 2 <= dim <= 4:
            raise ConfigError("design checks cover dim 2..4")
    return cfg
