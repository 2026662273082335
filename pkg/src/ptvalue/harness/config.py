"""Experiment configuration: TOML files validated into frozen dataclasses.

A config has the tables ``[experiment]``, ``[environment]``, ``[schedule]``,
``[hyperparameters]`` and optionally ``[sweep]`` and ``[heatmap]``. Unknown
keys and hyperparameters the chosen algorithm does not use are rejected.
"""
from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError

PREDICTION_ALGORITHMS = ("td", "td_reset", "pt_td")
CONTROL_ALGORITHMS = ("q", "q_reset", "pt_q", "pt_q_crl")
ALGORITHMS = PREDICTION_ALGORITHMS + CONTROL_ALGORITHMS

# hyperparameters each algorithm consumes, in CSV echo order
CONSUMED = {
    "td": ("alpha",),
    "td_reset": ("alpha",),
    "pt_td": ("alpha", "alpha_bar"),
    "q": ("alpha", "epsilon"),
    "q_reset": ("alpha", "epsilon"),
    "pt_q": ("alpha", "alpha_bar", "epsilon"),
    "pt_q_crl": ("alpha", "alpha_bar", "epsilon", "k", "decay", "k_unit"),
}
HYPER_DEFAULTS = {"epsilon": 0.1, "decay": 0.0, "k_unit": "step"}
NUMERIC_HYPERS = ("alpha", "alpha_bar", "epsilon", "decay")

ENVIRONMENTS = {"discrete_grid": PREDICTION_ALGORITHMS, "control_grid": CONTROL_ALGORITHMS}
FEATURES = ("tabular", "rowcol")

_TABLES = {
    "experiment": {"algorithm", "episodes", "seeds", "base_seed", "out", "jobs"},
    "environment": {"name", "features", "layout", "max_steps"},
    "schedule": {"switch_every", "boundary_visible", "order", "seed"},
    "hyperparameters": set(CONSUMED["pt_q_crl"]) | {"alpha_bar"},
    "sweep": set(NUMERIC_HYPERS),
    "heatmap": {"k", "decay", "reference_alpha"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str
    environment: str = "discrete_grid"
    features: str = "tabular"
    layout: Optional[str] = None
    max_steps: int = 1000
    episodes: int = 500
    seeds: int = 30
    base_seed: int = 0
    out: Optional[str] = None
    jobs: int = 1
    switch_every: int = 50
    boundary_visible: bool = True
    order: str = "cycle"
    schedule_seed: int = 0
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    sweep: Mapping[str, tuple] = field(default_factory=dict)
    heatmap: Mapping[str, tuple] = field(default_factory=dict)

    @property
    def is_control(self) -> bool:
        return self.algorithm in CONTROL_ALGORITHMS

    def hyper_columns(self) -> tuple:
        return CONSUMED[self.algorithm]

    def with_hyperparameters(self, **updates) -> "ExperimentConfig":
        hp = dict(self.hyperparameters)
        hp.update(updates)
        return _replace(self, hyperparameters=hp)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return _replace(self, **kw)

    def explain(self) -> str:
        """The fully resolved config as indented JSON."""
        d = asdict(self)
        d["hyperparameters"] = dict(self.hyperparameters)
        d["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        d["heatmap"] = {k: list(v) for k, v in self.heatmap.items()}
        return json.dumps(d, indent=2, sort_keys=True)


def _replace(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
    d.update(kw)
    return validate(ExperimentConfig(**d))


def _as_int(name, value, minimum=0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


def _as_grid(name, values) -> tuple:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"grid {name!r} must be a nonempty list")
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"grid {name!r} holds a non-numeric entry {v!r}")
    return tuple(values)


def _check_hyper(name, value, algorithm):
    if name == "k_unit":
        if value not in ("episode", "step"):
            raise ConfigError(f"k_unit must be 'episode' or 'step', got {value!r}")
        return value
    if name == "k":
        return _as_int("k", value, 1)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"hyperparameter {name} must be numeric, got {value!r}")
    value = float(value)
    if name in ("alpha", "alpha_bar") and not value > 0:
        raise ConfigError(f"{name} must be positive for {algorithm}, got {value}")
    if name in ("epsilon", "decay") and not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value}")
    return value


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check cross-field consistency; returns the config unchanged or raises ConfigError."""
    if cfg.algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {cfg.algorithm!r}; choose from {ALGORITHMS}")
    if cfg.environment not in ENVIRONMENTS:
        raise ConfigError(f"unknown environment {cfg.environment!r}; choose from {tuple(ENVIRONMENTS)}")
    if cfg.algorithm not in ENVIRONMENTS[cfg.environment]:
        raise ConfigError(f"algorithm {cfg.algorithm!r} cannot run on {cfg.environment!r}")
    if cfg.features not in FEATURES:
        raise ConfigError(f"unknown features {cfg.features!r}; choose from {FEATURES}")
    if cfg.features != "tabular" and cfg.environment != "discrete_grid":
        raise ConfigError(f"features {cfg.features!r} are only available on discrete_grid")
    if cfg.layout is not None and cfg.environment != "control_grid":
        raise ConfigError("a layout file only applies to control_grid")
    for name in ("episodes", "seeds", "base_seed"):
        _as_int(name, getattr(cfg, name))
    for name in ("jobs", "switch_every", "max_steps"):
        _as_int(name, getattr(cfg, name), 1)
    if cfg.order not in ("cycle", "iid"):
        raise ConfigError(f"schedule order must be 'cycle' or 'iid', got {cfg.order!r}")
    if cfg.algorithm in ("td_reset", "pt_td", "q_reset", "pt_q") and not cfg.boundary_visible:
        raise ConfigError(f"{cfg.algorithm} acts on task boundaries and needs boundary_visible = true")

    consumed = CONSUMED[cfg.algorithm]
    extra = set(cfg.hyperparameters) - set(consumed)
    if extra:
        raise ConfigError(f"hyperparameters {sorted(extra)} are not used by {cfg.algorithm}")
    hp = {}
    for name in consumed:
        if cfg.hyperparameters.get(name) is not None:
            hp[name] = _check_hyper(name, cfg.hyperparameters[name], cfg.algorithm)
        elif name in HYPER_DEFAULTS:
            hp[name] = HYPER_DEFAULTS[name]
        elif name in cfg.sweep or name in cfg.heatmap:
            hp[name] = None  # filled per grid point
        else:
            raise ConfigError(f"{cfg.algorithm} needs hyperparameter {name!r}")
    object.__setattr__(cfg, "hyperparameters", hp)

    bad = set(cfg.sweep) - set(consumed)
    if bad:
        raise ConfigError(f"sweep grids {sorted(bad)} are not used by {cfg.algorithm}")
    if cfg.heatmap:
        if cfg.algorithm != "pt_q_crl":
            raise ConfigError("heatmaps need the continual algorithm pt_q_crl")
        for name in ("k", "decay"):
            if name not in cfg.heatmap:
                raise ConfigError(f"heatmap needs a {name!r} grid")
        for k in cfg.heatmap["k"]:
            _as_int("heatmap k", k, 1)
    return cfg


def from_mapping(doc: Mapping[str, Any]) -> ExperimentConfig:
    for table, body in doc.items():
        if table not in _TABLES:
            raise ConfigError(f"unknown config table [{table}]")
        if not isinstance(body, Mapping):
            raise ConfigError(f"[{table}] must be a table")
        unknown = set(body) - _TABLES[table]
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)} in [{table}]")
    exp = dict(doc.get("experiment", {}))
    env = dict(doc.get("environment", {}))
    sch = dict(doc.get("schedule", {}))
    if "algorithm" not in exp:
        raise ConfigError("[experiment] needs an algorithm")
    name = env.pop("name", "control_grid" if exp["algorithm"] in CONTROL_ALGORITHMS else "discrete_grid")
    kwargs = dict(
        algorithm=exp.pop("algorithm"),
        environment=name,
        hyperparameters=dict(doc.get("hyperparameters", {})),
        sweep={k: _as_grid(k, v) for k, v in doc.get("sweep", {}).items()},
        heatmap={k: _as_grid(k, v) for k, v in doc.get("heatmap", {}).items()},
    )
    kwargs.update(exp)
    kwargs.update(env)
    if "seed" in sch:
        kwargs["schedule_seed"] = sch.pop("seed")
    kwargs.update(sch)
    if not isinstance(kwargs.get("boundary_visible", True), bool):
        raise ConfigError("boundary_visible must be true or false")
    return validate(ExperimentConfig(**kwargs))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    cfg = from_mapping(doc)
    if cfg.layout is not None and not Path(cfg.layout).is_absolute():
        cfg = cfg.with_overrides(layout=str((path.parent / cfg.layout).resolve()))
    return cfg


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``bundled_config("control")``."""
    from importlib.resources import files

    p = files("ptvalue") / "configs" / f"{name}.toml"
    if not p.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return Path(str(p))
