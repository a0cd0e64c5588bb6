"""
Experiment configuration: JSON schema, defaults and cross-field validation.

A config file holds any subset of the keys in ``SCHEMA``; everything missing is
filled from ``DEFAULTS`` and the fully-resolved dict is echoed into every
artifact a run writes.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .pinn import LossWeights, TrainingConfig

OUTPUT_ROOT_ENV = "DDPINN_OUTPUT_ROOT"

_interval = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ddpinn experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "model"],
    "properties": {
        "name": {"type": "string", "pattern": r"^[A-Za-z0-9_.-]+$"},
        "model": {"enum": ["saturated_growth", "competition"]},
        "setting": {"enum": ["coexistence", "survival", None]},
        "initial_condition": {"type": ["array", "null"], "items": {"type": "number", "exclusiveMinimum": 0}},
        "domain": _interval,
        "window": _interval,
        "noise_level": {"type": "number", "minimum": 0},
        "method": {"enum": ["pinn", "fbpinn", "both"]},
        "layers": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "activation": {"const": "tanh"},
        "epochs": {"type": "integer", "minimum": 1},
        "lr": {"type": "number", "exclusiveMinimum": 0},
        "lambda_phy": {"type": "number", "minimum": 0},
        "lambda_data": {"type": "number", "minimum": 0},
        "lambda_param_pinn": {"type": "number", "minimum": 0},
        "lambda_param_fbpinn": {"type": "number", "minimum": 0},
        "nC": {"type": "integer", "minimum": 1},
        "nD": {"type": "integer", "minimum": 1},
        "nsub": {"type": "integer", "minimum": 2},
        "wo": {"type": "number", "exclusiveMinimum": 1},
        "wi": {"type": "number", "exclusiveMinimum": 1},
        "param_init": {"type": "number"},
        "param_bounds": _interval,
        "rk4_step": {"type": "number", "exclusiveMinimum": 0},
        "mse_points": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "noise_levels": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            },
        },
        "landscape": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "enabled": {"type": "boolean"},
                "resolution": {"type": "integer", "minimum": 3},
                "span": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "out_dir": {"type": "string"},
    },
}

DEFAULTS = {
    "setting": None,
    "initial_condition": None,
    "domain": [0.0, 24.0],
    "window": [0.0, 24.0],
    "noise_level": 0.0,
    "method": "both",
    "layers": [5, 5, 5],
    "activation": "tanh",
    "epochs": 50000,
    "lr": 0.001,
    "lambda_phy": 1.0,
    "lambda_data": 1.0,
    "lambda_param_pinn": 0.0,
    "lambda_param_fbpinn": 1e6,
    "nC": 200,
    "nD": 100,
    "nsub": 2,
    "wo": 1.9,
    "wi": 1.0005,
    "param_init": 0.5,
    "param_bounds": [0.0, 10.0],
    "rk4_step": 0.01,
    "mse_points": 500,
    "seed": 0,
    "sweep": {"noise_levels": [0.0, 0.01, 0.02, 0.05, 0.1], "seeds": [0, 1, 2]},
    "landscape": {"enabled": True, "resolution": 41, "span": 1.0, "seed": 0},
    "out_dir": None,
}


class ConfigError(ValueError):
    pass


def _path(error) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in error.absolute_path)


def resolve(raw: dict) -> dict:
    """Validate ``raw`` and return it with every default materialised."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(f"{_path(e)}: {e.message}" for e in errors))
    cfg = copy.deepcopy(DEFAULTS)
    for key, value in raw.items():
        if isinstance(value, dict):
            cfg[key] = {**cfg[key], **value}
        else:
            cfg[key] = copy.deepcopy(value)
    if cfg["out_dir"] is None:
        cfg["out_dir"] = str(Path("runs") / cfg["name"])
    _check(cfg)
    return cfg


def _check(cfg: dict) -> None:
    problems = []
    t0, t1 = cfg["domain"]
    lo, hi = cfg["window"]
    if not t1 > t0:
        problems.append(f"$.domain: empty interval [{t0}, {t1}]")
    if not t0 <= lo < hi <= t1:
        problems.append(f"$.window: [{lo}, {hi}] must be a non-empty sub-interval of the domain")
    b0, b1 = cfg["param_bounds"]
    if b0 > b1:
        problems.append(f"$.param_bounds: lower bound {b0} exceeds upper bound {b1}")
    if cfg["model"] == "competition":
        if cfg["setting"] is None:
            problems.append("$.setting: required for the competition model")
        n_species = 2
    else:
        if cfg["setting"] is not None:
            problems.append("$.setting: only valid for the competition model")
        n_species = 1
    ic = cfg["initial_condition"]
    if ic is not None and len(ic) != n_species:
        problems.append(f"$.initial_condition: expected {n_species} values, got {len(ic)}")
    if cfg["rk4_step"] > (t1 - t0):
        problems.append("$.rk4_step: larger than the domain")
    if problems:
        raise ConfigError("; ".join(problems))


def load(path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return resolve(raw)


def output_dir(cfg: dict) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        return Path(root) / cfg["name"]
    return Path(cfg["out_dir"])


def methods(cfg: dict) -> tuple[str, ...]:
    return ("pinn", "fbpinn") if cfg["method"] == "both" else (cfg["method"],)


def training_config(cfg: dict, method: str, seed: int | None = None) -> TrainingConfig:
    lam_param = cfg["lambda_param_pinn"] if method == "pinn" else cfg["lambda_param_fbpinn"]
    return TrainingConfig(
        domain=tuple(cfg["domain"]), n_col=cfg["nC"], epochs=cfg["epochs"], lr=cfg["lr"],
        hidden=tuple(cfg["layers"]), seed=cfg["seed"] if seed is None else seed,
        weights=LossWeights(cfg["lambda_phy"], cfg["lambda_data"], lam_param),
        param_init=cfg["param_init"], bounds=tuple(cfg["param_bounds"]),
        nsub=cfg["nsub"], wo=cfg["wo"], wi=cfg["wi"], fbpinn_lambda_param=cfg["lambda_param_fbpinn"],
    )


@dataclass
class Layout:
    """Where each stage puts its artifacts inside an experiment directory."""

    root: Path

    @property
    def config(self) -> Path:
        return self.root / "config.json"

    @property
    def dataset(self) -> Path:
        return self.root / "dataset.csv"

    def method_dir(self, method: str) -> Path:
        return self.root / method

    def report(self, method: str) -> Path:
        return self.method_dir(method) / "report.json"

    def checkpoint(self, method: str) -> Path:
        return self.method_dir(method) / "checkpoint.json"

    def loss_history(self, method: str) -> Path:
        return self.method_dir(method) / "loss_history.csv"

    def landscape(self, method: str) -> Path:
        return self.method_dir(method) / "landscape.csv"
