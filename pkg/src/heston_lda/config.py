"""Experiment configuration: TOML documents validated in full.

A configuration holds one ``[params]`` table, exactly one experiment table
and optional top-level ``seed`` / ``output_dir`` keys.  Validation collects
every problem in the document instead of stopping at the first, and unknown
keys are rejected at every level so typos cannot silently fall back to
defaults.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .core import ModelParams

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "config_to_dict",
    "config_from_dict",
]

EXPERIMENTS = (
    "rate-fn",
    "mgf-check",
    "classify",
    "ldp-verify",
    "ergodic-check",
    "martingale-check",
    "stopping-time",
)

# TOML key -> ModelParams field
_PARAM_KEYS = {
    "mu": "mu",
    "r": "r",
    "a": "a",
    "b": "b",
    "sigma": "sigma",
    "rho": "rho",
    "v0": "v0",
    "s0": "s0",
    "lambda": "lam",
}


class ConfigError(ValueError):
    """Carries every validation problem found in a configuration."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    experiment: str
    options: dict
    seed: int = 42
    output_dir: str = "."


def _is_real(value) -> bool:
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and math.isfinite(float(value))
    )


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


class _Block:
    """One experiment table plus the shared error sink."""

    def __init__(self, name: str, table: dict, errors: list):
        self.name = name
        self.table = table
        self.errors = errors
        self.seen = set()

    def reject_unknown(self) -> None:
        for key in self.table:
            if key not in self.seen:
                self.errors.append(f"unknown key '{self.name}.{key}'")

    def _get(self, key: str, required: bool):
        self.seen.add(key)
        if key not in self.table:
            if required:
                self.errors.append(f"{self.name}.{key} is required")
            return None
        return self.table[key]

    def real(self, key: str, required=True, positive=False) -> Optional[float]:
        value = self._get(key, required)
        if value is None:
            return None
        if not _is_real(value):
            self.errors.append(f"{self.name}.{key} must be a finite real")
            return None
        value = float(value)
        if positive and not value > 0:
            self.errors.append(f"{self.name}.{key} must be positive")
            return None
        return value

    def integer(self, key: str, required=True, minimum=1) -> Optional[int]:
        value = self._get(key, required)
        if value is None:
            return None
        if not _is_int(value):
            self.errors.append(f"{self.name}.{key} must be an integer")
            return None
        if value < minimum:
            self.errors.append(f"{self.name}.{key} must be at least {minimum}")
            return None
        return int(value)

    def coeffs(self, zero_alpha=False) -> Optional[tuple]:
        value = self._get("coeffs", True)
        if value is None:
            return None
        ok = (
            isinstance(value, list)
            and len(value) == 3
            and all(_is_real(v) for v in value)
        )
        if not ok:
            self.errors.append(
                f"{self.name}.coeffs must be three reals [alpha, beta, delta]"
            )
            return None
        triple = tuple(float(v) for v in value)
        if zero_alpha and triple[0] != 0.0:
            self.errors.append(
                f"{self.name}.coeffs[0] (alpha) must be 0: the rate function "
                "only involves beta and delta"
            )
            return None
        return triple

    def grid(
        self,
        key: str,
        required=True,
        min_len=1,
        min_distinct=1,
        increasing=False,
        positive=True,
    ) -> Optional[tuple]:
        value = self._get(key, required)
        if value is None:
            return None
        if not (isinstance(value, list) and all(_is_real(v) for v in value)):
            self.errors.append(f"{self.name}.{key} must be a list of finite reals")
            return None
        grid = tuple(float(v) for v in value)
        if len(grid) < min_len:
            self.errors.append(f"{self.name}.{key} needs at least {min_len} entries")
            return None
        if positive and any(v <= 0 for v in grid):
            self.errors.append(f"{self.name}.{key} entries must be positive")
            return None
        if increasing and any(x >= y for x, y in zip(grid, grid[1:])):
            self.errors.append(f"{self.name}.{key} must be strictly increasing")
            return None
        if len(set(grid)) < min_distinct:
            self.errors.append(
                f"{self.name}.{key} needs at least {min_distinct} distinct entries"
            )
            return None
        return grid


def _options_rate_fn(b: _Block) -> dict:
    out = {
        "coeffs": b.coeffs(zero_alpha=True),
        "x_grid": b.grid("x_grid", positive=False),
    }
    b.reject_unknown()
    return out


def _options_mgf_check(b: _Block) -> dict:
    out = {
        "coeffs": b.coeffs(),
        "u": b.real("u"),
        "t_grid": b.grid("t_grid", increasing=True),
    }
    b.reject_unknown()
    return out


def _options_classify(b: _Block) -> dict:
    out = {"gamma": b.real("gamma", positive=True)}
    c = b.real("c", required=False, positive=True)
    if c is not None:
        out["c"] = c
    b.reject_unknown()
    return out


def _options_ldp_verify(b: _Block) -> dict:
    out = {
        "coeffs": b.coeffs(),
        "x": b.real("x"),
        "t_grid": b.grid("t_grid", min_len=4, min_distinct=4),
        "n_paths": b.integer("n_paths", minimum=100),
        "steps_per_unit_t": b.real("steps_per_unit_t", required=False, positive=True)
        or 20.0,
    }
    b.reject_unknown()
    return out


def _options_time_average(b: _Block) -> dict:
    out = {
        "t": b.real("t", positive=True),
        "n_paths": b.integer("n_paths", minimum=2),
    }
    n_steps = b.integer("n_steps", required=False)
    if n_steps is not None:
        out["n_steps"] = n_steps
    b.reject_unknown()
    return out


def _options_stopping_time(b: _Block) -> dict:
    out = {
        "gamma": b.real("gamma", positive=True),
        "gamma_bar": b.real("gamma_bar", positive=True),
        "t_grid": b.grid("t_grid"),
        "f_values": b.grid("f_values"),
        "n_paths": b.integer("n_paths", minimum=100),
    }
    gamma_prime = b.real("gamma_prime", required=False, positive=True)
    if gamma_prime is not None:
        out["gamma_prime"] = gamma_prime
    n_steps = b.integer("n_steps", required=False)
    if n_steps is not None:
        out["n_steps"] = n_steps
    b.reject_unknown()
    if None not in (out["gamma"], out["gamma_bar"]):
        if not out["gamma"] < out["gamma_bar"]:
            b.errors.append(f"{b.name}: need gamma < gamma_bar")
        if gamma_prime is not None and not out["gamma_bar"] < gamma_prime:
            b.errors.append(f"{b.name}: need gamma_bar < gamma_prime")
    if None not in (out["t_grid"], out["f_values"]):
        if len(out["t_grid"]) != len(out["f_values"]):
            b.errors.append(f"{b.name}: t_grid and f_values must pair up")
    return out


_OPTION_VALIDATORS = {
    "rate-fn": _options_rate_fn,
    "mgf-check": _options_mgf_check,
    "classify": _options_classify,
    "ldp-verify": _options_ldp_verify,
    "ergodic-check": _options_time_average,
    "martingale-check": _options_time_average,
    "stopping-time": _options_stopping_time,
}


def _build(doc: dict) -> ExperimentConfig:
    errors = []

    for key in doc:
        if key not in ("params", "seed", "output_dir") and key not in EXPERIMENTS:
            errors.append(f"unknown top-level key '{key}'")

    params_table = doc.get("params", {})
    params = None
    if not isinstance(params_table, dict):
        errors.append("'params' must be a table")
        params_table = {}
    kwargs = {}
    for key, value in params_table.items():
        if key not in _PARAM_KEYS:
            errors.append(f"unknown key 'params.{key}'")
        elif not _is_real(value):
            errors.append(f"params.{key} must be a finite real")
        else:
            kwargs[_PARAM_KEYS[key]] = float(value)
    try:
        params = ModelParams(**kwargs)
    except ValueError as exc:
        message = str(exc)
        prefix = "invalid model parameters: "
        if message.startswith(prefix):
            errors.extend(
                "params: " + part for part in message[len(prefix) :].split("; ")
            )
        else:
            errors.append("params: " + message)

    present = [name for name in EXPERIMENTS if name in doc]
    experiment = ""
    options = {}
    if len(present) != 1:
        listed = ", ".join(present) if present else "none found"
        errors.append(f"exactly one experiment block required ({listed})")
    else:
        experiment = present[0]
    # validate every present block so one document pass reports everything
    for name in present:
        table = doc[name]
        if not isinstance(table, dict):
            errors.append(f"'{name}' must be a table")
            continue
        validated = _OPTION_VALIDATORS[name](_Block(name, table, errors))
        if name == experiment:
            options = validated

    seed = 42
    if "seed" in doc:
        if _is_int(doc["seed"]):
            seed = int(doc["seed"])
        else:
            errors.append("seed must be an integer")

    output_dir = "."
    if "output_dir" in doc:
        if isinstance(doc["output_dir"], str) and doc["output_dir"]:
            output_dir = doc["output_dir"]
        else:
            errors.append("output_dir must be a non-empty string")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        params=params,
        experiment=experiment,
        options=options,
        seed=seed,
        output_dir=output_dir,
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML experiment document.

    Raises ConfigError carrying the full list of problems; never reports
    just the first one.
    """
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax: {exc}"]) from None
    return _build(doc)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-dict form of a config; feeding it back through
    ``config_from_dict`` reproduces an equal ExperimentConfig."""
    params = {key: getattr(cfg.params, attr) for key, attr in _PARAM_KEYS.items()}
    options = {
        key: list(value) if isinstance(value, tuple) else value
        for key, value in cfg.options.items()
    }
    return {
        "params": params,
        cfg.experiment: options,
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
    }


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a dict with the layout of a parsed TOML document."""
    return _build(doc)
