"""Run configuration: JSON schemas, validation, and dotted-path overrides.

Configs are strict: unknown keys are rejected, every stochastic command
requires a seed, and defaults are filled in during validation so commands
downstream never probe for missing keys.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Any

__all__ = ["ConfigError", "SCHEMA_VERSION", "validate_config", "apply_overrides",
           "command_schema"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Field:
    types: tuple
    default: Any = None
    required: bool = False
    choices: tuple | None = None


def _schedule_schema() -> dict:
    return {
        "kind": Field((str,), "vp_cosine", choices=("vp_cosine", "linear_cfm")),
        "nu": Field((int, float), 1.0),
        "s": Field((int, float), 0.008),
        "sigma_min": Field((int, float), 0.0),
        "T": Field((int,), 500),
    }


def _schedules_schema() -> dict:
    return {
        "coords": _schedule_schema(),
        "atoms": {**_schedule_schema(), "nu": Field((int, float), 1.5)},
        "bonds": {**_schedule_schema(), "nu": Field((int, float), 1.5)},
        "charges": _schedule_schema(),
    }


def _model_config_schema() -> dict:
    return {
        "layers": Field((int,), 2),
        "d_node": Field((int,), 32),
        "d_edge": Field((int,), 16),
        "heads": Field((int,), 4),
        "d_time": Field((int,), 32),
        "ff_mult": Field((int,), 4),
        "vector_features": Field((int,), 1),
        "self_conditioning": Field((bool,), True),
    }


def _model_schema() -> dict:
    return {
        "kind": Field((str,), "zero_init", choices=("checkpoint", "zero_init", "oracle")),
        "path": Field((str, type(None)), None),
        "oracle_sdf": Field((str, type(None)), None),
        "init_seed": Field((int,), 0),
        "config": _model_config_schema(),
    }


def _time_distribution_schema() -> dict:
    return {
        "kind": Field((str,), "discrete_uniform_grid",
                      choices=("uniform", "discrete_uniform_grid", "beta_shaped")),
        "T": Field((int,), 500),
        "a": Field((int, float), 1.0),
        "b": Field((int, float), 1.0),
    }


_SAMPLE_SCHEMA = {
    "schema_version": Field((int,), required=True),
    "seed": Field((int,), required=True),
    "objective": Field((str,), "diffusion", choices=("diffusion", "flow_matching")),
    "steps": Field((int, type(None)), None),
    "count": Field((int,), required=True),
    "sizes": {
        "fixed": Field((int, type(None)), None),
        "histogram": Field((str, type(None)), None),
    },
    "kekulized": Field((bool,), False),
    "model": _model_schema(),
    "schedules": _schedules_schema(),
    "output": {
        "sdf": Field((str,), required=True),
        "summary": Field((str, type(None)), None),
    },
}

_SAMPLE_COND_SCHEMA = {
    "schema_version": Field((int,), required=True),
    "seed": Field((int,), required=True),
    "objective": Field((str,), "diffusion", choices=("diffusion", "flow_matching")),
    "steps": Field((int, type(None)), None),
    "template_sdf": Field((str,), required=True),
    "multiplicity": Field((int,), 2),
    "kekulized": Field((bool,), False),
    "model": _model_schema(),
    "schedules": _schedules_schema(),
    "output": {
        "sdf": Field((str,), required=True),
        "summary": Field((str, type(None)), None),
    },
}

_TRAIN_TOY_SCHEMA = {
    "schema_version": Field((int,), required=True),
    "seed": Field((int,), required=True),
    "data_sdf": Field((str,), required=True),
    "steps": Field((int,), 500),
    "batch_size": Field((int,), 4),
    "optimizer": Field((str,), "sgd_momentum", choices=("sgd_momentum", "adam")),
    "lr": Field((int, float), 0.005),
    "momentum": Field((int, float), 0.9),
    "clip_norm": Field((int, float, type(None)), 10.0),
    "objective": Field((str,), "diffusion", choices=("diffusion", "flow_matching")),
    "sc_drop": Field((int, float), 0.5),
    "rot_align": Field((bool,), True),
    "kekulized": Field((bool,), False),
    "loss_weights": {
        "coords": Field((int, float), 3.0),
        "atoms": Field((int, float), 0.4),
        "bonds": Field((int, float), 2.0),
        "charges": Field((int, float), 1.0),
    },
    "time_distribution": _time_distribution_schema(),
    "model": _model_schema(),
    "schedules": _schedules_schema(),
    "resume": Field((str, type(None)), None),
    "output": {
        "checkpoint": Field((str,), required=True),
        "loss_csv": Field((str,), required=True),
    },
}

_EVAL_SCHEMA = {
    "schema_version": Field((int,), required=True),
    "generated_sdf": Field((str,), required=True),
    "reference_sdf": Field((str, type(None)), None),
    "kekulized": Field((bool,), False),
    "valence_table": Field((str, type(None)), None),
    "metrics": {
        "stability": Field((bool,), True),
        "distributional": Field((bool,), False),
        "coverage": {
            "enabled": Field((bool,), False),
            "delta": Field((int, float), 0.75),
            "gen_per_ref": Field((int,), 2),
        },
        "relaxation": {
            "enabled": Field((bool,), False),
            "relaxed_sdf": Field((str, type(None)), None),
            "energies_json": Field((str, type(None)), None),
        },
    },
    "output": {
        "json": Field((str,), required=True),
        "text": Field((str, type(None)), None),
    },
}

_RELAX_SCHEMA = {
    "schema_version": Field((int,), required=True),
    "input_sdf": Field((str,), required=True),
    "kekulized": Field((bool,), False),
    "relaxer": {
        "command": Field((str,), required=True),
        "timeout": Field((int, float), 60.0),
        "energy_units": Field((str,), "kcal/mol", choices=("kcal/mol", "hartree")),
    },
    "output": {
        "initial_sdf": Field((str,), required=True),
        "relaxed_sdf": Field((str,), required=True),
        "energies_json": Field((str,), required=True),
        "summary": Field((str, type(None)), None),
    },
}

_SCHEMAS = {
    "sample": _SAMPLE_SCHEMA,
    "sample-cond": _SAMPLE_COND_SCHEMA,
    "train-toy": _TRAIN_TOY_SCHEMA,
    "eval": _EVAL_SCHEMA,
    "relax": _RELAX_SCHEMA,
}


def command_schema(command: str) -> dict:
    try:
        return _SCHEMAS[command]
    except KeyError:
        raise ConfigError(f"unknown command {command!r}") from None


def _validate_node(cfg: Any, schema: dict, path: str) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path or 'config'} must be an object")
    out = {}
    for key in cfg:
        if key not in schema:
            raise ConfigError(f"unknown key {path + key!r}")
    for key, spec in schema.items():
        here = f"{path}{key}"
        if isinstance(spec, dict):
            out[key] = _validate_node(cfg.get(key, {}), spec, here + ".")
            continue
        if key not in cfg:
            if spec.required:
                raise ConfigError(f"missing required key {here!r}")
            out[key] = copy.deepcopy(spec.default)
            continue
        val = cfg[key]
        if isinstance(val, bool) and bool not in spec.types:
            raise ConfigError(f"{here!r} has wrong type bool")
        if not isinstance(val, spec.types):
            names = "/".join(t.__name__ for t in spec.types)
            raise ConfigError(f"{here!r} must be {names}, got {type(val).__name__}")
        if spec.choices is not None and val not in spec.choices:
            raise ConfigError(f"{here!r} must be one of {spec.choices}, got {val!r}")
        out[key] = val
    return out


def validate_config(cfg: dict, command: str) -> dict:
    """Validate against the command schema and fill defaults; rejects unknown
    keys and wrong schema versions."""
    merged = _validate_node(cfg, command_schema(command), "")
    if merged["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {merged['schema_version']} (expected {SCHEMA_VERSION})")
    return merged


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply `dotted.path=value` overrides; values are parsed as JSON with a
    bare-string fallback."""
    out = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form path=value")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {dotted!r} crosses a non-object")
        node[parts[-1]] = value
    return out
