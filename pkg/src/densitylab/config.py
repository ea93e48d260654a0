"""Experiment configuration: JSON schema, loading and validation."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .tolerances import Tolerances

KINDS = ("evolve", "equivariance", "grw", "entropy", "equivalence", "iph")
# CLI subcommand -> experiment kind
SUBCOMMANDS = {
    "evolve": "evolve",
    "bohm": "equivariance",
    "grw": "grw",
    "entropy": "entropy",
    "equiv": "equivalence",
    "iph": "iph",
}

_number = {"type": "number"}
_pair = {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["particles", "sites"],
    "additionalProperties": False,
    "properties": {
        "particles": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "object", "properties": {"mass": {"type": "number", "exclusiveMinimum": 0}}, "additionalProperties": False},
        },
        "sites": {"type": "integer", "minimum": 2},
        "spacing": {"type": "number", "exclusiveMinimum": 0},
        "boundary": {"enum": ["periodic", "hard-wall"]},
        "spin_k": {"type": "integer", "minimum": 1},
        "potential": {
            "type": "object",
            "required": ["name"],
            "properties": {"name": {"type": "string"}, "params": {"type": "object"}},
            "additionalProperties": False,
        },
        "stencil": {"enum": ["laplacian", "hopping"]},
        "dimension_cap": {"type": "integer", "minimum": 1},
    },
}

SCHEDULE_SCHEMA = {
    "type": "object",
    "required": ["t_end", "steps"],
    "additionalProperties": False,
    "properties": {"t_start": _number, "t_end": _number, "steps": {"type": "integer", "minimum": 1}},
}

MACROVARIABLE_SCHEMA = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["left-count", "custom"]},
        "left_sites": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "cells": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
        "labels": {"type": "array", "items": {"type": "string"}},
    },
}

SUBSPACE_SCHEMA = {
    "type": "object",
    "properties": {
        "macrovariable": MACROVARIABLE_SCHEMA,
        "cell": {"type": ["integer", "string"]},
        "indices": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "shell": {"type": "object", "required": ["energy", "width"], "properties": {"energy": _number, "width": _number}},
        "full": {"type": "boolean"},
        "label": {"type": "string"},
    },
}

WAVEFUNCTION_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["plane_wave", "gaussian", "basis", "eigenstate", "amplitudes"]},
        "k": {"type": ["number", "array"]},
        "packets": {
            "type": "array",
            "items": {"type": "object", "required": ["center"], "properties": {"center": _number, "width": _number, "momentum": _number}},
        },
        "index": {"type": "integer", "minimum": 0},
        "amplitudes": {"type": "array", "items": _pair},
        "spin": {"type": "array", "items": _pair},
        "spins": {"type": "array", "items": {"type": "array", "items": _pair}},
    },
}

COMPONENTS_SCHEMA = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "object",
        "required": ["weight", "wavefunction"],
        "properties": {"weight": {"type": "number", "minimum": 0}, "wavefunction": WAVEFUNCTION_SCHEMA},
    },
}

STATE_SCHEMA = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["iph", "canonical", "microcanonical", "pure", "mixture", "matrix", "random_pure_in"]},
        "subspace": SUBSPACE_SCHEMA,
        "beta": _number,
        "energy": _number,
        "width": _number,
        "wavefunction": WAVEFUNCTION_SCHEMA,
        "components": COMPONENTS_SCHEMA,
        "dim": {"type": "integer"},
        "entries": {"type": "array", "items": _pair},
    },
}

_times = {"type": "array", "items": _number, "minItems": 1}
_count = {"type": "integer", "minimum": 1}

EXPERIMENT_SCHEMAS = {
    "evolve": {
        "required": ["initial", "schedule"],
        "properties": {"initial": STATE_SCHEMA, "schedule": SCHEDULE_SCHEMA, "snapshot_every": _count},
    },
    "equivariance": {
        "required": ["initial", "schedule", "trajectories"],
        "properties": {
            "initial": STATE_SCHEMA,
            "schedule": SCHEDULE_SCHEMA,
            "checkpoints": _times,
            "trajectories": {"type": "integer", "minimum": 100},
            "tv_threshold": _number,
            "trajectory_output": {"enum": ["checkpoints", "all", "none"]},
        },
    },
    "grw": {
        "required": ["initial", "horizon", "checkpoints"],
        "properties": {
            "initial": STATE_SCHEMA,
            "rate": {"type": "number", "minimum": 0},
            "width": {"type": "number", "exclusiveMinimum": 0},
            "horizon": {"type": "number", "exclusiveMinimum": 0},
            "checkpoints": _times,
            "runs": _count,
            "mass_density": {"type": "boolean"},
            "flash_count_tolerance": _number,
            "write_snapshots": {"type": "boolean"},
        },
    },
    "entropy": {
        "required": ["macrovariable", "ph_cell", "schedule"],
        "properties": {
            "macrovariable": MACROVARIABLE_SCHEMA,
            "ph_cell": {"type": ["integer", "string"]},
            "schedule": SCHEDULE_SCHEMA,
            "delta": _number,
            "statistical_postulate": {"type": "boolean"},
            "window": {
                "type": "object",
                "required": ["t_min", "t_max", "target", "tolerance"],
                "properties": {"t_min": _number, "t_max": _number, "target": _number, "tolerance": _number},
            },
        },
    },
    "equivalence": {
        "required": ["mixture", "schedule", "trajectories"],
        "properties": {
            "mixture": COMPONENTS_SCHEMA,
            "schedule": SCHEDULE_SCHEMA,
            "checkpoints": _times,
            "trajectories": {"type": "integer", "minimum": 100},
            "corrupted_weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
        },
    },
    "iph": {
        "required": ["subspace"],
        "properties": {"subspace": SUBSPACE_SCHEMA},
    },
}


def _experiment_schema() -> dict:
    branches = []
    for kind, body in EXPERIMENT_SCHEMAS.items():
        branches.append({
            "if": {"properties": {"kind": {"const": kind}}},
            "then": {"required": body["required"], "properties": body["properties"]},
        })
    return {
        "type": "object",
        "required": ["kind"],
        "properties": {"kind": {"enum": list(KINDS)}},
        "allOf": branches,
    }


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "densitylab experiment config",
    "type": "object",
    "required": ["model", "experiment"],
    "additionalProperties": False,
    "properties": {
        "model": MODEL_SCHEMA,
        "experiment": _experiment_schema(),
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output_dir": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {f.name: ({"type": "integer"} if f.type in ("int", int) else _number) for f in dataclasses.fields(Tolerances)},
        },
    },
}


def validate(config: dict) -> dict:
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    return config


def load(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return validate(config)


def canonical_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def with_seed(config: dict, seed: int | None) -> dict:
    config = copy.deepcopy(config)
    if seed is not None:
        config["seed"] = int(seed)
    config.setdefault("seed", 0)
    return validate(config)
