"""Experiment configuration: versioned JSON schema, strict validation."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

EXPERIMENT_KINDS = (
    "transition-sweep",
    "design-probe",
    "level-stats",
    "deep-dynamics",
    "gradient-scan",
    "vqe",
    "theorem-checks",
    "longrange-bench",
)

_NUMBER_ARRAY = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_INT_ARRAY = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "experiment", "master_seed"],
    "properties": {
        "schema_version": {"const": 1},
        "experiment": {"enum": list(EXPERIMENT_KINDS)},
        "master_seed": {"type": "integer", "minimum": 0},
        "graph": {"enum": ["ring", "circulant-1-2", "intermittent-chain"]},
        "n_list": _INT_ARRAY,
        "w_grid": _NUMBER_ARRAY,
        "w_values": _NUMBER_ARRAY,
        "samples": {"type": "integer", "minimum": 1},
        "depth_rule": {
            "oneOf": [
                {"enum": ["n", "floor((n-1)/6)"]},
                {"type": "integer", "minimum": 1},
            ]
        },
        "depth_max": {"type": "integer", "minimum": 1},
        "depth_stride": {"type": "integer", "minimum": 1},
        "model": {"type": "object"},
        "phases": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "init_kinds": {
            "type": "array",
            "items": {"enum": ["mbl", "thermal", "random", "cti"]},
            "minItems": 1,
        },
        "init": {"enum": ["chebyshev", "floquet"]},
        "seeds": {"type": "integer", "minimum": 1},
        "optimizer": {"type": "object"},
        "w_mbl": {"type": "number", "minimum": 0},
        "w_thermal": {"type": "number", "minimum": 0},
        "cti_eps": {"type": "number", "minimum": 0},
        "lambdas": _NUMBER_ARRAY,
        "s_points": {"type": "integer", "minimum": 11},
        "instances": {"type": "integer", "minimum": 1},
        "vqe_n": {"type": "integer", "minimum": 2},
        "chi_values": _INT_ARRAY,
        "t_orders": _INT_ARRAY,
        "input_bits": {"type": "string", "pattern": "^[01]+$"},
        "input_mode": {"enum": ["fixed", "random-basis"]},
        "ensembles": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["kind", "w"],
                "properties": {
                    "kind": {"enum": ["floquet", "narrow"]},
                    "w": {"type": "number", "minimum": 0},
                },
            },
            "minItems": 1,
        },
        "shots": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "total": {"type": "integer", "minimum": 1},
                "replan_every": {"type": "integer", "minimum": 1},
                "repetitions": {"type": "integer", "minimum": 1},
            },
        },
        "out_dir": {"type": "string"},
    },
}

_REQUIRED_BY_KIND = {
    "transition-sweep": ["graph", "n_list", "w_grid", "samples"],
    "design-probe": ["graph", "n_list", "w_values", "samples"],
    "level-stats": ["graph", "n_list", "w_grid", "samples"],
    "deep-dynamics": ["graph", "n_list", "depth_max", "ensembles", "samples"],
    "gradient-scan": ["n_list", "w_grid", "samples"],
    "vqe": ["model", "n_list", "init_kinds", "seeds"],
    "theorem-checks": ["n_list", "lambdas", "instances"],
    "longrange-bench": ["n_list", "chi_values", "instances"],
}


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass
class ExperimentConfig:
    raw: dict
    path: str = ""

    def __getattr__(self, name):
        try:
            return self.raw[name]
        except KeyError:
            raise AttributeError(name) from None

    def get(self, key, default=None):
        return self.raw.get(key, default)

    @property
    def kind(self) -> str:
        return self.raw["experiment"]

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def validate_config(raw: dict, path: str = "") -> ExperimentConfig:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path or 'config'}: field '{loc}': {exc.message}") from None
    kind = raw["experiment"]
    missing = [k for k in _REQUIRED_BY_KIND[kind] if k not in raw]
    if missing:
        raise ConfigError(f"{path or 'config'}: {kind} requires fields {missing}")
    return ExperimentConfig(raw, path)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return validate_config(raw, str(path))
