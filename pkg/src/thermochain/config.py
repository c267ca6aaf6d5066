"""JSON experiment configuration: schema, defaults and resolution."""
from __future__ import annotations

import copy
import json

import jsonschema

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_even = {"type": "integer", "minimum": 4, "multipleOf": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "dispersion": {"oneOf": [
            {"type": "string", "enum": ["nn_unpinned", "nn_pinned"]},
            {"type": "object", "required": ["preset"], "properties": {
                "preset": {"enum": ["nn_unpinned", "nn_pinned", "custom"]},
                "omega0": _nonneg,
                "coefficients": {"type": ["object", "array"]},
            }, "additionalProperties": False},
        ]},
        "gamma0": _nonneg,
        "gamma1": _nonneg,
        "T": _nonneg,
        "t": _nonneg,
        "eps": {"type": "array", "items": _pos, "minItems": 1},
        "M": {"type": "integer", "minimum": 2},
        "block_size": {"type": "integer", "minimum": 2},
        "workers": {"type": "integer", "minimum": 1},
        "grid": {"type": "object", "additionalProperties": False, "properties": {
            "n_y": _even, "n_k": _even, "L": _pos, "eta_max": _pos}},
        "packet": {"type": "object", "additionalProperties": False, "properties": {
            "A": _num, "sigma": _pos, "y0": _num, "k_center": _num, "k_width": _pos, "symmetric": {"type": "boolean"}}},
        "probes": {"type": "array", "items": {"type": "object", "additionalProperties": False,
                                              "required": ["center", "width"], "properties": {
                                                  "center": _num, "width": _pos, "k_center": _num, "k_width": _pos}}},
        "initial": {"type": "object", "additionalProperties": False, "required": ["kind"], "properties": {
            "kind": {"enum": ["packet", "constant", "indicator", "zero"]},
            "value": _num, "a": _num, "b": _num}},
        "kinetic": {"type": "object", "additionalProperties": False, "properties": {
            "h": _pos, "method": {"enum": ["decomposition", "direct"]}, "interp": {"enum": ["positive", "monotone"]},
            "tol": _pos, "max_iter": {"type": "integer", "minimum": 1}}},
        "mc": {"type": "object", "additionalProperties": False, "properties": {
            "n_particles": {"type": "integer", "minimum": 1}, "n_blocks": {"type": "integer", "minimum": 1}}},
        "chain": {"type": "object", "additionalProperties": False, "properties": {
            "N": _even, "dt": _pos, "t_micro": _nonneg, "n_out": {"type": "integer", "minimum": 0}}},
        "coeff_method": {"enum": ["boundary", "richardson"]},
        "coeff_grid": {"enum": ["nodes", "midpoints"]},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
}

DEFAULTS = {
    "dispersion": "nn_unpinned",
    "gamma0": 0.5,
    "gamma1": 1.0,
    "T": 0.0,
    "t": 0.5,
    "eps": [1 / 32, 1 / 64, 1 / 128],
    "M": 2000,
    "block_size": 250,
    "workers": 1,
    "grid": {"n_y": 512, "n_k": 256, "L": 8.0, "eta_max": 16.0},
    "packet": {"A": 1.0, "sigma": 0.3, "y0": -0.4, "k_center": 0.25, "k_width": 0.05, "symmetric": False},
    "probes": [
        {"center": -0.4, "width": 0.3},
        {"center": 0.0, "width": 0.3},
        {"center": 0.3, "width": 0.3},
        {"center": -0.4, "width": 0.3, "k_center": 0.25, "k_width": 0.08},
        {"center": -0.8, "width": 0.4, "k_center": -0.25, "k_width": 0.08},
    ],
    "initial": {"kind": "packet"},
    "kinetic": {"h": 0.1, "method": "decomposition", "interp": "positive", "tol": 1e-10, "max_iter": 50},
    "mc": {"n_particles": 100000, "n_blocks": 8},
    "chain": {"N": 8, "t_micro": 5.0, "n_out": 10},
    "coeff_method": "boundary",
    "coeff_grid": "nodes",
    "seed": 0,
    "output_dir": "out",
}


class ConfigError(ValueError):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(raw: dict | None = None) -> dict:
    """Validate a raw config and fill defaults."""
    raw = raw or {}
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}") from None
    cfg = _merge(DEFAULTS, raw)
    if "probes" in raw:
        cfg["probes"] = copy.deepcopy(raw["probes"])
    return cfg


def load(path) -> dict:
    try:
        with open(path) as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return resolve(raw)
