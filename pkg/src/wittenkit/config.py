"""Run configuration: JSON file validated against a schema, with defaults."""
from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

DEFAULT_TOLERANCES = {
    "residual_rel": 1e-6,
    "curvature": 1e-10,
    "greens_mc": 1e-3,
    "greens_product": 1e-8,
    "s_product": 1e-10,
    "spectrum": 1e-6,
    "partial_wave": 1e-10,
    "ratio_spread": 10.0,
}

_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "rho"],
    "properties": {
        "label": {"type": "string"},
        "n": {"type": "integer", "minimum": 3, "maximum": 8},
        "rho": _positive,
        "C_n": _positive,
        "scale": _positive,
        "interior": {
            "oneOf": [
                {"type": "string", "enum": ["exact", "capped"]},
                {"type": "object", "required": ["kind"], "additionalProperties": False,
                 "properties": {"kind": {"enum": ["exact", "capped", "polynomial"]},
                                "core": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                                "coeffs": {"type": "array", "items": _number, "minItems": 1}}},
            ]
        },
        "modes": {"type": "array", "items": {
            "type": "object", "required": ["l", "coeffs"], "additionalProperties": False,
            "properties": {"l": {"enum": [1, 2]}, "coeffs": {"type": "array"},
                           "direction": {"type": "array", "items": _number}}}},
        "mollifier_width": {"oneOf": [_positive, {"type": "null"}]},
        "tolerances": {"type": "object", "additionalProperties": _positive,
                       "propertyNames": {"enum": sorted(DEFAULT_TOLERANCES)}},
        "mesh": {"type": "object", "additionalProperties": False, "properties": {
            "spectrum": {"type": "integer", "minimum": 64},
            "max_spectrum": {"type": "integer", "minimum": 256},
            "k_max": {"type": "integer", "minimum": 2},
            "curvature_grid": {"type": "integer", "minimum": 10},
            "mc_samples": {"type": "integer", "minimum": 1000},
            "angular_order": {"type": "integer", "minimum": 4}}},
        "sweep": {"type": "object", "additionalProperties": False, "properties": {
            "scales": {"type": "array", "items": _positive, "minItems": 1},
            "cap_levels": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                           "minItems": 1}}},
        "greens": {"type": "object", "additionalProperties": False, "properties": {
            "n": {"type": "integer", "minimum": 3, "maximum": 6},
            "sigma": _positive, "R": _positive,
            "points": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                       "minItems": 1},
            "methods": {"type": "array", "items": {"enum": ["mc", "product"]}, "minItems": 1}}},
        "out": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    },
}


class ConfigError(ValueError):
    """Malformed or invalid configuration; the message is anchored to a file line."""


@dataclass
class RunConfig:
    n: int
    rho: float
    C_n: float = 3.0
    scale: float = 1.0
    interior: object = "capped"
    modes: list = field(default_factory=list)
    mollifier_width: float | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    mesh: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    greens: dict = field(default_factory=dict)
    label: str = ""
    out: str | None = None
    seed: int = 0
    source: dict = field(default_factory=dict)

    def mesh_value(self, key):
        return self.mesh.get(key, {"spectrum": 800, "max_spectrum": 25600, "k_max": 2, "curvature_grid": 1000,
                                   "mc_samples": 1_000_000, "angular_order": 8}[key])

    def to_json(self) -> dict:
        out = copy.deepcopy(self.source)
        out["tolerances"] = dict(self.tolerances)
        out["seed"] = self.seed
        return out


def _line_of(text: str, path) -> int:
    """Best-effort line number of the JSON key at the end of ``path``."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return 1
    m = re.search(r'"%s"\s*:' % re.escape(keys[-1]), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def parse_config(text: str, name: str = "config") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{name}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.path) or "<root>"
        raise ConfigError(f"{name}:{_line_of(text, list(e.path))}: {where}: {e.message}")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(data.get("tolerances", {}))
    return RunConfig(
        n=data["n"], rho=float(data["rho"]), C_n=float(data.get("C_n", 3.0)), scale=float(data.get("scale", 1.0)),
        interior=data.get("interior", "capped"), modes=list(data.get("modes", [])),
        mollifier_width=data.get("mollifier_width"), tolerances=tol, mesh=dict(data.get("mesh", {})),
        sweep=dict(data.get("sweep", {})), greens=dict(data.get("greens", {})), label=data.get("label", ""),
        out=data.get("out"), seed=int(data.get("seed", 0)), source=data)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}:0: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    for item in overrides or []:
        key, sep, val = item.partition("=")
        if not sep or key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"--tol-override:1: unknown tolerance {key!r}")
        try:
            v = float(val)
        except ValueError:
            raise ConfigError(f"--tol-override:1: {key} needs a number, got {val!r}") from None
        if not v > 0:
            raise ConfigError(f"--tol-override:1: {key} must be positive")
        cfg.tolerances[key] = v
    return cfg
