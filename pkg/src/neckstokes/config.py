"""Run configuration: JSON schema, defaults and validation."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .analysis import DEFAULT_EPS, TOLERANCES, MeshParams
from .geometry import NeckGeometry
from .rigid import PHI_PRESETS, LinearDatum


class ConfigError(ValueError):
    pass


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_MATRIX = {"type": "array", "minItems": 2, "maxItems": 2,
           "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": _NUM}}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "epsilon": _POS,
                "profile": {"enum": ["circle", "quadratic"]},
                "kappa2": _POS,
                "inclusion_radius": _POS,
                "container_radius": _POS,
                "R": _POS,
                "mu": _POS,
                "mesh": {"type": "object", "additionalProperties": False,
                         "properties": {"h_min": _POS, "h_max": _POS}},
            },
        },
        "fields": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"kappa2": _POS, "n_samples": {"type": "integer", "minimum": 10}},
        },
        "phi": {
            "oneOf": [
                {"enum": sorted(PHI_PRESETS)},
                {"type": "object", "additionalProperties": False, "required": ["matrix"],
                 "properties": {"matrix": _MATRIX,
                                "offset": {"type": "array", "minItems": 2, "maxItems": 2, "items": _NUM}}},
            ]
        },
        "eps_list": {"type": "array", "minItems": 1, "items": _POS},
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"h_max": _POS, "h_min": _POS, "h_min_ratio": _POS, "c0": _POS},
        },
        "output_dir": {"type": "string"},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: ({"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
                               if isinstance(v, tuple) else _NUM) for k, v in TOLERANCES.items()},
        },
    },
}

DEFAULTS = {
    "geometry": {"epsilon": 0.04, "profile": "circle", "kappa2": 1.0, "inclusion_radius": 1.0,
                 "container_radius": 4.0, "R": 0.5, "mu": 1.0},
    "fields": {},
    "phi": "shear",
    "eps_list": list(DEFAULT_EPS),
    "mesh": {"h_max": 0.3, "h_min_ratio": 6.0, "c0": 0.25},
    "output_dir": "out",
    "tolerances": {},
}

QUICK_MESH = {"h_max": 0.5, "h_min_ratio": 4.0}


@dataclass
class RunConfig:
    geometry: dict
    phi: LinearDatum
    eps_list: list
    mesh: MeshParams
    output_dir: str = "out"
    tolerances: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def geom(self, epsilon: float | None = None) -> NeckGeometry:
        g = dict(self.geometry)
        if epsilon is not None:
            g["epsilon"] = epsilon
        return NeckGeometry.from_dict(g)

    def quick(self) -> "RunConfig":
        """First three epsilon values on coarser meshes."""
        m = MeshParams(h_max=QUICK_MESH["h_max"], h_min_ratio=QUICK_MESH["h_min_ratio"], c0=self.mesh.c0)
        return RunConfig(self.geometry, self.phi, self.eps_list[:3], m, self.output_dir,
                         self.tolerances, self.fields, self.raw)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def parse_phi(value) -> LinearDatum:
    if isinstance(value, str):
        return LinearDatum.preset(value)
    mat = tuple(tuple(float(v) for v in row) for row in value["matrix"])
    off = tuple(float(v) for v in value.get("offset", (0.0, 0.0)))
    return LinearDatum(mat, off, "inline")


def phi_flux_density(phi: LinearDatum) -> float:
    """Divergence of a linear datum; its flux through any closed curve is this times the area."""
    return float(np.trace(np.asarray(phi.matrix)))


def from_dict(data: dict) -> RunConfig:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None
    full = _merge(DEFAULTS, data)
    eps = [float(e) for e in full["eps_list"]]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("eps_list must be strictly decreasing")
    try:
        NeckGeometry.from_dict(full["geometry"])
    except ValueError as exc:
        raise ConfigError(f"geometry: {exc}") from None
    m = {**full["geometry"].get("mesh", {}), **data.get("mesh", {})}
    m = {**DEFAULTS["mesh"], **m}
    mesh = MeshParams(h_max=m.get("h_max", 0.3), h_min_ratio=m.get("h_min_ratio", 6.0),
                      c0=m.get("c0", 0.25), h_min=m.get("h_min"))
    tol = {k: tuple(v) if isinstance(v, list) else v for k, v in full["tolerances"].items()}
    return RunConfig(full["geometry"], parse_phi(full["phi"]), eps, mesh, full["output_dir"],
                     tol, full["fields"], full)


def load(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return from_dict(data)


def default() -> RunConfig:
    return from_dict({})
