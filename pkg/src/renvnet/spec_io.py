"""Spec-file loading and report serialisation.

Spec files are JSON documents tagged ``"schema": "renvnet.spec/1"``; the
layout is described in ``docs/schema.md``.  Structure is checked with a
JSON Schema first (errors name the offending field), then every matrix
goes through the same validators the library uses.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .environment import EnvironmentSpec
from .errors import DimensionError, SchemaError, ValidationError
from .jackson import NetworkSpec, ServiceRateFunction

SPEC_SCHEMA_ID = "renvnet.spec/1"
REPORT_SCHEMA_ID = "renvnet.report/1"

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}
_rate = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {"type": "object", "required": ["tail"], "additionalProperties": False,
         "properties": {"table": _vec, "tail": {"type": "number", "exclusiveMinimum": 0}}},
        {"type": "object", "required": ["servers", "rate"], "additionalProperties": False,
         "properties": {"servers": {"type": "integer", "minimum": 1},
                        "rate": {"type": "number", "exclusiveMinimum": 0}}},
    ]
}
_mode = {"enum": ["skipping", "reflection", "user_supplied"]}

SPEC_SCHEMA = {
    "type": "object",
    "required": ["schema", "network"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SPEC_SCHEMA_ID},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "mode": _mode,
        "network": {
            "type": "object",
            "required": ["lambda", "mu"],
            "additionalProperties": False,
            "properties": {
                "lambda": _vec,
                "routing": _mat,
                "internal": _mat,
                "mu": {"type": "array", "items": _rate, "minItems": 1},
            },
            "oneOf": [{"required": ["routing"]}, {"required": ["internal"]}],
        },
        "capacity": {
            "type": "object",
            "required": ["gamma"],
            "additionalProperties": False,
            "properties": {
                "gamma": _vec,
                "kernel": _mat,
                "frozen_law": {
                    "oneOf": [
                        {"const": "marginal"},
                        {"type": "array", "minItems": 1, "items": {
                            "type": "object", "required": ["state", "p"], "additionalProperties": False,
                            "properties": {"state": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                                           "p": _num}}},
                    ]
                },
            },
        },
        "environment": {
            "type": "object",
            "required": ["V", "gamma"],
            "additionalProperties": False,
            "properties": {
                "labels": {"type": "array", "items": {"type": "string"}},
                "V": _mat,
                "R": {"type": "array", "items": {"oneOf": [_mat, {"type": "null"}]}},
                "gamma": _mat,
                "kernels": {"type": "array", "items": _mat},
            },
        },
        "checks": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "box": {"type": "integer", "minimum": 0},
                "env_box": {"type": "integer", "minimum": 0},
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "events": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "bound": {"type": "integer", "minimum": 0},
            },
        },
    },
}


@dataclass(frozen=True)
class SpecDocument:
    name: str
    network: NetworkSpec
    mode: str = "skipping"
    gamma: Optional[np.ndarray] = None
    kernel: Optional[np.ndarray] = None
    frozen_law: object = None
    environment: Optional[EnvironmentSpec] = None
    box: int = 6
    env_box: int = 5
    events: int = 100_000
    seed: int = 0
    bound: int = 20
    source: Optional[str] = None


def _json_path(err) -> str:
    path = "$"
    for p in err.absolute_path:
        path += f"[{p}]" if isinstance(p, int) else f".{p}"
    return path


def _rate_fn(x) -> ServiceRateFunction:
    if isinstance(x, (int, float)):
        return ServiceRateFunction.constant(x)
    if "servers" in x:
        return ServiceRateFunction.multi_server(x["servers"], x["rate"])
    return ServiceRateFunction(tuple(x.get("table", ())), x["tail"])


def _square(m, what):
    a = np.asarray(m, dtype=float) if all(len(r) == len(m[0]) for r in m) else None
    if a is None or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{what} must be square")
    return a


def spec_from_dict(doc: dict, source: Optional[str] = None) -> SpecDocument:
    """Validate a decoded spec document and build the library objects."""
    validator = jsonschema.Draft202012Validator(SPEC_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise SchemaError(e.message, _json_path(e))
    net = doc["network"]
    lam = net["lambda"]
    J = len(lam)
    mu = tuple(_rate_fn(x) for x in net["mu"])
    if len(mu) != J:
        raise DimensionError(f"network.mu lists {len(mu)} nodes, lambda lists {J}")
    if "routing" in net:
        r = _square(net["routing"], "network.routing")
        if r.shape[0] != J + 1:
            raise DimensionError(f"network.routing must be {J + 1}x{J + 1} for {J} nodes")
        spec = NetworkSpec(lam, r, mu)
    else:
        P = _square(net["internal"], "network.internal")
        if P.shape[0] != J:
            raise DimensionError(f"network.internal must be {J}x{J}")
        spec = NetworkSpec.from_internal(lam, P, mu)
    mode = doc.get("mode", "skipping")
    kw = {}
    cap = doc.get("capacity")
    if cap is not None:
        gamma = np.asarray(cap["gamma"], dtype=float)
        if gamma.size != J:
            raise DimensionError(f"capacity.gamma has {gamma.size} entries for {J} nodes")
        kw["gamma"] = gamma
        if "kernel" in cap:
            k = _square(cap["kernel"], "capacity.kernel")
            if k.shape[0] != J + 1:
                raise DimensionError(f"capacity.kernel must be {J + 1}x{J + 1}")
            kw["kernel"] = k
        law = cap.get("frozen_law")
        if isinstance(law, list):
            law = {tuple(item["state"]): item["p"] for item in law}
        kw["frozen_law"] = law
    env = doc.get("environment")
    if env is not None:
        V = _square(env["V"], "environment.V")
        K = V.shape[0]
        R_in = env.get("R") or [None] * J
        if len(R_in) != J:
            raise DimensionError(f"environment.R lists {len(R_in)} nodes, network has {J}")
        R = tuple(np.eye(K) if Rj is None else _square(Rj, f"environment.R[{j}]") for j, Rj in enumerate(R_in))
        gam = np.asarray(env["gamma"], dtype=float)
        if gam.shape != (K, J):
            raise DimensionError(f"environment.gamma must be {K}x{J}")
        kernels = None
        if "kernels" in env:
            kernels = tuple(_square(k, f"environment.kernels[{i}]") for i, k in enumerate(env["kernels"]))
        kw["environment"] = EnvironmentSpec(V, R, gam, mode, tuple(env.get("labels", ())), kernels)
    checks = doc.get("checks", {})
    sim = doc.get("simulation", {})
    return SpecDocument(
        name=doc.get("name", source or "spec"), network=spec, mode=mode,
        box=checks.get("box", 6), env_box=checks.get("env_box", 5),
        events=sim.get("events", 100_000), seed=sim.get("seed", 0), bound=sim.get("bound", 20),
        source=source, **kw)


def bundled_specs() -> list:
    return sorted(p.name[:-5] for p in resources.files("renvnet").joinpath("specs").iterdir()
                  if p.name.endswith(".json"))


def resolve_path(path) -> Path:
    """The file itself if it exists, else a bundled spec of that name."""
    p = Path(path)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    bundled = resources.files("renvnet").joinpath("specs", stem + ".json")
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no such spec file: {path}")


def parse_spec(path) -> SpecDocument:
    p = resolve_path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return spec_from_dict(doc, str(p))


def to_jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    return x


def dump_report(report: dict, path) -> None:
    """Write a report; floats are emitted with shortest round-trip repr."""
    body = {"schema": REPORT_SCHEMA_ID, **to_jsonable(report)}
    Path(path).write_text(json.dumps(body, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def load_report(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema") != REPORT_SCHEMA_ID:
        raise ValidationError(f"not a {REPORT_SCHEMA_ID} document")
    return doc
