"""Run configuration: JSON schema, parsing and canonical emission."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import jsonschema

from .errors import ConfigError

MODEL_KINDS = ("free_particle", "vector_boson", "electrodynamics")

_NUM = {"type": "number"}
_INT = {"type": "integer"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "time"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(MODEL_KINDS)},
                "mass": {"type": "number", "exclusiveMinimum": 0},
                "r": {"type": "integer", "minimum": 1},
                "shape": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "h": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "time": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dt", "n_steps"],
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "n_steps": {"type": "integer", "minimum": 1},
                "t0": _NUM,
                "sigma_index": {"type": "integer", "minimum": 0},
            },
        },
        "flow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"method": {"enum": ["spectral", "leapfrog"]}},
        },
        "observables": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["component", "t"],
                "properties": {
                    "label": {"type": "string"},
                    "component": {"type": "string"},
                    "site": {"type": "array", "items": _INT},
                    "t": _NUM,
                    "fiber": {"type": "integer", "minimum": 0},
                },
            },
        },
        "pairs": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0},
                      "minItems": 2, "maxItems": 2},
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rank_rtol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "bracket_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["json", "csv"]},
                            "minItems": 1, "uniqueItems": True},
            },
        },
        "seed": _INT,
    },
}


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    mass: float = 1.0
    r: int = 1
    shape: tuple = ()
    h: float = 1.0


@dataclass(frozen=True)
class TimeConfig:
    dt: float
    n_steps: int
    t0: float = 0.0
    sigma_index: int = 0

    @property
    def sigma_time(self):
        return self.t0 + self.sigma_index * self.dt

    @property
    def window(self):
        return (self.t0, self.t0 + self.n_steps * self.dt)


@dataclass(frozen=True)
class ObservableConfig:
    component: str
    t: float
    site: tuple = ()
    fiber: int = 0
    label: str = ""


@dataclass(frozen=True)
class Tolerances:
    rank_rtol: float = 1e-10
    max_iter: int = 64
    bracket_tol: float = 1e-10


@dataclass(frozen=True)
class OutputConfig:
    dir: str | None = None
    formats: tuple = ("json",)


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    time: TimeConfig
    method: str = "spectral"
    observables: tuple = ()
    pairs: tuple | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0

    def ordered_pairs(self):
        """Requested ``(i, j)`` pairs, or all ordered pairs with ``i != j``."""
        if self.pairs is not None:
            return list(self.pairs)
        n = len(self.observables)
        return [(i, j) for i in range(n) for j in range(n) if i != j]

    def to_dict(self):
        d = {
            "model": asdict(self.model),
            "time": asdict(self.time),
            "flow": {"method": self.method},
            "observables": [asdict(o) for o in self.observables],
            "tolerances": asdict(self.tolerances),
            "output": {"formats": list(self.output.formats)},
            "seed": self.seed,
        }
        if self.output.dir is not None:
            d["output"]["dir"] = self.output.dir
        d["model"]["shape"] = list(self.model.shape)
        for o in d["observables"]:
            o["site"] = list(o["site"])
        if self.pairs is not None:
            d["pairs"] = [list(p) for p in self.pairs]
        return d

    def digest(self):
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(emit_config(self).encode()).hexdigest()


def _location(err):
    path = "/".join(str(p) for p in err.absolute_path)
    return f"field '{path}'" if path else "top level"


_DEFAULT_SHAPE = {"free_particle": (), "vector_boson": (4, 4, 4), "electrodynamics": (4, 4, 4)}


def config_from_dict(data):
    """Validate a decoded JSON document and build a :class:`RunConfig`."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError(errors[0].message, _location(errors[0]))
    m = data["model"]
    kind = m["kind"]
    shape = tuple(m.get("shape", _DEFAULT_SHAPE[kind]))
    if kind == "free_particle" and shape:
        raise ConfigError("a free particle has no spatial lattice", "field 'model/shape'")
    if kind == "electrodynamics" and len(shape) != 3:
        raise ConfigError("electrodynamics needs a three-dimensional lattice", "field 'model/shape'")
    if kind != "free_particle" and not shape:
        raise ConfigError("field models need a lattice shape", "field 'model/shape'")
    model = ModelConfig(kind, float(m.get("mass", 1.0)), int(m.get("r", 1)), shape,
                        float(m.get("h", 1.0)))
    t = data["time"]
    time = TimeConfig(float(t["dt"]), int(t["n_steps"]), float(t.get("t0", 0.0)),
                      int(t.get("sigma_index", 0)))
    if time.sigma_index > time.n_steps:
        raise ConfigError("sigma_index beyond the last time step", "field 'time/sigma_index'")
    obs = []
    for i, o in enumerate(data.get("observables", [])):
        site = tuple(o.get("site", ()))
        if len(site) != len(shape):
            raise ConfigError(f"site needs {len(shape)} coordinates", f"field 'observables/{i}/site'")
        obs.append(ObservableConfig(o["component"], float(o["t"]), site, int(o.get("fiber", 0)),
                                    o.get("label", "")))
    pairs = data.get("pairs")
    if pairs is not None:
        for i, (a, b) in enumerate(pairs):
            if a >= len(obs) or b >= len(obs):
                raise ConfigError("pair refers to a missing observable", f"field 'pairs/{i}'")
        pairs = tuple(tuple(p) for p in pairs)
    tol = data.get("tolerances", {})
    tolerances = Tolerances(float(tol.get("rank_rtol", 1e-10)), int(tol.get("max_iter", 64)),
                            float(tol.get("bracket_tol", 1e-10)))
    out = data.get("output", {})
    output = OutputConfig(out.get("dir"), tuple(out.get("formats", ("json",))))
    method = data.get("flow", {}).get("method", "spectral")
    return RunConfig(model, time, method, tuple(obs), pairs, tolerances, output,
                     int(data.get("seed", 0)))


def parse_config(text):
    """Parse JSON text; syntax errors report the line and column."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return config_from_dict(data)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def emit_config(config):
    """Canonical JSON text; ``parse_config(emit_config(c)) == c``."""
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"
