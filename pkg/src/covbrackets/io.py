"""Serialization of systems, sections and bracket tables."""

from __future__ import annotations

import csv
import io as _io
import json
import struct

import numpy as np

from .ddw import DiscretizedSection
from .errors import ShapeMismatch, ValidationError
from .presymp import PresymplecticSystem, QuadraticHamiltonian

_MAGIC = b"CBSEC1\0\0"


def matrix_to_json(m):
    m = np.asarray(m, dtype=np.float64)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "data": m.tolist()}


def matrix_from_json(obj):
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        data = np.asarray(obj["data"], dtype=np.float64).reshape(rows, cols)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix: {exc}") from exc
    return data


def system_to_json(system):
    h = system.hamiltonian
    return {
        "dim": system.dim,
        "omega": matrix_to_json(system.omega),
        "hamiltonian": {"Q": matrix_to_json(h.Q), "b": h.b.tolist(), "c": h.c},
        "metadata": dict(system.metadata),
    }


def system_from_json(obj):
    h = obj["hamiltonian"]
    ham = QuadraticHamiltonian(matrix_from_json(h["Q"]), h.get("b"), h.get("c", 0.0))
    system = PresymplecticSystem(matrix_from_json(obj["omega"]), ham, obj.get("metadata", {}))
    if "dim" in obj and int(obj["dim"]) != system.dim:
        raise ShapeMismatch("declared dimension does not match the matrices")
    return system


def section_to_json(section):
    return {
        "phi": {"shape": list(section.phi.shape), "data": section.phi.ravel().tolist()},
        "momenta": {"shape": list(section.momenta.shape), "data": section.momenta.ravel().tolist()},
    }


def section_from_json(obj):
    def arr(key):
        shape = tuple(obj[key]["shape"])
        data = np.asarray(obj[key]["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise ShapeMismatch(f"{key}: {data.size} values for shape {shape}")
        return data.reshape(shape)

    return DiscretizedSection(arr("phi"), arr("momenta"))


def write_section_binary(section, fh):
    """Flat binary: magic, two shape headers, then row-major little-endian float64."""
    fh.write(_MAGIC)
    for a in (section.phi, section.momenta):
        fh.write(struct.pack("<I", a.ndim))
        fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
    for a in (section.phi, section.momenta):
        fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_section_binary(fh):
    if fh.read(len(_MAGIC)) != _MAGIC:
        raise ValidationError("not a section file")
    shapes = []
    for _ in range(2):
        (ndim,) = struct.unpack("<I", fh.read(4))
        shapes.append(struct.unpack(f"<{ndim}Q", fh.read(8 * ndim)))
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        buf = fh.read(8 * count)
        if len(buf) != 8 * count:
            raise ValidationError("truncated section payload")
        arrays.append(np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64))
    return DiscretizedSection(*arrays)


BRACKET_FIELDS = ("pair", "f", "g", "value", "error")


def brackets_to_csv(rows):
    """CSV text for bracket rows (dicts with the keys of ``BRACKET_FIELDS``)."""
    out = _io.StringIO()
    writer = csv.DictWriter(out, fieldnames=BRACKET_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        r = dict(row)
        if r.get("value") is not None:
            r["value"] = repr(float(r["value"]))
        writer.writerow({k: ("" if r.get(k) is None else r[k]) for k in BRACKET_FIELDS})
    return out.getvalue()


def brackets_from_csv(text):
    rows = []
    for r in csv.DictReader(_io.StringIO(text)):
        rows.append({
            "pair": int(r["pair"]),
            "f": r["f"],
            "g": r["g"],
            "value": float(r["value"]) if r["value"] else None,
            "error": r["error"] or None,
        })
    return rows


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
