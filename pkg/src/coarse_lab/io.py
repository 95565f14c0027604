"""JSON persistence for spaces, groups, witnesses, operators and certificates.

Every document is validated against a JSON schema before it is interpreted;
violations raise :class:`SchemaError` carrying a JSON pointer.  Points are
always referred to by label.  Floats are written with Python's shortest
round-trip representation, so ``load(save(x)) == x`` bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np
import scipy.sparse as sp

from .core import Entourage, Space
from .errors import InputError, SchemaError, UnknownPointError
from .gallery import FiniteGroup
from .onl import BetaCertificate
from .roe import BandedOperator
from .witness import FolnerWitness, KernelMatrix, L1Profile, L2Profile

__all__ = [
    "SCHEMAS",
    "read_json",
    "write_json",
    "dumps",
    "validate",
    "validate_schema",
    "space_to_doc",
    "space_from_doc",
    "group_to_doc",
    "group_from_doc",
    "witness_to_doc",
    "witness_from_doc",
    "operator_to_doc",
    "operator_from_doc",
    "certificate_to_doc",
    "certificate_from_doc",
]

_label = {"type": ["string", "integer"]}
_pair = {"type": "array", "items": _label, "minItems": 2, "maxItems": 2}
_pairs = {"type": "array", "items": _pair}
_scalar = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_triples = {
    "type": "array",
    "items": {
        "type": "array",
        "prefixItems": [_label, _label, {"type": "number"}, {"type": "number"}],
        "minItems": 4,
        "maxItems": 4,
    },
}
_support = {
    "oneOf": [
        {"type": "string"},
        {"type": "object", "properties": {"pairs": _pairs}, "required": ["pairs"], "additionalProperties": False},
    ]
}
_vector_map = {"type": "object", "additionalProperties": _scalar}

SCHEMAS = {
    "space": {
        "type": "object",
        "properties": {
            "points": {"type": "array", "items": _label},
            "entourages": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {"name": {"type": "string"}, "pairs": _pairs},
                    "required": ["name", "pairs"],
                    "additionalProperties": False,
                },
            },
        },
        "required": ["points", "entourages"],
        "additionalProperties": False,
    },
    "group": {
        "type": "object",
        "properties": {
            "elements": {"type": "array", "items": _label, "minItems": 1},
            "table": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
            "generators": {"type": "array", "items": {"type": "integer"}},
        },
        "required": ["elements", "table", "generators"],
        "additionalProperties": False,
    },
    "witness": {
        "type": "object",
        "properties": {
            "type": {"enum": ["folner", "l1", "l2", "kernel"]},
            "support": _support,
            "data": {},
        },
        "required": ["type", "support", "data"],
        "additionalProperties": False,
        "allOf": [
            {
                "if": {"properties": {"type": {"const": "folner"}}},
                "then": {
                    "properties": {
                        "data": {
                            "type": "object",
                            "properties": {
                                "variant": {"enum": ["diagonal", "nonempty"]},
                                "sections": {
                                    "type": "object",
                                    "additionalProperties": {
                                        "type": "object",
                                        "additionalProperties": {"type": "integer", "minimum": 0},
                                    },
                                },
                            },
                            "required": ["variant", "sections"],
                            "additionalProperties": False,
                        }
                    }
                },
            },
            {
                "if": {"properties": {"type": {"enum": ["l1", "l2"]}}},
                "then": {"properties": {"data": {"type": "object", "additionalProperties": _vector_map}}},
            },
            {
                "if": {"properties": {"type": {"const": "kernel"}}},
                "then": {"properties": {"data": _triples}},
            },
        ],
    },
    "operator": {
        "type": "object",
        "properties": {"band": _support, "triples": _triples},
        "required": ["band", "triples"],
        "additionalProperties": False,
    },
    "certificate": {
        "type": "object",
        "properties": {
            "type": {"const": "beta"},
            "constant": {"type": "number"},
            "window": _support,
            "center": _label,
            "ratio": {"type": "number"},
            "localization": {"enum": ["column", "block"]},
            "vector": _vector_map,
        },
        "required": ["type", "constant", "window", "center", "ratio", "vector"],
        "additionalProperties": False,
    },
}


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def validate(doc, kind: str) -> None:
    """Raise :class:`SchemaError` for the most relevant violation of schema ``kind``."""
    validate_schema(doc, SCHEMAS[kind])


def validate_schema(doc, schema: dict) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = list(validator.iter_errors(doc))
    if not errors:
        return
    err = jsonschema.exceptions.best_match(errors)
    # a misspelt key shows up as "required" plus "additionalProperties" at the
    # same place; the latter names the offending key
    for other in errors:
        if other.validator == "additionalProperties" and list(other.absolute_path) == list(err.absolute_path):
            err = other
            break
    path = list(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            raise SchemaError(_pointer(path + [extra[0]]), f"unexpected key {extra[0]!r}")
    raise SchemaError(_pointer(path), err.message)


def dumps(doc) -> str:
    return json.dumps(doc, indent=1, ensure_ascii=False) + "\n"


def write_json(doc, path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8", newline="\n")


def read_json(path, kind: str | None = None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if kind is not None:
        validate(doc, kind)
    return doc


def _id(space: Space, label) -> int:
    try:
        return space.index[str(label)]
    except KeyError:
        raise UnknownPointError(f"unknown point label {label!r}") from None


def _pairs_from_labels(space: Space, pairs) -> Entourage:
    return Entourage(space, [(_id(space, x), _id(space, y)) for x, y in pairs])


def _value(v):
    if isinstance(v, list):
        return complex(v[0], v[1])
    return float(v)


def _encode(v):
    v = complex(v) if np.iscomplexobj(v) else float(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _resolve_support(space: Space, entourages: dict, ref, pointer: str) -> Entourage:
    if isinstance(ref, dict):
        return _pairs_from_labels(space, ref["pairs"])
    if ref not in entourages:
        raise SchemaError(pointer, f"unknown entourage {ref!r}")
    return entourages[ref]


def _support_ref(t: Entourage, name: str | None):
    return name if name is not None else {"pairs": t.label_pairs()}


def space_to_doc(space: Space, entourages: dict) -> dict:
    return {
        "points": list(space.points),
        "entourages": [{"name": name, "pairs": t.label_pairs()} for name, t in entourages.items()],
    }


def space_from_doc(doc) -> tuple[Space, dict]:
    validate(doc, "space")
    space = Space(doc["points"])
    ents = {}
    for i, e in enumerate(doc["entourages"]):
        if e["name"] in ents:
            raise SchemaError(f"/entourages/{i}/name", f"duplicate entourage name {e['name']!r}")
        ents[e["name"]] = _pairs_from_labels(space, e["pairs"])
    return space, ents


def group_to_doc(g: FiniteGroup) -> dict:
    return {
        "elements": list(g.elements),
        "table": np.asarray(g.table).tolist(),
        "generators": list(g.generators),
    }


def group_from_doc(doc) -> FiniteGroup:
    validate(doc, "group")
    return FiniteGroup(tuple(str(e) for e in doc["elements"]), np.array(doc["table"], dtype=np.int64), tuple(doc["generators"]))


def _vectors_to_map(space: Space, vectors: np.ndarray) -> dict:
    pts = space.points
    out = {}
    for x in range(space.n):
        nz = np.nonzero(vectors[x])[0]
        out[pts[x]] = {pts[z]: _encode(vectors[x, z]) for z in nz}
    return out


def _map_to_vectors(space: Space, data: dict) -> np.ndarray:
    cplx = any(isinstance(v, list) for row in data.values() for v in row.values())
    out = np.zeros((space.n, space.n), dtype=complex if cplx else float)
    for x, row in data.items():
        i = _id(space, x)
        for z, v in row.items():
            out[i, _id(space, z)] = _value(v)
    return out


def _triples_of(space: Space, matrix) -> list:
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    pts = space.points
    out = []
    for k in order:
        v = complex(coo.data[k])
        out.append([pts[coo.row[k]], pts[coo.col[k]], v.real, v.imag])
    return out


def _matrix_of(space: Space, triples) -> np.ndarray:
    cplx = any(t[3] != 0 for t in triples)
    out = np.zeros((space.n, space.n), dtype=complex if cplx else float)
    for x, y, re, im in triples:
        out[_id(space, x), _id(space, y)] = complex(re, im) if cplx else re
    return out


def witness_to_doc(w, support_name: str | None = None) -> dict:
    """``support_name`` refers to an entourage of the space file; ``None`` inlines the pairs."""
    ref = _support_ref(w.support, support_name)
    space = w.support.space
    if isinstance(w, FolnerWitness):
        pts = space.points
        sections = {}
        for x in range(space.n):
            row = w.counts.getrow(x).tocoo()
            sections[pts[x]] = {pts[y]: int(c) for y, c in sorted(zip(row.col, row.data))}
        return {"type": "folner", "support": ref, "data": {"variant": w.variant, "sections": sections}}
    if isinstance(w, L1Profile):
        return {"type": "l1", "support": ref, "data": _vectors_to_map(space, w.vectors)}
    if isinstance(w, L2Profile):
        return {"type": "l2", "support": ref, "data": _vectors_to_map(space, w.vectors)}
    if isinstance(w, KernelMatrix):
        return {"type": "kernel", "support": ref, "data": _triples_of(space, w.k)}
    raise InputError(f"cannot serialise {type(w).__name__} as a witness")


def witness_from_doc(doc, space: Space, entourages: dict):
    validate(doc, "witness")
    support = _resolve_support(space, entourages, doc["support"], "/support")
    kind, data = doc["type"], doc["data"]
    if kind == "folner":
        counts = {x: sec for x, sec in data["sections"].items()}
        rows, cols, vals = [], [], []
        for x, sec in counts.items():
            for y, c in sec.items():
                rows.append(_id(space, x))
                cols.append(_id(space, y))
                vals.append(c)
        mat = sp.csr_matrix((vals, (rows, cols)), shape=(space.n, space.n), dtype=np.int64)
        return FolnerWitness(support, mat, data["variant"])
    if kind == "l1":
        return L1Profile(_map_to_vectors(space, data), support)
    if kind == "l2":
        return L2Profile(_map_to_vectors(space, data), support)
    return KernelMatrix(_matrix_of(space, data), support)


def operator_to_doc(b: BandedOperator, band_name: str | None = None) -> dict:
    return {"band": _support_ref(b.band, band_name), "triples": _triples_of(b.space, b.entries)}


def operator_from_doc(doc, space: Space, entourages: dict) -> BandedOperator:
    validate(doc, "operator")
    band = _resolve_support(space, entourages, doc["band"], "/band")
    return BandedOperator(band, sp.csr_matrix(_matrix_of(space, doc["triples"])))


def certificate_to_doc(cert: BetaCertificate, window_name: str | None = None) -> dict:
    space = cert.window.space
    pts = space.points
    nz = np.nonzero(cert.vector)[0]
    return {
        "type": "beta",
        "constant": float(cert.constant),
        "window": _support_ref(cert.window, window_name),
        "center": pts[cert.center],
        "ratio": float(cert.ratio),
        "localization": cert.localization,
        "vector": {pts[z]: _encode(cert.vector[z]) for z in nz},
    }


def certificate_from_doc(doc, space: Space, entourages: dict) -> BetaCertificate:
    validate(doc, "certificate")
    window = _resolve_support(space, entourages, doc["window"], "/window")
    values = doc["vector"]
    cplx = any(isinstance(v, list) for v in values.values())
    vec = np.zeros(space.n, dtype=complex if cplx else float)
    for z, v in values.items():
        vec[_id(space, z)] = _value(v)
    return BetaCertificate(
        doc["constant"], window, vec, _id(space, doc["center"]), doc["ratio"], doc.get("localization", "column")
    )
