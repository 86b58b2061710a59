"""JSON documents for labeled tensors, instruments, process matrices and reports.

Complex numbers are stored as ``[re, im]`` pairs.  Floats are written with
Python's shortest round-trip repr, so save/load is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .channels import Instrument
from .errors import ParseError
from .process import ProcessMatrix
from .states import DensityVector, _tensor
from .tensor import LabeledTensor, Party, SlotLabel, Stage, Variance

TENSOR_KIND = "labeled_tensor"
INSTRUMENT_KIND = "instrument"
W_KIND = "process_matrix"


# -- complex arrays --------------------------------------------------------------

def _pairs(a: np.ndarray) -> list[list[float]]:
    flat = np.asarray(a, dtype=np.complex128).ravel()
    return [[float(z.real), float(z.imag)] for z in flat]


def _complex(pairs, field: str, size: int | None = None) -> np.ndarray:
    if not isinstance(pairs, list):
        raise ParseError("expected a list of [re, im] pairs", field)
    out = np.empty(len(pairs), dtype=np.complex128)
    for i, p in enumerate(pairs):
        if (not isinstance(p, list) or len(p) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in p)):
            raise ParseError("entry is not a [re, im] pair of numbers", f"{field}[{i}]")
        out[i] = complex(p[0], p[1])
    if size is not None and out.size != size:
        raise ParseError(f"expected {size} entries, got {out.size}", field)
    return out


def _require(doc: dict, key: str, where: str = ""):
    if not isinstance(doc, dict) or key not in doc:
        raise ParseError("missing field", f"{where}{key}")
    return doc[key]


# -- labeled tensors ------------------------------------------------------------------

def tensor_to_dict(t) -> dict:
    t = _tensor(t)
    slots = [{"party": lab.party.value, "stage": lab.stage.value, "variance": lab.variance.value,
              "dagger": lab.dagger, "dim": d} for lab, d in t.slots]
    return {"kind": TENSOR_KIND, "slots": slots, "data": _pairs(t.data)}


def tensor_from_dict(doc: dict) -> LabeledTensor:
    slots = _require(doc, "slots")
    if not isinstance(slots, list):
        raise ParseError("expected a list", "slots")
    labels, dims = [], []
    for i, s in enumerate(slots):
        where = f"slots[{i}]."
        try:
            labels.append(SlotLabel(Party(_require(s, "party", where)), Stage(_require(s, "stage", where)),
                                    Variance(_require(s, "variance", where)),
                                    bool(_require(s, "dagger", where))))
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), f"slots[{i}]") from None
        d = _require(s, "dim", where)
        if not isinstance(d, int) or d < 1:
            raise ParseError("dim must be a positive integer", f"{where}dim")
        dims.append(d)
    data = _complex(_require(doc, "data"), "data", int(np.prod(dims, dtype=int)))
    try:
        return LabeledTensor(labels, data.reshape(dims))
    except ValueError as exc:
        raise ParseError(str(exc), "slots") from None


# -- instruments --------------------------------------------------------------------------

def instrument_to_dict(inst: Instrument) -> dict:
    return {"kind": INSTRUMENT_KIND, "input_dim": inst.input_dim, "output_dim": inst.output_dim,
            "outcomes": [[_pairs(E) for E in group] for group in inst.outcomes]}


def instrument_from_dict(doc: dict, check: bool = True) -> Instrument:
    d_in, d_out = _require(doc, "input_dim"), _require(doc, "output_dim")
    for name, d in (("input_dim", d_in), ("output_dim", d_out)):
        if not isinstance(d, int) or d < 1:
            raise ParseError("must be a positive integer", name)
    outcomes = _require(doc, "outcomes")
    if not isinstance(outcomes, list) or not outcomes:
        raise ParseError("expected a non-empty list", "outcomes")
    groups = []
    for a, group in enumerate(outcomes):
        if not isinstance(group, list) or not group:
            raise ParseError("expected a non-empty list of matrices", f"outcomes[{a}]")
        groups.append([_complex(E, f"outcomes[{a}][{mu}]", d_in * d_out).reshape(d_out, d_in)
                       for mu, E in enumerate(group)])
    return Instrument(groups, check=check)


# -- process matrices ----------------------------------------------------------------------

def w_to_dict(W: ProcessMatrix) -> dict:
    return {"kind": W_KIND, "dims": list(W.dims), "data": _pairs(W.matrix)}


def w_from_dict(doc: dict) -> ProcessMatrix:
    dims = _require(doc, "dims")
    if not (isinstance(dims, list) and len(dims) == 4 and all(isinstance(d, int) and d > 0 for d in dims)):
        raise ParseError("expected four positive integers", "dims")
    n = int(np.prod(dims))
    data = _complex(_require(doc, "data"), "data", n * n)
    return ProcessMatrix(data.reshape(n, n), dims)


# -- documents ----------------------------------------------------------------------------------

def to_dict(obj) -> dict:
    if isinstance(obj, ProcessMatrix):
        return w_to_dict(obj)
    if isinstance(obj, Instrument):
        return instrument_to_dict(obj)
    if isinstance(obj, (LabeledTensor, DensityVector)):
        return tensor_to_dict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_dict(doc: Any):
    """Dispatch on ``kind``; documents without one are read by their fields."""
    if not isinstance(doc, dict):
        raise ParseError("top-level value must be an object", "")
    kind = doc.get("kind")
    if kind == W_KIND or (kind is None and "dims" in doc):
        return w_from_dict(doc)
    if kind == INSTRUMENT_KIND or (kind is None and "outcomes" in doc):
        return instrument_from_dict(doc)
    if kind == TENSOR_KIND or (kind is None and "slots" in doc):
        return tensor_from_dict(doc)
    raise ParseError(f"unknown document kind {kind!r}", "kind")


def dumps(obj) -> str:
    doc = obj if isinstance(obj, dict) else to_dict(obj)
    return json.dumps(doc, allow_nan=False) + "\n"


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, "document", _byte_offset(text, exc.pos)) from None
    try:
        return from_dict(doc)
    except ParseError as exc:
        if exc.offset is None and exc.field:
            key = exc.field.split(".")[-1].split("[")[0]
            pos = text.find(f'"{key}"')
            if pos < 0:  # missing field: point at the end of the object
                pos = max(text.rfind("}"), 0)
            offset = _byte_offset(text, pos)
            raise ParseError(str(exc).split("; ")[0], exc.field, offset) from None
        raise


def save(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def load(path):
    return loads(Path(path).read_text())
