"""Reading and writing operators and sequences (JSON, Matrix Market, presets)."""
import json
import math
from pathlib import Path
import re

import numpy as np
import scipy.io

from .exceptions import PreconditionError, SchemaError
from .majorants import RECIPES, MajorantSequence
from .operators import DenseOperator, GrowthProfile, WeightedShift

_PRESET = re.compile(r"^\s*(bergman|unitary|scalar|diag)\s*(?:\((.*)\))?\s*$")


def preset(name):
    """Named operators: ``bergman``, ``unitary(d)``, ``scalar(a)``, ``diag(a,b)``.

    ``unitary(d)`` is the cyclic shift on ``C^d``.
    """
    m = _PRESET.match(name)
    if m is None:
        raise SchemaError("operator", f"unknown preset {name!r}")
    kind, args = m.group(1), m.group(2)
    try:
        vals = [complex(a.replace(" ", "").replace("i", "j")) for a in args.split(",")] if args else []
    except ValueError:
        raise SchemaError("operator", f"bad preset arguments in {name!r}") from None
    if kind == "bergman":
        if vals:
            raise SchemaError("operator", "bergman takes no arguments")
        return WeightedShift.bergman()
    if kind == "unitary":
        if len(vals) != 1 or vals[0].imag or vals[0].real < 1 or vals[0].real % 1:
            raise SchemaError("operator", "unitary(d) needs a positive integer d")
        d = int(vals[0].real)
        return DenseOperator(np.roll(np.eye(d), 1, axis=0))
    if kind == "scalar":
        if len(vals) != 1:
            raise SchemaError("operator", "scalar(a) takes one argument")
        return DenseOperator(np.array([[vals[0]]]))
    if len(vals) != 2:
        raise SchemaError("operator", "diag(a,b) takes two arguments")
    return DenseOperator(np.diag(vals))


def _complex_entry(v, field):
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    raise SchemaError(field, f"expected a number or [re, im], got {v!r}")


def operator_from_dict(doc):
    if not isinstance(doc, dict):
        raise SchemaError("operator", "expected an object")
    kind = doc.get("kind")
    if kind == "dense":
        data = doc.get("data")
        if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
            raise SchemaError("data", "expected a non-empty list of rows")
        rows = [[_complex_entry(v, f"data[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(data)]
        if any(len(r) != len(rows) for r in rows):
            raise SchemaError("data", "matrix must be square")
        return DenseOperator(np.array(rows, dtype=np.complex128))
    if kind == "weighted_shift":
        w = doc.get("weights")
        monotone = doc.get("monotone", "none")
        if monotone not in ("increasing", "decreasing", "none"):
            raise SchemaError("monotone", f"invalid value {monotone!r}")
        if not isinstance(w, dict):
            raise SchemaError("weights", "expected {'named': ...} or {'list': [...], 'tail': 'constant'}")
        if "named" in w:
            if w["named"] != "bergman":
                raise SchemaError("weights.named", f"unknown weight sequence {w['named']!r}")
            return WeightedShift.bergman()
        lst = w.get("list")
        if not isinstance(lst, list) or not lst:
            raise SchemaError("weights.list", "expected a non-empty list")
        if w.get("tail", "constant") != "constant":
            raise SchemaError("weights.tail", "only 'constant' tails are supported")
        try:
            return WeightedShift(weights=tuple(float(x) for x in lst), monotone=monotone)
        except (TypeError, ValueError, PreconditionError) as exc:
            raise SchemaError("weights.list", str(exc)) from None
    if kind == "profile":
        for key in ("log_norm", "log_minmod"):
            if not isinstance(doc.get(key), list):
                raise SchemaError(key, "expected a list of numbers")
        try:
            log_minmod = [(-math.inf if v in ("-inf", None) else float(v)) for v in doc["log_minmod"]]
            return GrowthProfile(np.array(doc["log_norm"], dtype=np.float64), np.array(log_minmod),
                                 envelope=tuple(doc["envelope"]) if doc.get("envelope") else None)
        except (TypeError, ValueError, PreconditionError) as exc:
            raise SchemaError("log_norm", str(exc)) from None
    raise SchemaError("kind", f"expected 'dense', 'weighted_shift' or 'profile', got {kind!r}")


def operator_to_dict(op):
    if isinstance(op, DenseOperator):
        return {"kind": "dense", "data": [[[z.real, z.imag] for z in row] for row in op.entries]}
    if isinstance(op, WeightedShift):
        if op.name is not None:
            return {"kind": "weighted_shift", "weights": {"named": op.name}, "monotone": op.monotone}
        if op.weights is not None:
            return {"kind": "weighted_shift", "weights": {"list": list(op.weights), "tail": "constant"},
                    "monotone": op.monotone}
        raise PreconditionError("callable weights cannot be serialised")
    doc = {"kind": "profile", "log_norm": op.log_norm.tolist(),
           "log_minmod": [v if math.isfinite(v) else "-inf" for v in op.log_minmod.tolist()]}
    if op.envelope is not None:
        doc["envelope"] = list(op.envelope)
    return doc


def load_operator(source):
    """Operator from a preset name, a JSON file, or a Matrix Market (``.mtx``) file."""
    if isinstance(source, dict):
        return operator_from_dict(source)
    source = str(source)
    if _PRESET.match(source) and not Path(source).exists():
        return preset(source)
    path = Path(source)
    if path.suffix.lower() == ".mtx":
        try:
            A = scipy.io.mmread(path)
        except (ValueError, OSError) as exc:
            raise SchemaError("matrix_market", str(exc)) from None
        A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
        return DenseOperator(A)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("operator", f"invalid JSON: {exc}") from None
    return operator_from_dict(doc)


def sequence_from_dict(doc):
    if not isinstance(doc, dict):
        raise SchemaError("sequence", "expected an object")
    recipe = doc.get("recipe", "user")
    if recipe not in RECIPES:
        raise SchemaError("recipe", f"unknown recipe {recipe!r}")
    log_c = doc.get("log_c")
    if not isinstance(log_c, list) or not log_c:
        raise SchemaError("log_c", "expected a non-empty list of numbers")
    try:
        values = np.array(log_c, dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError("log_c", "entries must be numbers") from None
    if not np.all(np.isfinite(values)):
        raise SchemaError("log_c", "entries must be finite")
    ladder = doc.get("ladder")
    if ladder is not None and (not isinstance(ladder, list) or not all(isinstance(k, int) for k in ladder)):
        raise SchemaError("ladder", "expected a list of integers")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise SchemaError("params", "expected an object")
    try:
        return MajorantSequence.from_log_values(values, ladder=ladder, recipe=recipe, params=params)
    except PreconditionError as exc:
        raise SchemaError("ladder", str(exc)) from None


def load_sequence(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("sequence", f"invalid JSON: {exc}") from None
    return sequence_from_dict(doc)


def save_json(doc, path):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
