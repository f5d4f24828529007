"""Deterministic JSON emission.

All CLI outputs go through :func:`dumps` so that identical inputs produce
byte-identical files: keys are sorted, floats carry 17 significant digits,
and no locale- or platform-dependent formatting is involved.
"""

import json
import math

import numpy as np


def _format_float(value: float) -> str:
    if math.isnan(value) or math.isinf(value):
        raise ValueError("non-finite float cannot be serialized to JSON")
    text = format(value, ".17g")
    # ".17g" may drop the decimal point entirely (e.g. 21.0 -> "21");
    # keep it so the value round-trips as a float.
    if "." not in text and "e" not in text and "E" not in text:
        text += ".0"
    return text


def _coerce(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _write(obj, out, indent, level):
    obj = _coerce(obj)
    pad = " " * (indent * (level + 1))
    closing_pad = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(repr(obj))
    elif isinstance(obj, float):
        out.append(_format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, key in enumerate(keys):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {type(key)!r}")
            out.append(pad)
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(": ")
            _write(obj[key], out, indent, level + 1)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(closing_pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(pad)
            _write(item, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(closing_pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps(obj, indent: int = 2) -> str:
    """Serialize *obj* to deterministic JSON text (trailing newline included)."""
    out = []
    _write(obj, out, indent, 0)
    out.append("\n")
    return "".join(out)


def format_float(value: float) -> str:
    """17-significant-digit float formatting, shared with the CSV writers."""
    return _format_float(float(value))
