"""Deterministic JSON: sorted keys and floats written with 17 significant digits."""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import InputError


def _encode(x, indent: int, level: int) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            raise InputError(f"cannot serialize non-finite value {x}")
        s = format(x, ".17g")
        # keep floats recognizable as floats on reload
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, np.ndarray):
        x = x.tolist()
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(x, dict):
        if not x:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(x[k], indent, level + 1)}" for k in sorted(x)]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(x, (list, tuple)):
        if not x:
            return "[]"
        # numeric rows stay on one line
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in x):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in x) + "]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in x) + end + "]"
    raise InputError(f"cannot serialize {type(x).__name__}")


def dumps(obj, indent: int = 1) -> str:
    return _encode(obj, indent, 0) + "\n"


def dump(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
