"""Certificate serialization helpers: schema tag, decimal strings, deterministic dumps."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

SCHEMA = "lcx-cert/1"


class SchemaError(ValueError):
    """A certificate file is missing fields or is not valid JSON."""


def dec(x: float) -> str:
    """Shortest round-trip decimal string of a float."""
    return repr(float(x))


def undec(s) -> float:
    if not isinstance(s, str):
        raise SchemaError(f"expected a decimal string, got {s!r}")
    try:
        return float(s)
    except ValueError as exc:
        raise SchemaError(f"not a decimal: {s!r}") from exc


def unint(s) -> int:
    if not isinstance(s, str):
        raise SchemaError(f"expected an integer string, got {s!r}")
    try:
        return int(s)
    except ValueError as exc:
        raise SchemaError(f"not an integer: {s!r}") from exc


def exact(x: float) -> Fraction:
    return Fraction(float(x))


def dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def write(obj: dict, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("schema") != SCHEMA:
        raise SchemaError(f"{path} is not a {SCHEMA} document")
    return obj


def field(obj: dict, *path):
    cur = obj
    for key in path:
        if not isinstance(cur, dict) or key not in cur:
            raise SchemaError(f"missing field {'.'.join(map(str, path))}")
        cur = cur[key]
    return cur
