"""Bit-stable JSON and CSV output.

Floats are written with 17 significant digits, which round-trips every
64-bit value exactly.  Key order is the order in which a report builds its
dictionary, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chain_core import FiniteChain
from .errors import InvalidChain

FORMATS = ("json", "csv")


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    return _encode(obj, indent, 0) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


@dataclass(frozen=True)
class Table:
    """Plain rows with a header, for reports that are tables already."""

    header: tuple[str, ...]
    rows: tuple[tuple, ...]

    def to_dict(self) -> list:
        return [dict(zip(self.header, row)) for row in self.rows]

    def csv_table(self):
        return list(self.header), [list(r) for r in self.rows]


def _write(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def emit(report, fmt: str = "json", path=None) -> str:
    """Render ``report`` as JSON or CSV and write it to ``path`` (stdout if None)."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    if fmt == "json":
        text = dumps(report)
    else:
        if not hasattr(report, "csv_table"):
            raise TypeError(f"{type(report).__name__} has no CSV form")
        text = csv_text(*report.csv_table())
    _write(text, path)
    return text


def chain_to_dict(chain: FiniteChain) -> dict:
    return {"k": chain.k, "pi": chain.pi.tolist(), "p": chain.p.tolist()}


def write_chain(chain: FiniteChain, path=None) -> str:
    text = dumps(chain_to_dict(chain))
    _write(text, path)
    return text


def chain_from_dict(d: dict) -> FiniteChain:
    try:
        k = int(d["k"])
        pi = np.asarray(d["pi"], dtype=float)
        p = np.asarray(d["p"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidChain(f"chain JSON needs keys k, pi, p: {exc}") from None
    if pi.shape != (k,) or p.shape != (k, k):
        raise InvalidChain(f"chain JSON shapes do not match k={k}")
    return FiniteChain(pi, p)


def read_chain(path) -> FiniteChain:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidChain(f"{path}: not valid JSON ({exc})") from None
    return chain_from_dict(data)
