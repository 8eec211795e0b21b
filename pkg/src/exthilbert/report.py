"""Result records, deterministic serialization and schema validation."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

SCHEMA_VERSION = 1
SCHEMAS = ("verdict", "slack_record", "fit_record", "experiment", "spectral_model", "torus_field")
RATE_COLUMNS = ("k", "error", "bound", "ratio")


@dataclass(frozen=True)
class SlackRecord:
    """Relative slack (rhs - lhs) / scale of one inequality instance."""

    inequality: str
    slack: float
    digest: str
    tolerance: float = 1e-10
    lhs: Optional[float] = None
    rhs: Optional[float] = None

    @property
    def passed(self):
        return bool(self.slack >= -self.tolerance)

    def as_dict(self):
        return {"inequality": self.inequality, "slack": self.slack, "digest": self.digest,
                "tolerance": self.tolerance, "lhs": self.lhs, "rhs": self.rhs,
                "passed": self.passed}


@dataclass(frozen=True)
class FitRecord:
    quantity: str
    value: float
    stability: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("fitted value must be positive")

    def as_dict(self):
        return {"quantity": self.quantity, "value": self.value, "stability": self.stability}


def aggregate(records):
    """True iff every record passed."""
    return all(r.passed for r in records)


def digest(*parts):
    """Short content hash of arrays and scalars, used to tie a slack to its inputs."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p).tobytes())
        else:
            h.update(repr(p).encode())
        h.update(b"|")
    return h.hexdigest()[:16]


def format_number(x):
    return format(float(x), ".17g")


def _emit(obj, out, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or (isinstance(obj, float) and not math.isfinite(obj)):
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            out.append("null")
        else:
            out.append(format_number(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _emit(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(items):
            _emit(v, out, indent, level + 1)
            if i < len(items) - 1:
                out.append(", ")
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(obj, indent=2):
    """Deterministic JSON text with floats written to 17 significant digits."""
    out = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def to_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    path: str = ""
    message: str = ""

    def __bool__(self):
        return self.ok


@lru_cache(maxsize=None)
def load_schema(name):
    if name not in SCHEMAS:
        raise KeyError(f"unknown schema {name!r}")
    text = resources.files("exthilbert").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _pointer(parts):
    return "/" + "/".join(str(p) for p in parts)


def validate_schema(document, schema="verdict"):
    """Check a parsed document against a shipped schema; report the first violation."""
    validator = jsonschema.Draft202012Validator(load_schema(schema))
    errors = sorted(validator.iter_errors(document), key=lambda e: (list(e.absolute_path), e.message))
    if not errors:
        return ValidationResult(True)
    err = errors[0]
    parts = list(err.absolute_path)
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        parts.append(missing[0])
    return ValidationResult(False, _pointer(parts), err.message)


def validate_rate_csv(text):
    """Check a rate table: header (k, error, bound, ratio) and numeric cells."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != RATE_COLUMNS:
        return ValidationResult(False, "row 1", f"header must be {','.join(RATE_COLUMNS)}")
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(RATE_COLUMNS):
            return ValidationResult(False, f"row {i}", "wrong number of cells")
        for j, cell in enumerate(row):
            try:
                float(cell)
            except ValueError:
                return ValidationResult(False, f"row {i}, col {j + 1} ({RATE_COLUMNS[j]})",
                                        f"non-numeric cell {cell!r}")
    return ValidationResult(True)
