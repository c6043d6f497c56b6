"""Dataset, config and report files.

Datasets are headerless CSV with the response in the first column.  Reports
are JSON plus a flat CSV table.  Every float is written with 17 significant
digits, so a value read back is bit-identical; infinities are written as the
strings ``"inf"`` and ``"-inf"`` in JSON.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .core import ConfigurationError, DataSet, IntervalUnion


def format_float(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def read_dataset(path) -> DataSet:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read dataset {path}: {exc}") from exc
    if data.shape[0] == 0:
        raise ConfigurationError(f"dataset {path} is empty")
    return DataSet(data[:, 0], data[:, 1:])


def write_dataset(T: DataSet, path) -> None:
    rows = np.column_stack([T.y, T.X])
    with open(path, "w", newline="") as fh:
        for row in rows:
            fh.write(",".join(format_float(v) for v in row) + "\n")


def parse_vector(text: str) -> np.ndarray:
    text = text.strip()
    if not text:
        return np.zeros(0)
    try:
        return np.array([float(tok) for tok in text.split(",")])
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse vector {text!r}") from exc


def read_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError("config must be a JSON object")
    return cfg


def to_plain(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays, tuples and interval unions to JSON types."""
    if isinstance(obj, IntervalUnion):
        return [
            {"lower": iv.lower, "upper": iv.upper, "lower_closed": iv.lower_closed, "upper_closed": iv.upper_closed}
            for iv in obj.intervals
        ]
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _emit(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        text = format_float(obj)
        return json.dumps(text) if text in ("inf", "-inf", "nan") else text
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        if not obj:
            return "[]"
        items = [_emit(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(pad + it for it in items) + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(k) + ": " + _emit(v, indent, level + 1) for k, v in obj.items()]
        return "{\n" + ",\n".join(pad + it for it in items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON with 17-significant-digit floats; key order is preserved."""
    return _emit(to_plain(obj), indent, 0) + "\n"


def table_to_csv(rows: list[dict]) -> str:
    """Flat CSV; columns are the union of row keys in first-seen order."""
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c, "")) for c in columns])
    return buf.getvalue()


def _csv_cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)
