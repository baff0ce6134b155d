"""Artifact reading and writing.

CSV artifacts start with one ``# {json}`` comment line carrying the run
metadata (seed, config hash, tool version); JSON artifacts carry the same
block under a ``"metadata"`` key. Floats are written with ``repr`` so they
round-trip exactly. Every write goes to a temporary file that is renamed
into place.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from typing import Iterable, List, Optional, Sequence, Tuple

from . import __version__
from .breach_data import MetricPoint, Pattern
from .errors import ValidationError

PATH_KEYS = frozenset({"input", "output_dir", "imputed", "steps", "samples", "svg", "command_path"})


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):   # numpy scalar
        return _clean(obj.item())
    return obj


def config_hash(config: dict) -> str:
    """Short SHA-256 of the JSON-canonical config with path entries removed."""
    body = {k: v for k, v in config.items() if k not in PATH_KEYS}
    text = json.dumps(_clean(body), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def metadata(seed, config: dict) -> dict:
    return {"seed": seed, "config_hash": config_hash(config), "tool_version": __version__}


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "item"):
        value = float(value)
        return "" if math.isnan(value) else repr(value)
    return str(value)


def csv_text(columns: Sequence[str], rows: Iterable, meta: Optional[dict] = None) -> str:
    """CSV text for ``rows`` (dicts keyed by column, or sequences)."""
    buf = io.StringIO()
    if meta is not None:
        buf.write("# " + json.dumps(_clean(meta), sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        vals = [row.get(c) for c in columns] if isinstance(row, dict) else row
        w.writerow([fmt(v) for v in vals])
    return buf.getvalue()


def write_csv(path, columns, rows, meta=None) -> None:
    atomic_write_text(path, csv_text(columns, rows, meta))


def write_csv_text(path, text: str, meta: Optional[dict] = None) -> None:
    """Write pre-rendered CSV text behind the metadata comment line."""
    head = "" if meta is None else "# " + json.dumps(_clean(meta), sort_keys=True) + "\n"
    atomic_write_text(path, head + text)


def write_json(path, obj: dict, meta: Optional[dict] = None) -> None:
    body = dict(obj)
    if meta is not None:
        body["metadata"] = meta
    atomic_write_text(path, json.dumps(_clean(body), indent=2, sort_keys=True) + "\n")


def read_csv(path) -> Tuple[dict, List[dict]]:
    """Return ``(metadata, rows)``; rows map column name to raw string."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        raise ValidationError(f"input file not found: {path}") from None
    meta = {}
    while lines and lines[0].startswith("#"):
        try:
            meta = json.loads(lines.pop(0)[1:])
        except json.JSONDecodeError:
            pass
    return meta, list(csv.DictReader(lines))


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"input file not found: {path}") from None


def parse_float(text, field: str, row: int) -> Optional[float]:
    text = (text or "").strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"row {row}: field {field!r} is not a number: {text!r}") from None
    if math.isnan(value):
        return None
    return value


def require_columns(rows_or_fields, columns, what: str):
    fields = rows_or_fields if isinstance(rows_or_fields, (list, tuple, set)) else []
    missing = [c for c in columns if c not in fields]
    if missing:
        raise ValidationError(f"{what} lacks column(s): {', '.join(missing)}")


# ---------------------------------------------------------------------------
# metric points
# ---------------------------------------------------------------------------

POINT_COLUMNS = ("index", "ttn", "tti", "pattern")


def point_rows(points: Sequence[MetricPoint]):
    for p in points:
        yield {"index": p.index, "ttn": p.ttn, "tti": p.tti, "pattern": p.pattern.value}


def read_points(path, ttn_col: str = "ttn", tti_col: str = "tti") -> List[MetricPoint]:
    """Read a points CSV (``index, ttn, tti[, pattern]``); blanks are missing."""
    _, rows = read_csv(path)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    require_columns(list(rows[0].keys()), ("index", ttn_col, tti_col), str(path))
    points = []
    for r, row in enumerate(rows, start=2):
        idx = parse_float(row["index"], "index", r)
        if idx is None or idx != int(idx):
            raise ValidationError(f"row {r}: field 'index' must be an integer")
        pattern = (row.get("pattern") or "").strip() or None
        try:
            points.append(MetricPoint(int(idx), parse_float(row[ttn_col], ttn_col, r),
                                      parse_float(row[tti_col], tti_col, r),
                                      None if pattern is None else Pattern(pattern)))
        except ValueError as exc:
            raise ValidationError(f"row {r}: {exc}") from None
    return points
