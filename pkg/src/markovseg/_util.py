"""Small shared helpers: atomic file writes and numeric formatting."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def fmt_float(x: float) -> str:
    """Format a float at 12 significant digits."""
    return format(float(x), ".12g")


def round12(x: float) -> float:
    """Round a float to 12 significant digits (used before JSON encoding)."""
    return float(fmt_float(x))


def json_ready(obj):
    """Recursively convert an object into JSON-encodable values.

    Floats are rounded to 12 significant digits, numpy scalars and arrays
    are converted to native Python types, tuples become lists.
    """
    if obj is None or isinstance(obj, (str, bool, int)):
        return obj
    if isinstance(obj, float):
        return round12(obj)
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if hasattr(obj, "tolist"):  # numpy arrays and scalars
        return json_ready(obj.tolist())
    if hasattr(obj, "item"):
        return json_ready(obj.item())
    raise TypeError(f"cannot encode {type(obj)!r} as JSON")


def dump_json_line(obj) -> str:
    return json.dumps(json_ready(obj), separators=(",", ":"))


def atomic_write_text(path, text: str) -> None:
    """Write text to path via a temp file and rename, so readers never see
    a partially written file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(json_ready(obj), indent=2) + "\n")


def write_csv(path, header: list[str], rows) -> None:
    """Write rows (iterables of already-stringified cells) as CSV."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(c) for c in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
