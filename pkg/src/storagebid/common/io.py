from __future__ import annotations
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union
import csv
import json
import os
import tempfile

import numpy as np

PathLike = Union[str, Path]

__all__ = [
    "ensure_dir",
    "write_rows_csv",
    "write_json",
    "atomic_write_text",
]


def ensure_dir(path: PathLike) -> Path:
    """Create a results/<command>/ style output directory on demand; returns it as a Path."""
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def atomic_write_text(path: PathLike, text: str) -> Path:
    """Write `text` to a sibling temp file, then rename over `path`."""
    p = Path(path)
    ensure_dir(p.parent)
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", dir=p.parent)
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return p


def _plain(value: Any) -> Any:
    """numpy scalars/arrays -> builtin types so csv/json output is stable."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float):
        return float(repr(value))
    return value


def write_rows_csv(path: PathLike, rows: List[Dict[str, Any]],
                   fieldnames: Optional[Sequence[str]] = None) -> Path:
    """
    Plot-ready report table (benchmark rows, revenue quantiles, histograms).
    The header follows `fieldnames` when given, else the first row's keys; with no
    rows and explicit `fieldnames` only the header is written. numpy values are
    stored as plain numbers.
    """
    p = Path(path)
    ensure_dir(p.parent)
    names = list(fieldnames) if fieldnames is not None else (list(rows[0].keys()) if rows else [])
    with p.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=names, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _plain(v) for k, v in row.items()})
    return p


def _json_default(value: Any) -> Any:
    if isinstance(value, (np.generic, np.ndarray)):
        return _plain(value)
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: PathLike, obj: Any, atomic: bool = True) -> Path:
    """Pretty JSON with sorted keys, so reruns produce identical bytes."""
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    if atomic:
        return atomic_write_text(path, text)
    p = Path(path)
    ensure_dir(p.parent)
    p.write_text(text)
    return p

