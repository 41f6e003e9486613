# src/storagebid/data/convert.py
"""
Normalize ISO-style real-time price exports to the `timestamp,price` CSV.

The defaults match zonal LBMP exports (`Time Stamp`, `Name`, `LBMP ($/MWHr)`).
Exports whose timestamps mark the end of each interval are shifted back by
one interval with `interval_ending=True`.
"""
from __future__ import annotations
from pathlib import Path
from typing import Optional, Sequence
import logging

import pandas as pd

from storagebid.common.errors import IngestionError
from storagebid.common.io import PathLike, ensure_dir

logger = logging.getLogger(__name__)

__all__ = ["convert_iso_export", "convert_many"]

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"


def convert_iso_export(src: PathLike, zone: Optional[str] = None, timestamp_col: str = "Time Stamp",
                       price_col: str = "LBMP ($/MWHr)", name_col: str = "Name",
                       interval_ending: bool = False, M: int = 12) -> pd.DataFrame:
    df = pd.read_csv(Path(src), skipinitialspace=True)
    df.columns = [str(c).strip() for c in df.columns]
    for col in (timestamp_col, price_col):
        if col not in df.columns:
            raise IngestionError(f"{src}: column {col!r} not found (have {list(df.columns)})", [1])
    if zone is not None:
        if name_col not in df.columns:
            raise IngestionError(f"{src}: zone filter needs column {name_col!r}", [1])
        df = df[df[name_col].astype(str).str.strip() == zone]
        if df.empty:
            logger.warning("Zone %r not present in %s", zone, src)
    stamps = pd.to_datetime(df[timestamp_col], errors="coerce")
    if stamps.isna().any():
        lines = [int(i) + 2 for i in df.index[stamps.isna()]]
        raise IngestionError(f"{src}: unparseable timestamps", lines)
    if interval_ending:
        stamps = stamps - pd.Timedelta(minutes=60 / M)
    out = pd.DataFrame({"timestamp": stamps.dt.strftime(TIMESTAMP_FORMAT),
                        "price": pd.to_numeric(df[price_col], errors="coerce")})
    return out.reset_index(drop=True)


def convert_many(sources: Sequence[PathLike], dst: PathLike, **kwargs) -> Path:
    """Convert and concatenate several exports into one sorted `timestamp,price` file."""
    frames = [convert_iso_export(s, **kwargs) for s in sources]
    df = pd.concat(frames, ignore_index=True).sort_values("timestamp", kind="stable")
    p = Path(dst)
    ensure_dir(p.parent)
    df.to_csv(p, index=False, lineterminator="\n")
    logger.info("Wrote %d rows to %s", len(df), p)
    return p
