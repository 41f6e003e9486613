# src/storagebid/data/ingest.py
"""
Historical real-time price files -> validated day paths.

Input is a CSV with a header and the columns `timestamp,price`. Naive
timestamps are market local time; timestamps carrying an offset are
converted to the market timezone when one is given. Each timestamp marks
the start of its settlement interval.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union
import logging

import numpy as np
import pandas as pd

from storagebid.common.errors import IngestionError
from storagebid.common.io import PathLike
from storagebid.prices.historical import HOURS_PER_DAY

logger = logging.getLogger(__name__)

__all__ = [
    "PriceRecord",
    "DayPath",
    "BuildReport",
    "read_price_frame",
    "parse_prices",
    "build_day_paths",
    "build_day_paths_report",
    "load_day_paths",
]

COLUMNS = ("timestamp", "price")
# an explicit offset (Z, +hh:mm, -hhmm) at the end of the timestamp
_OFFSET = r"(?:Z|[+-]\d{2}:?\d{2})$"


@dataclass(frozen=True)
class PriceRecord:
    timestamp: pd.Timestamp
    price: float


@dataclass(frozen=True)
class DayPath:
    """One calendar day of 24*M settlement prices in settlement order."""
    date: date
    prices: np.ndarray

    @property
    def weekday(self) -> bool:
        # holidays count as weekdays
        return self.date.weekday() < 5

    @property
    def month(self) -> str:
        return self.date.strftime("%Y-%m")

    def __len__(self) -> int:
        return int(self.prices.size)

    def rotated(self, hours: int) -> "DayPath":
        """Same day with the horizon starting at `hours`; earlier hours wrap to the end."""
        if hours % HOURS_PER_DAY == 0:
            return self
        m = self.prices.size // HOURS_PER_DAY
        return DayPath(self.date, np.roll(self.prices, -(hours % HOURS_PER_DAY) * m))


@dataclass
class BuildReport:
    paths: List[DayPath]
    dropped_days: List[str] = field(default_factory=list)
    rejected_days: List[str] = field(default_factory=list)
    clamped: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "days": len(self.paths),
            "dropped_days": self.dropped_days,
            "rejected_days": self.rejected_days,
            "clamped_prices": self.clamped,
        }


def read_price_frame(path: PathLike, tz: Optional[str] = None) -> pd.DataFrame:
    """
    Parsed, time-sorted DataFrame with a naive `timestamp` column and a float `price` column.
    Raises IngestionError naming every malformed line (1-based, header is line 1).
    """
    p = Path(path)
    try:
        raw = pd.read_csv(p, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        logger.warning("Price file %s is empty", p)
        return pd.DataFrame({"timestamp": pd.Series(dtype="datetime64[ns]"),
                             "price": pd.Series(dtype=float)})
    raw.columns = [str(c).strip().lower() for c in raw.columns]
    missing = [c for c in COLUMNS if c not in raw.columns]
    if missing:
        raise IngestionError(f"{p}: missing column(s) {missing}; expected header 'timestamp,price'", [1])
    if raw.empty:
        logger.warning("Price file %s has no rows", p)

    text = raw["timestamp"].str.strip()
    aware = text.str.contains(_OFFSET, regex=True)
    stamps = pd.to_datetime(text, errors="coerce", format="ISO8601", utc=True)
    prices = pd.to_numeric(raw["price"].str.strip(), errors="coerce")
    bad = stamps.isna() | prices.isna() | ~np.isfinite(prices.fillna(0.0))
    if bad.any():
        lines = [int(i) + 2 for i in np.flatnonzero(bad.to_numpy())]
        shown = ", ".join(str(n) for n in lines[:20])
        raise IngestionError(f"{p}: {len(lines)} malformed row(s) at line(s) {shown}", lines)

    local = stamps.dt.tz_localize(None)
    if tz is not None and aware.any():
        local[aware] = stamps[aware].dt.tz_convert(tz).dt.tz_localize(None)
    df = pd.DataFrame({"timestamp": local, "price": prices.astype(float)})
    if not df["timestamp"].is_monotonic_increasing:
        logger.warning("Rows of %s are out of order; re-sorting", p)
        df = df.sort_values("timestamp", kind="stable")
    return df.reset_index(drop=True)


def parse_prices(path: PathLike, tz: Optional[str] = None) -> List[PriceRecord]:
    df = read_price_frame(path, tz)
    return [PriceRecord(ts, float(v)) for ts, v in zip(df["timestamp"], df["price"])]


def _as_frame(records: Union[pd.DataFrame, Sequence[PriceRecord]]) -> pd.DataFrame:
    if isinstance(records, pd.DataFrame):
        return records
    return pd.DataFrame({
        "timestamp": pd.to_datetime([r.timestamp for r in records]),
        "price": np.array([r.price for r in records], dtype=float),
    })


def build_day_paths_report(records: Union[pd.DataFrame, Sequence[PriceRecord]], M: int = 12,
                           price_bound: float = 3000.0) -> BuildReport:
    """
    Group records by calendar day. A day becomes a DayPath when it holds exactly
    24*M distinct timestamps on the 60/M-minute cadence; other days (gaps,
    duplicates, daylight-saving days) are dropped. Negative prices are clamped
    to 0 and counted; days with a price above `price_bound` are rejected.
    """
    df = _as_frame(records)
    report = BuildReport(paths=[])
    if df.empty:
        return report
    expected = HOURS_PER_DAY * M
    step = pd.Timedelta(minutes=60 / M)
    for day, group in df.groupby(df["timestamp"].dt.normalize(), sort=True):
        label = day.strftime("%Y-%m-%d")
        stamps = group["timestamp"]
        if len(group) != expected or stamps.nunique() != expected or not (stamps.diff().iloc[1:] == step).all():
            report.dropped_days.append(label)
            continue
        prices = group["price"].to_numpy(dtype=float)
        if np.any(prices > price_bound):
            report.rejected_days.append(label)
            continue
        negative = int(np.count_nonzero(prices < 0))
        if negative:
            report.clamped += negative
            prices = np.maximum(prices, 0.0)
        report.paths.append(DayPath(day.date(), prices))

    if report.dropped_days:
        logger.warning("Dropped %d day(s) without exactly %d observations: %s",
                       len(report.dropped_days), expected, ", ".join(report.dropped_days[:10]))
    if report.rejected_days:
        logger.warning("Rejected %d day(s) with prices above %g: %s",
                       len(report.rejected_days), price_bound, ", ".join(report.rejected_days[:10]))
    if report.clamped:
        logger.warning("Clamped %d negative price(s) to 0", report.clamped)
    logger.info("Built %d day path(s)", len(report.paths))
    return report


def build_day_paths(records: Union[pd.DataFrame, Sequence[PriceRecord]], M: int = 12,
                    price_bound: float = 3000.0) -> List[DayPath]:
    return build_day_paths_report(records, M, price_bound).paths


def load_day_paths(paths: Sequence[PathLike], M: int = 12, price_bound: float = 3000.0,
                   tz: Optional[str] = None) -> BuildReport:
    """Parse one or more price files and build their day paths together."""
    frames = [read_price_frame(p, tz) for p in paths]
    df = pd.concat(frames, ignore_index=True) if frames else _as_frame([])
    df = df.sort_values("timestamp", kind="stable").reset_index(drop=True)
    return build_day_paths_report(df, M, price_bound)
