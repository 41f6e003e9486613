# src/storagebid/data/datasets.py
from __future__ import annotations
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence
import logging

import pandas as pd

from storagebid.common.errors import ConfigurationError
from storagebid.data.ingest import BuildReport, DayPath
from storagebid.prices.historical import HOURS_PER_DAY

logger = logging.getLogger(__name__)

__all__ = ["DatasetSpec", "Dataset", "select_dataset", "dataset_manifest", "SAME_MONTH_PRIOR_YEAR",
           "PRIOR_MONTH"]

SAME_MONTH_PRIOR_YEAR = "same-month-prior-year"
PRIOR_MONTH = "prior-month"


@dataclass(frozen=True)
class DatasetSpec:
    """
    Which days train and which days test.

    mode         : "same-month-prior-year" or "prior-month"
    target       : test month, "YYYY-MM"
    weekday_only : keep Monday..Friday only
    day_offset   : hour of the day the horizon starts at (0..23); the hours before it
                   are replayed at the end, so T lands where storage is usually low
    """
    mode: str
    target: str
    weekday_only: bool = True
    day_offset: int = 0

    def __post_init__(self) -> None:
        if self.mode not in (SAME_MONTH_PRIOR_YEAR, PRIOR_MONTH):
            raise ConfigurationError(f"Unknown dataset mode {self.mode!r}")
        try:
            pd.Period(self.target, freq="M")
        except ValueError:
            raise ConfigurationError(f"target must be 'YYYY-MM', got {self.target!r}") from None
        if not 0 <= self.day_offset < HOURS_PER_DAY:
            raise ConfigurationError(f"day_offset must be in [0, {HOURS_PER_DAY}), got {self.day_offset}")

    @property
    def test_month(self) -> str:
        return str(pd.Period(self.target, freq="M"))

    @property
    def training_month(self) -> str:
        lag = 12 if self.mode == SAME_MONTH_PRIOR_YEAR else 1
        return str(pd.Period(self.target, freq="M") - lag)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "DatasetSpec":
        if "mode" not in d or "target" not in d:
            raise ConfigurationError("dataset spec needs 'mode' and 'target'")
        return cls(str(d["mode"]), str(d["target"]), bool(d.get("weekday_only", True)),
                   int(d.get("day_offset", 0)))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class Dataset:
    spec: DatasetSpec
    train: List[DayPath]
    test: List[DayPath]


def _month(paths: Sequence[DayPath], month: str, weekday_only: bool) -> List[DayPath]:
    return [p for p in paths if p.month == month and (p.weekday or not weekday_only)]


def select_dataset(paths: Sequence[DayPath], spec: DatasetSpec) -> Dataset:
    train = _month(paths, spec.training_month, spec.weekday_only)
    test = _month(paths, spec.test_month, spec.weekday_only)
    if not train:
        raise ConfigurationError(f"no training days in {spec.training_month} for {spec.mode}")
    if not test:
        raise ConfigurationError(f"no test days in {spec.test_month}")
    if spec.day_offset:
        train = [p.rotated(spec.day_offset) for p in train]
        test = [p.rotated(spec.day_offset) for p in test]
    overlap = {p.date for p in train} & {p.date for p in test}
    if overlap:
        raise ConfigurationError(f"training and test sets share dates: {sorted(overlap)}")
    logger.info("Dataset %s: %d training day(s) from %s, %d test day(s) from %s",
                spec.mode, len(train), spec.training_month, len(test), spec.test_month)
    return Dataset(spec, train, test)


def dataset_manifest(dataset: Dataset, build: Optional[BuildReport] = None) -> Dict[str, Any]:
    """Dates, counts and ingestion statistics of a dataset, ready for JSON."""
    out: Dict[str, Any] = {
        "spec": dataset.spec.to_dict(),
        "training_month": dataset.spec.training_month,
        "test_month": dataset.spec.test_month,
        "train_dates": [p.date.isoformat() for p in dataset.train],
        "test_dates": [p.date.isoformat() for p in dataset.test],
        "train_days": len(dataset.train),
        "test_days": len(dataset.test),
    }
    if build is not None:
        out["ingestion"] = build.to_dict()
    return out
