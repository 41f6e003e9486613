# src/storagebid/prices/historical.py
from __future__ import annotations
from typing import Any, Dict, List, Optional, Sequence, Union
import logging
import numpy as np

from storagebid.common.errors import IngestionError
from storagebid.prices.base import Episode, PriceModel, SampledHour

logger = logging.getLogger(__name__)

__all__ = ["HistoricalReplayModel", "ReplayEpisode", "historical_replay"]

HOURS_PER_DAY = 24


def _prices_of(path: Any) -> np.ndarray:
    return np.asarray(getattr(path, "prices", path), dtype=float).ravel()


class HistoricalReplayModel(PriceModel):
    """
    Historical day paths used directly as sample paths.

    Each episode replays one day chosen uniformly at random; hour t of the
    episode is the slice [t*M, (t+1)*M) of that day. No enumeration.
    """

    can_enumerate = False

    def __init__(self, days: Sequence[Any], M: int = 12, price_bound: float = 3000.0,
                 labels: Optional[Sequence[str]] = None) -> None:
        super().__init__(M, ("",))
        if len(days) == 0:
            raise IngestionError("historical replay needs at least one day path", [])
        expected = HOURS_PER_DAY * self.M
        arrays: List[np.ndarray] = []
        bad: List[int] = []
        clamped = 0
        for i, day in enumerate(days):
            p = _prices_of(day)
            if p.size != expected or not np.all(np.isfinite(p)) or np.any(p > price_bound):
                bad.append(i)
                continue
            clamped += int(np.count_nonzero(p < 0))
            arrays.append(np.maximum(p, 0.0))
        if bad:
            raise IngestionError(
                f"{len(bad)} day path(s) are not {expected} finite prices within [0, {price_bound}]", bad
            )
        if clamped:
            logger.warning("Clamped %d negative prices to 0 in historical replay", clamped)
        self.days = np.stack(arrays)               # (n_days, 24*M)
        self.price_bound = float(price_bound)
        self.labels = list(labels) if labels is not None else [
            str(getattr(d, "date", i)) for i, d in enumerate(days)
        ]

    @property
    def n_days(self) -> int:
        return int(self.days.shape[0])

    def day_hours(self, day: int) -> np.ndarray:
        """Day `day` reshaped to (24, M)."""
        return self.days[day].reshape(HOURS_PER_DAY, self.M)

    def hour_of_day(self, day: int, t: int) -> np.ndarray:
        return self.days[day, t * self.M:(t + 1) * self.M]

    def sample_hour(self, t: int, ps: int, rng: np.random.Generator) -> SampledHour:
        """Hour t of a freshly drawn day; use start_episode to keep one day across hours."""
        day = int(rng.integers(0, self.n_days))
        return SampledHour(self.hour_of_day(day, t).copy(), 0)

    def start_episode(self, rng: np.random.Generator) -> "ReplayEpisode":
        return ReplayEpisode(self, int(rng.integers(0, self.n_days)), rng)

    def describe(self) -> Dict[str, Any]:
        d = super().describe()
        d.update(n_days=self.n_days, days=self.labels)
        return d


class ReplayEpisode(Episode):
    """One historical day, sliced by hour."""

    n_hours = HOURS_PER_DAY

    def __init__(self, model: HistoricalReplayModel, day: int, rng: np.random.Generator) -> None:
        super().__init__(model, rng)
        self.day = day

    def hour(self, t: int, ps: int) -> SampledHour:
        if not self.has_hour(t):
            raise IndexError(f"hour {t} outside the replayed day")
        model = self.model
        assert isinstance(model, HistoricalReplayModel)
        return SampledHour(model.hour_of_day(self.day, t).copy(), 0)


def historical_replay(dataset: Union[Sequence[Any], Any], M: int = 12,
                      price_bound: float = 3000.0) -> HistoricalReplayModel:
    """Replay model over day paths, or over the `paths` of an ingestion BuildReport."""
    days = getattr(dataset, "paths", dataset)
    return HistoricalReplayModel(list(days), M=M, price_bound=price_bound)
