# src/storagebid/market/contribution.py
"""
Estimators of C_{t,t+2}(s, b) for one state and every bid.

All of them answer `state(t, idx)` with a (G, G) array over (b_lo, b_hi);
entries with b_lo > b_hi are meaningless and masked by the callers.
"""
from __future__ import annotations
from abc import ABC, abstractmethod
from typing import Dict, Sequence, Tuple
import numpy as np

from storagebid.common.state import Index
from storagebid.market.config import MarketConfig
from storagebid.market.mechanics import GridSettlement, settle_grid
from storagebid.prices.base import Episode

__all__ = [
    "ContributionEstimator",
    "ExactContribution",
    "EmpiricalContribution",
    "EpisodeContribution",
]


class ContributionEstimator(ABC):
    def __init__(self, cfg: MarketConfig) -> None:
        self.cfg = cfg
        g = cfg.n_bids
        self._zero = np.zeros((g, g), dtype=float)

    @abstractmethod
    def state(self, t: int, idx: Index) -> np.ndarray:
        ...

    def _two_hours(self, first: GridSettlement, second: GridSettlement, idx: Index) -> np.ndarray:
        """Settle hour one under the stored bid, then hour two under every bid."""
        r, l, a_lo, a_hi = idx[:4]
        rn = first.next_R[r, a_lo, a_hi]
        ln = first.next_L[l, a_lo, a_hi]
        return second.revenue[rn, ln]


class ExactContribution(ContributionEstimator):
    """
    Expectation under an enumerable model (delegates to the exact engine).
    Whole periods are tabulated when the post-decision lattice has at most
    `table_cap` cells; larger lattices are evaluated per state.
    """

    def __init__(self, engine, table_cap: int = 2_000_000) -> None:
        super().__init__(engine.cfg)
        self.engine = engine
        self.tabulate = self.cfg.space(engine.n_ps, post=True).size <= table_cap
        self._tables: Dict[int, np.ndarray] = {}

    def state(self, t: int, idx: Index) -> np.ndarray:
        if t >= self.cfg.T:
            return self._zero
        if not self.tabulate:
            return self.engine.contribution_state(t, idx)
        if t not in self._tables:
            self._tables[t] = self.engine.contribution(t)
        r, l, lo, hi, ps = idx
        return self._tables[t][r, l, lo, hi, :, :, ps]


class EmpiricalContribution(ContributionEstimator):
    """
    Sample expectation over training day paths: hour t and t+1 of every day
    are settled from the state and the results averaged. Memoized per (t, state).
    """

    def __init__(self, cfg: MarketConfig, day_hours: Sequence[np.ndarray]) -> None:
        super().__init__(cfg)
        self.day_hours = [np.asarray(d, dtype=float) for d in day_hours]   # each (24, M)
        self._settled: Dict[int, Tuple[GridSettlement, ...]] = {}
        self._memo: Dict[Tuple[int, Index], np.ndarray] = {}

    def _hour(self, h: int) -> Tuple[GridSettlement, ...]:
        if h not in self._settled:
            self._settled[h] = tuple(settle_grid(d[h], self.cfg) for d in self.day_hours)
        return self._settled[h]

    def state(self, t: int, idx: Index) -> np.ndarray:
        n_hours = self.day_hours[0].shape[0]
        if t + 1 >= n_hours or t >= self.cfg.T:
            return self._zero
        key = (t, tuple(int(i) for i in idx))
        if key not in self._memo:
            first, second = self._hour(t), self._hour(t + 1)
            acc = np.zeros_like(self._zero)
            for a, b in zip(first, second):
                acc += self._two_hours(a, b, idx)
            self._memo[key] = acc / len(first)
        return self._memo[key]


class EpisodeContribution(ContributionEstimator):
    """Realized two-hour revenue along one sampled episode (zero past its end)."""

    def __init__(self, cfg: MarketConfig, episode: Episode) -> None:
        super().__init__(cfg)
        self.episode = episode
        self._settled: Dict[Tuple[int, int], GridSettlement] = {}

    def _hour(self, h: int, ps: int) -> GridSettlement:
        key = (h, ps)
        if key not in self._settled:
            self._settled[key] = settle_grid(self.episode.hour(h, ps).prices, self.cfg)
        return self._settled[key]

    def state(self, t: int, idx: Index) -> np.ndarray:
        if t >= self.cfg.T or not self.episode.has_hour(t + 1):
            return self._zero
        ps = int(idx[-1])
        nxt = self.episode.hour(t, ps).next_state
        return self._two_hours(self._hour(t, ps), self._hour(t + 1, nxt), idx)
