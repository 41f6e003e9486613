# src/storagebid/policies/rules.py
"""
Rule-based bidding baselines built from historical hourly price statistics.

Hours are 0-based: hour h covers (h, h+1]. The bid placed at t governs
hour t+1, so every rule looks up its statistics at h = t+1.
"""
from __future__ import annotations
from typing import Any, Dict, FrozenSet, Iterable, Optional, Tuple

import numpy as np

from storagebid.common.errors import ConfigurationError
from storagebid.common.state import Index
from storagebid.market.config import MarketConfig
from storagebid.market.mechanics import settle_grid
from storagebid.policies.base import Policy
from storagebid.prices.base import PriceModel

__all__ = [
    "HourlyPriceStats",
    "RulePolicyA",
    "RulePolicyB",
    "RulePolicyC",
    "rule_policy_A",
    "rule_policy_B",
    "rule_policy_C",
]

# buy and sell hours per half-day for rule A
_RULE_A_HOURS = 6


class HourlyPriceStats:
    """
    Per-hour statistics of training day paths, shape (n_days, n_hours, M).

    mean[h]        : average price of hour h over days and settlements
    quantiles(a)   : (q_a, q_{1-a}) per hour, snapped to the bid grid
    forecast(t, s) : R-hat_{t+1}, the average resource after hour t when
                     the state's stored bid settles against every training day
    """

    def __init__(self, cfg: MarketConfig, day_hours: np.ndarray) -> None:
        days = np.asarray(day_hours, dtype=float)
        if days.ndim != 3 or days.shape[0] == 0 or days.shape[2] != cfg.M:
            raise ConfigurationError(f"expected (n_days, n_hours, {cfg.M}) prices, got {days.shape}")
        self.cfg = cfg
        self.days = days
        per_hour = days.transpose(1, 0, 2).reshape(days.shape[1], -1)
        self.mean = per_hour.mean(axis=1)
        self._per_hour = per_hour
        self._next_R: Dict[int, np.ndarray] = {}

    @classmethod
    def from_model(cls, cfg: MarketConfig, model: PriceModel, n_days: int,
                   rng: np.random.Generator) -> "HourlyPriceStats":
        """Statistics of n_days sampled episodes over hours 0..T."""
        days = []
        for _ in range(n_days):
            episode = model.start_episode(rng)
            ps = model.initial_price_state()
            hours = []
            for t in range(cfg.T + 1):
                hour = episode.hour(t, ps)
                hours.append(hour.prices)
                ps = hour.next_state
            days.append(hours)
        return cls(cfg, np.asarray(days, dtype=float))

    @property
    def n_days(self) -> int:
        return int(self.days.shape[0])

    @property
    def n_hours(self) -> int:
        return int(self.days.shape[1])

    def quantiles(self, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
        lo = np.quantile(self._per_hour, alpha, axis=1)
        hi = np.quantile(self._per_hour, 1.0 - alpha, axis=1)
        snap = np.vectorize(self.cfg.snap)
        return snap(lo), snap(hi)

    def forecast(self, t: int, idx: Index) -> float:
        r, l, a_lo, a_hi = (int(i) for i in idx[:4])
        if t == 0 or t >= self.n_hours:
            # no settlement in hour 0 (no active bid)
            return float(r)
        if t not in self._next_R:
            self._next_R[t] = np.stack([settle_grid(d[t], self.cfg).next_R for d in self.days])
        return float(self._next_R[t][:, r, a_lo, a_hi].mean())


class _RulePolicy(Policy):
    """Shared plumbing: bid-hour lookup, thresholds and the end-of-day sell-off."""

    def __init__(self, stats: HourlyPriceStats, full: Optional[float] = None,
                 empty: Optional[float] = None) -> None:
        super().__init__(stats.cfg)
        self.stats = stats
        r_max = self.cfg.R_max
        self.full = 60.0 / 72.0 * r_max if full is None else float(full)
        self.empty = 12.0 / 72.0 * r_max if empty is None else float(empty)
        g = self.cfg.n_bids
        self._idle = (0, g - 1)
        self._buy = (g - 1, g - 1)
        self._sell = (0, 0)

    def _sell_off(self, t: int, r_hat: float) -> bool:
        return r_hat > 0 and r_hat >= self.cfg.M * (self.cfg.T - t)

    def decide(self, t: int, idx: Index) -> Tuple[int, int]:
        h = t + 1
        if h >= self.stats.n_hours:
            return self._idle
        r_hat = self.stats.forecast(t, idx)
        if self._sell_off(t, r_hat):
            return self._sell
        return self._rule(h, r_hat)

    def _rule(self, h: int, r_hat: float) -> Tuple[int, int]:
        raise NotImplementedError


class RulePolicyA(Policy):
    """Six cheapest hours before h_star buy, six dearest from h_star on sell."""

    name = "A"

    def __init__(self, stats: HourlyPriceStats, h_star: int = 12) -> None:
        if h_star <= _RULE_A_HOURS:
            raise ConfigurationError(f"h_star must exceed {_RULE_A_HOURS}, got {h_star}")
        super().__init__(stats.cfg)
        self.stats = stats
        self.h_star = int(h_star)
        mean = stats.mean
        first = np.arange(min(self.h_star, stats.n_hours))
        second = np.arange(min(self.h_star, stats.n_hours), stats.n_hours)
        self.buy_hours = _extreme_hours(mean, first, _RULE_A_HOURS, lowest=True)
        self.sell_hours = _extreme_hours(mean, second, _RULE_A_HOURS, lowest=False)

    def decide(self, t: int, idx: Index) -> Tuple[int, int]:
        h = t + 1
        g = self.cfg.n_bids
        if h in self.buy_hours:
            return g - 1, g - 1
        if h in self.sell_hours:
            return 0, 0
        return 0, g - 1

    def describe(self) -> Dict[str, Any]:
        return {"policy": self.name, "h_star": self.h_star,
                "buy_hours": sorted(self.buy_hours), "sell_hours": sorted(self.sell_hours)}


class RulePolicyB(_RulePolicy):
    """k_star cheapest hours buy, k_star dearest sell, idle when nearly full/empty."""

    name = "B"

    def __init__(self, stats: HourlyPriceStats, k_star: int = 10, full: Optional[float] = None,
                 empty: Optional[float] = None) -> None:
        if not 1 <= k_star <= 12:
            raise ConfigurationError(f"k_star must be in [1, 12], got {k_star}")
        super().__init__(stats, full, empty)
        self.k_star = int(k_star)
        hours = np.arange(stats.n_hours)
        self.buy_hours = _extreme_hours(stats.mean, hours, self.k_star, lowest=True)
        self.sell_hours = _extreme_hours(stats.mean, hours, self.k_star, lowest=False) - self.buy_hours

    def _rule(self, h: int, r_hat: float) -> Tuple[int, int]:
        if h in self.buy_hours:
            return self._idle if r_hat > self.full else self._buy
        if h in self.sell_hours:
            return self._idle if r_hat < self.empty else self._sell
        return self._idle

    def describe(self) -> Dict[str, Any]:
        return {"policy": self.name, "k_star": self.k_star, "full": self.full, "empty": self.empty,
                "buy_hours": sorted(self.buy_hours), "sell_hours": sorted(self.sell_hours)}


class RulePolicyC(_RulePolicy):
    """Bid the hour's empirical alpha / (1 - alpha) quantiles."""

    name = "C"

    def __init__(self, stats: HourlyPriceStats, alpha: float = 0.1, full: Optional[float] = None,
                 empty: Optional[float] = None) -> None:
        if not 0.0 < alpha < 0.5:
            raise ConfigurationError(f"alpha must be in (0, 0.5), got {alpha}")
        super().__init__(stats, full, empty)
        self.alpha = float(alpha)
        q_lo, q_hi = stats.quantiles(self.alpha)
        self.q_lo = np.array([self.cfg.level_index(v) for v in q_lo], dtype=int)
        self.q_hi = np.array([self.cfg.level_index(v) for v in q_hi], dtype=int)

    def _rule(self, h: int, r_hat: float) -> Tuple[int, int]:
        lo, hi = int(self.q_lo[h]), int(self.q_hi[h])
        if r_hat > self.full:
            return 0, hi
        if r_hat < self.empty:
            return lo, self.cfg.n_bids - 1
        return lo, hi

    def describe(self) -> Dict[str, Any]:
        return {"policy": self.name, "alpha": self.alpha, "full": self.full, "empty": self.empty}


def _extreme_hours(mean: np.ndarray, hours: Iterable[int], k: int, lowest: bool) -> FrozenSet[int]:
    """The k hours of `hours` with the lowest (or highest) mean; stable on ties."""
    hours = np.asarray(list(hours), dtype=int)
    if hours.size == 0:
        return frozenset()
    key = mean[hours] if lowest else -mean[hours]
    order = np.argsort(key, kind="stable")
    return frozenset(int(h) for h in hours[order[:k]])


def rule_policy_A(stats: HourlyPriceStats, h_star: int = 12) -> RulePolicyA:
    return RulePolicyA(stats, h_star)


def rule_policy_B(stats: HourlyPriceStats, k_star: int = 10, full_thresh: Optional[float] = None,
                  empty_thresh: Optional[float] = None) -> RulePolicyB:
    return RulePolicyB(stats, k_star, full_thresh, empty_thresh)


def rule_policy_C(stats: HourlyPriceStats, alpha: float = 0.1, full_thresh: Optional[float] = None,
                  empty_thresh: Optional[float] = None) -> RulePolicyC:
    return RulePolicyC(stats, alpha, full_thresh, empty_thresh)
