# src/storagebid/prices/synthetic.py
from __future__ import annotations
from typing import Any, Callable, Dict, Optional, Sequence
import math
import numpy as np

from storagebid.common.errors import ConfigurationError, DataError, DomainError
from storagebid.prices.base import DEFAULT_ENUMERATION_CAP, Episode, HourOutcomes, PriceModel, SampledHour
from storagebid.prices.distributions import DiscreteDistribution, integer_support, pseudonormal

__all__ = [
    "seasonal_v1",
    "seasonal_v2",
    "spike_probability",
    "SeasonalNoiseModel",
    "RegimeSwitchingModel",
    "DeterministicModel",
    "normal_regime_noise",
    "spike_regime_noise",
]

_TRENDS: Dict[str, Callable[[float], float]] = {"sin": math.sin, "cos": math.cos}


def _trend(name: str) -> Callable[[float], float]:
    try:
        return _TRENDS[name]
    except KeyError:
        raise ConfigurationError(f"Unknown trend {name!r}; expected 'sin' or 'cos'") from None


def seasonal_v1(t: float) -> float:
    """Hour-of-day level: 15 sin(2 pi t / 24) + 50."""
    return 15.0 * math.sin(2.0 * math.pi * t / 24.0) + 50.0


def seasonal_v2(t: float, trend: str = "sin") -> float:
    """Twelve-hour cycle used with the regime model: 15 f(2 pi t / 12) + 50."""
    return 15.0 * _trend(trend)(2.0 * math.pi * t / 12.0) + 50.0


def spike_probability(t: float, trend: str, alpha_p: float) -> float:
    """Probability of entering the spike regime: alpha_p (f(2 pi t / 12) + 1) / 2."""
    if not 0.0 <= alpha_p <= 1.0:
        raise DomainError(f"alpha_p must be in [0, 1], got {alpha_p}")
    return alpha_p * (_trend(trend)(2.0 * math.pi * t / 12.0) + 1.0) / 2.0


def normal_regime_noise() -> DiscreteDistribution:
    """Pseudonormal (0, 7) on {-10, ..., 40}."""
    return pseudonormal(integer_support(-10, 40), 0.0, 7.0)


def spike_regime_noise() -> DiscreteDistribution:
    """Pseudonormal (15, 20) on {-10, ..., 40}: mass skewed toward upward spikes."""
    return pseudonormal(integer_support(-10, 40), 15.0, 20.0)


def _product(base: np.ndarray, noise: DiscreteDistribution, price_bound: float):
    """All combinations of i.i.d. noise across M settlements around `base` (length M)."""
    M = base.size
    k = len(noise.support)
    idx = np.indices((k,) * M).reshape(M, -1).T          # (k^M, M)
    prices = np.clip(base[None, :] + noise.values[idx], 0.0, price_bound)
    probs = np.prod(noise.pmf[idx], axis=1)
    return prices, probs


class SeasonalNoiseModel(PriceModel):
    """
    P = seasonal(t) + eps with i.i.d. discrete noise and no price-model state.
    Settlement m of hour t uses seasonal(t + m/M).
    """

    def __init__(self, M: int, noise: DiscreteDistribution,
                 seasonal: Callable[[float], float] = seasonal_v1,
                 price_bound: float = 3000.0,
                 enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> None:
        super().__init__(M, ("",), enumeration_cap)
        self.noise = noise
        self.seasonal = seasonal
        self.price_bound = float(price_bound)

    def base(self, t: int) -> np.ndarray:
        return np.array([self.seasonal(t + m / self.M) for m in range(self.M)])

    def n_outcomes(self, t: int, ps: int) -> int:
        return len(self.noise.support) ** self.M

    def _enumerate(self, t: int, ps: int) -> HourOutcomes:
        prices, probs = _product(self.base(t), self.noise, self.price_bound)
        return HourOutcomes(prices, probs, np.zeros(probs.size, dtype=int))

    def sample_hour(self, t: int, ps: int, rng: np.random.Generator) -> SampledHour:
        eps = self.noise.sample(rng, self.M)
        prices = np.clip(self.base(t) + eps, 0.0, self.price_bound)
        return SampledHour(prices, 0)

    def describe(self) -> Dict[str, Any]:
        d = super().describe()
        d.update(noise_support=[min(self.noise.support), max(self.noise.support)],
                 noise_mean=self.noise.mean())
        return d


class RegimeSwitchingModel(PriceModel):
    """
    Two-regime Markov model: state 0 = normal, 1 = spike.

    Within hour t the chain first moves X_t -> X_{t+1} (p(t) into the spike
    regime, alpha_q back to normal), then the M prices of the hour are drawn
    i.i.d. from the noise of regime X_{t+1} around seasonal_v2.
    """

    def __init__(self, M: int, trend: str = "sin", alpha_p: float = 0.9, alpha_q: float = 0.5,
                 normal_noise: Optional[DiscreteDistribution] = None,
                 spike_noise: Optional[DiscreteDistribution] = None,
                 price_bound: float = 3000.0,
                 enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> None:
        super().__init__(M, ("normal", "spike"), enumeration_cap)
        _trend(trend)
        if not 0.0 <= alpha_q <= 1.0:
            raise DomainError(f"alpha_q must be in [0, 1], got {alpha_q}")
        spike_probability(0, trend, alpha_p)
        self.trend = trend
        self.alpha_p = float(alpha_p)
        self.alpha_q = float(alpha_q)
        self.noises = (normal_noise or normal_regime_noise(), spike_noise or spike_regime_noise())
        self.price_bound = float(price_bound)

    def transition_matrix(self, t: int) -> np.ndarray:
        p = spike_probability(t, self.trend, self.alpha_p)
        q = self.alpha_q
        return np.array([[1.0 - p, p], [q, 1.0 - q]])

    def base(self, t: int) -> np.ndarray:
        return np.array([seasonal_v2(t + m / self.M, self.trend) for m in range(self.M)])

    def n_outcomes(self, t: int, ps: int) -> int:
        return sum(len(n.support) ** self.M for n in self.noises)

    def _enumerate(self, t: int, ps: int) -> HourOutcomes:
        row = self.transition_matrix(t)[ps]
        base = self.base(t)
        blocks = []
        for j, noise in enumerate(self.noises):
            prices, probs = _product(base, noise, self.price_bound)
            blocks.append((prices, probs * row[j], np.full(probs.size, j, dtype=int)))
        return HourOutcomes(
            np.concatenate([b[0] for b in blocks]),
            np.concatenate([b[1] for b in blocks]),
            np.concatenate([b[2] for b in blocks]),
        )

    def sample_hour(self, t: int, ps: int, rng: np.random.Generator) -> SampledHour:
        row = self.transition_matrix(t)[ps]
        nxt = int(rng.random() < row[1])
        eps = self.noises[nxt].sample(rng, self.M)
        return SampledHour(np.clip(self.base(t) + eps, 0.0, self.price_bound), nxt)

    def describe(self) -> Dict[str, Any]:
        d = super().describe()
        d.update(trend=self.trend, alpha_p=self.alpha_p, alpha_q=self.alpha_q)
        return d


class DeterministicModel(PriceModel):
    """Known price vectors per hour: hourly_prices[t] is P_(t, t+1]."""

    def __init__(self, hourly_prices: Sequence[Sequence[float]]) -> None:
        arr = np.atleast_2d(np.asarray(hourly_prices, dtype=float))
        if np.any(arr < 0):
            raise DomainError("prices must be nonnegative")
        super().__init__(arr.shape[1], ("",))
        self.hourly_prices = arr

    def _prices(self, t: int) -> np.ndarray:
        if not 0 <= t < self.hourly_prices.shape[0]:
            raise DataError(f"no prices for hour {t}; path covers {self.hourly_prices.shape[0]} hours")
        return self.hourly_prices[t]

    def n_outcomes(self, t: int, ps: int) -> int:
        return 1

    def _enumerate(self, t: int, ps: int) -> HourOutcomes:
        return HourOutcomes(self._prices(t)[None, :].copy(), np.ones(1), np.zeros(1, dtype=int))

    def sample_hour(self, t: int, ps: int, rng: np.random.Generator) -> SampledHour:
        return SampledHour(self._prices(t).copy(), 0)

    def start_episode(self, rng: np.random.Generator) -> Episode:
        ep = Episode(self, rng)
        ep.n_hours = int(self.hourly_prices.shape[0])
        return ep
