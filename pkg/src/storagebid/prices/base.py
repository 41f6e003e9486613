# src/storagebid/prices/base.py
from __future__ import annotations
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple
import numpy as np

from storagebid.common.errors import CapabilityError, CapacityError

__all__ = [
    "SampledHour",
    "HourOutcomes",
    "PriceModel",
    "Episode",
    "enumerate_hour",
    "sample_hour",
    "DEFAULT_ENUMERATION_CAP",
]

DEFAULT_ENUMERATION_CAP = 10 ** 6


@dataclass(frozen=True)
class SampledHour:
    """One realized hour: M settlement prices and the next price-model state."""
    prices: np.ndarray
    next_state: int


@dataclass(frozen=True)
class HourOutcomes:
    """
    Every outcome of one hour, each exactly once.

    prices      : (K, M)
    probs       : (K,)   summing to 1
    next_states : (K,)   price-model state index after the hour
    """
    prices: np.ndarray
    probs: np.ndarray
    next_states: np.ndarray

    def __len__(self) -> int:
        return int(self.probs.size)


class PriceModel(ABC):
    """
    Source of intra-hour price vectors.

    Hour t covers (t, t+1]. Models that can enumerate give exact expectations;
    models that can sample drive single-sample training and evaluation.
    """

    can_enumerate: bool = True
    can_sample: bool = True

    def __init__(self, M: int, price_states: Tuple[str, ...] = ("",),
                 enumeration_cap: int = DEFAULT_ENUMERATION_CAP) -> None:
        if M < 1:
            raise ValueError("M must be >= 1")
        self.M = int(M)
        self.price_states = tuple(price_states)
        self.enumeration_cap = int(enumeration_cap)

    @property
    def n_price_states(self) -> int:
        return len(self.price_states)

    def initial_price_state(self) -> int:
        return 0

    # ---- enumeration ------------------------------------------------------
    def n_outcomes(self, t: int, ps: int) -> int:
        """Number of outcomes enumerate_hour(t, ps) would produce."""
        raise CapabilityError(f"{type(self).__name__} cannot enumerate")

    def enumerate_hour(self, t: int, ps: int) -> HourOutcomes:
        if not self.can_enumerate:
            raise CapabilityError(f"{type(self).__name__} cannot enumerate; use sampling")
        n = self.n_outcomes(t, ps)
        if n > self.enumeration_cap:
            raise CapacityError(
                f"hour {t} has {n} outcomes (cap {self.enumeration_cap}); "
                "use SAA or single-sample observations instead of exact expectations"
            )
        return self._enumerate(t, ps)

    def _enumerate(self, t: int, ps: int) -> HourOutcomes:
        raise CapabilityError(f"{type(self).__name__} cannot enumerate")

    # ---- sampling ---------------------------------------------------------
    @abstractmethod
    def sample_hour(self, t: int, ps: int, rng: np.random.Generator) -> SampledHour:
        ...

    def start_episode(self, rng: np.random.Generator) -> "Episode":
        """A sample path whose hours stay consistent once drawn."""
        return Episode(self, rng)

    def describe(self) -> Dict[str, Any]:
        return {"kind": type(self).__name__, "M": self.M, "price_states": list(self.price_states)}


class Episode:
    """
    Lazily sampled path of one model. hour(t, ps) draws once per (t, ps)
    and returns the same SampledHour on later calls.
    """

    n_hours: Optional[int] = None

    def __init__(self, model: PriceModel, rng: np.random.Generator) -> None:
        self.model = model
        self.rng = rng
        self._hours: Dict[Tuple[int, int], SampledHour] = {}

    def has_hour(self, t: int) -> bool:
        return t >= 0 and (self.n_hours is None or t < self.n_hours)

    def hour(self, t: int, ps: int) -> SampledHour:
        key = (int(t), int(ps))
        if key not in self._hours:
            self._hours[key] = self.model.sample_hour(t, ps, self.rng)
        return self._hours[key]


def enumerate_hour(model: PriceModel, t: int, ps: int) -> HourOutcomes:
    return model.enumerate_hour(t, ps)


def sample_hour(model: PriceModel, t: int, ps: int, rng: np.random.Generator) -> SampledHour:
    if not model.can_sample:
        raise CapabilityError(f"{type(model).__name__} cannot sample")
    return model.sample_hour(t, ps, rng)
