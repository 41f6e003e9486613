from __future__ import annotations
from dataclasses import dataclass
from typing import Sequence, Tuple, Union
import numpy as np

from storagebid.common.errors import DomainError

__all__ = ["DiscreteDistribution", "pseudonormal", "uniform", "integer_support"]


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite distribution: strictly increasing support with matching probabilities."""
    support: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self) -> None:
        s = np.asarray(self.support, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if s.size == 0 or s.size != p.size:
            raise DomainError("support and probs must be nonempty and of equal length")
        if np.any(np.diff(s) <= 0):
            raise DomainError("support must be strictly increasing")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("probs must be nonnegative and sum to 1")
        object.__setattr__(self, "support", tuple(float(x) for x in s))
        object.__setattr__(self, "probs", tuple(float(x) for x in p))

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.support, dtype=float)

    @property
    def pmf(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)

    def mean(self) -> float:
        return float(np.dot(self.values, self.pmf))

    def sample(self, rng: np.random.Generator, size: Union[int, Tuple[int, ...]] = 1) -> np.ndarray:
        idx = rng.choice(len(self.support), size=size, p=self.pmf)
        return self.values[idx]


def integer_support(lo: int, hi: int) -> Tuple[float, ...]:
    """{lo, lo+1, ..., hi}."""
    return tuple(float(x) for x in range(int(lo), int(hi) + 1))


def pseudonormal(support: Sequence[float], mu: float, sigma: float) -> DiscreteDistribution:
    """
    Normal density N(mu, sigma^2) evaluated on `support`, then normalized.
    """
    if sigma <= 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    s = np.asarray(support, dtype=float)
    if s.size == 0:
        raise DomainError("support must be nonempty")
    z = -((s - mu) ** 2) / (2.0 * sigma ** 2)
    w = np.exp(z - z.max())  # max-shifted: the ratio is unchanged
    return DiscreteDistribution(tuple(s), tuple(w / w.sum()))


def uniform(support: Sequence[float]) -> DiscreteDistribution:
    s = np.asarray(support, dtype=float)
    if s.size == 0:
        raise DomainError("support must be nonempty")
    return DiscreteDistribution(tuple(s), tuple(np.full(s.size, 1.0 / s.size)))
