# src/storagebid/adp/stepsize.py
from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable

from storagebid.common.errors import DomainError

__all__ = [
    "HarmonicStepsize",
    "ConstantStepsize",
    "BAKFStepsize",
    "make_stepsize",
    "next_stepsize",
]


@dataclass
class HarmonicStepsize:
    """
    alpha = 1 / N(s), N(s) the number of visits to s so far (this one included).
    """
    counts: Dict[Hashable, int] = field(default_factory=dict, init=False, repr=False)

    name = "harmonic"

    def reset(self) -> None:
        self.counts.clear()

    def visit(self, key: Hashable) -> int:
        n = self.counts.get(key, 0) + 1
        self.counts[key] = n
        return n

    def next(self, key: Hashable, observation: float, estimate: float) -> float:
        return 1.0 / self.visit(key)

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.name}


@dataclass
class ConstantStepsize(HarmonicStepsize):
    """alpha = c after the first visit (which emits 1)."""
    c: float = 0.1

    name = "constant"

    def __post_init__(self) -> None:
        if not 0.0 < self.c <= 1.0:
            raise DomainError(f"constant stepsize needs 0 < c <= 1, got {self.c}")

    def next(self, key: Hashable, observation: float, estimate: float) -> float:
        return 1.0 if self.visit(key) == 1 else self.c

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.name, "c": self.c}


@dataclass
class _KalmanStats:
    bias: float = 0.0
    second: float = 0.0
    lam: float = 0.0
    eta: float = 1.0
    alpha: float = 1.0


@dataclass
class BAKFStepsize(HarmonicStepsize):
    """
    Bias-adjusted Kalman filter stepsize.

    Per state, with error e = observation - estimate and McClain smoothing
    eta -> eta_bar for the statistics:
        bias    <- (1 - eta) bias + eta e
        second  <- (1 - eta) second + eta e^2
        sigma^2 =  (second - bias^2) / (1 + lambda)
        alpha   =  1 - sigma^2 / second              (1 when second == 0)
        lambda  <- (1 - alpha)^2 lambda + alpha^2
    alpha is floored at 1/N(s) and clipped to [0, 1]; the first visit emits 1.
    """
    eta_bar: float = 0.05
    stats: Dict[Hashable, _KalmanStats] = field(default_factory=dict, init=False, repr=False)

    name = "bakf"

    def __post_init__(self) -> None:
        if not 0.0 < self.eta_bar < 1.0:
            raise DomainError(f"BAKF needs 0 < eta_bar < 1, got {self.eta_bar}")

    def reset(self) -> None:
        super().reset()
        self.stats.clear()

    def next(self, key: Hashable, observation: float, estimate: float) -> float:
        n = self.visit(key)
        st = self.stats.setdefault(key, _KalmanStats())
        if n == 1:
            st.lam = 1.0
            st.alpha = 1.0
            return 1.0
        err = observation - estimate
        eta = st.eta
        st.bias = (1.0 - eta) * st.bias + eta * err
        st.second = (1.0 - eta) * st.second + eta * err * err
        st.eta = eta / (1.0 + eta - self.eta_bar)
        if st.second <= 0.0:
            alpha = 1.0
        else:
            sigma2 = max(st.second - st.bias ** 2, 0.0) / (1.0 + st.lam)
            alpha = 1.0 - sigma2 / st.second
        alpha = min(1.0, max(alpha, 1.0 / n))
        st.lam = (1.0 - alpha) ** 2 * st.lam + alpha ** 2
        st.alpha = alpha
        return alpha

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.name, "eta_bar": self.eta_bar}


def make_stepsize(spec: str = "harmonic", **kwargs: Any) -> HarmonicStepsize:
    """
    Stepsize rule from a CLI-style spec.
    spec in {"harmonic", "constant:<c>", "bakf", "bakf:<eta_bar>"}.
    """
    kind, _, arg = spec.strip().lower().partition(":")
    try:
        if kind == "harmonic":
            return HarmonicStepsize()
        if kind == "constant":
            return ConstantStepsize(c=float(arg) if arg else float(kwargs.get("c", 0.1)))
        if kind == "bakf":
            return BAKFStepsize(eta_bar=float(arg) if arg else float(kwargs.get("eta_bar", 0.05)))
    except ValueError:
        raise DomainError(f"Bad stepsize parameter in {spec!r}") from None
    raise DomainError(f"Unknown stepsize rule: {spec!r}")


def next_stepsize(rule: HarmonicStepsize, key: Hashable, observation: float,
                  estimate: float = 0.0) -> float:
    alpha = rule.next(key, observation, estimate)
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"stepsize {alpha} outside [0, 1]")
    return alpha
