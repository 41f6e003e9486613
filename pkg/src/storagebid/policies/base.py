# src/storagebid/policies/base.py
from __future__ import annotations
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Tuple, Union

from storagebid.common.errors import ConfigurationError
from storagebid.common.state import BidPair, Index, State
from storagebid.common.table import ValueTable
from storagebid.exact.expectation import ExpectationEngine
from storagebid.exact.solver import greedy_index
from storagebid.adp.observation import masked_max
from storagebid.market.config import MarketConfig
from storagebid.market.contribution import ContributionEstimator

__all__ = [
    "Policy",
    "IdlePolicy",
    "FixedBidPolicy",
    "GreedyPrePolicy",
    "GreedyPostPolicy",
    "greedy_from_post",
]


class Policy(ABC):
    """Decision function (t, state) -> bid on the configured grid."""

    name = "policy"

    def __init__(self, cfg: MarketConfig) -> None:
        self.cfg = cfg

    @abstractmethod
    def decide(self, t: int, idx: Index) -> Tuple[int, int]:
        """Grid indices (lo, hi) of the bid placed at t from pre-decision state index idx."""

    def bid(self, t: int, s: Union[State, Index]) -> BidPair:
        idx = self.cfg.state_index(s) if isinstance(s, State) else tuple(s)
        lo, hi = self.decide(t, idx)
        return self.cfg.bid(lo, hi)

    def describe(self) -> Dict[str, Any]:
        return {"policy": self.name}


class IdlePolicy(Policy):
    """Always (b_min, b_max)."""

    name = "idle"

    def decide(self, t: int, idx: Index) -> Tuple[int, int]:
        return 0, self.cfg.n_bids - 1


class FixedBidPolicy(Policy):
    name = "fixed"

    def __init__(self, cfg: MarketConfig, bid: BidPair) -> None:
        super().__init__(cfg)
        self.indices = cfg.bid_index(bid)

    def decide(self, t: int, idx: Index) -> Tuple[int, int]:
        return self.indices

    def describe(self) -> Dict[str, Any]:
        b = self.cfg.bid(*self.indices)
        return {"policy": self.name, "bid": [b.low, b.high]}


class GreedyPrePolicy(Policy):
    """argmax_b [C_{t,t+2}(s, b) + E[V_{t+1}(S_{t+1}) | s, b]] for a pre-decision table."""

    name = "greedy-pre"

    def __init__(self, table: ValueTable, engine: ExpectationEngine) -> None:
        if table.post:
            raise ConfigurationError("GreedyPrePolicy needs a pre-decision table")
        super().__init__(table.cfg)
        self.table = table
        self.engine = engine

    def decide(self, t: int, idx: Index) -> Tuple[int, int]:
        if self.table.policy is not None:
            lo, hi = self.table.policy[(t,) + tuple(idx)]
            return int(lo), int(hi)
        return greedy_index(self.table, idx, t, self.engine)


class GreedyPostPolicy(Policy):
    """argmax_b [C_{t,t+2}(s, b) + V^b_t(s, b)] for a post-decision table."""

    name = "greedy-post"

    def __init__(self, table: ValueTable, contribution: ContributionEstimator) -> None:
        if not table.post:
            raise ConfigurationError("GreedyPostPolicy needs a post-decision table")
        super().__init__(table.cfg)
        self.table = table
        self.contribution = contribution

    def decide(self, t: int, idx: Index) -> Tuple[int, int]:
        r, l, lo, hi, ps = idx
        q = self.contribution.state(t, idx) + self.table.values[t][r, l, lo, hi, :, :, ps]
        _, b_lo, b_hi = masked_max(q)
        return b_lo, b_hi


def greedy_from_post(vb: ValueTable, s: Union[State, Index], t: int,
                     contribution: ContributionEstimator,
                     policy: Optional[GreedyPostPolicy] = None) -> BidPair:
    """Greedy bid from a post-decision table; lexicographically smallest on ties."""
    pol = policy or GreedyPostPolicy(vb, contribution)
    return pol.bid(t, s)
