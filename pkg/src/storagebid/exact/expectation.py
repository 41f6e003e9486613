# src/storagebid/exact/expectation.py
"""
Exact expectations over enumerated hours.

The state at t carries the bid a placed at t-1; hour t settles under a and
moves (R, L, ps) to (R', L', ps'). A quantity W over the pre-decision lattice
at t+1 (indexed by the bid b placed at t in the bid axes) then has the
expectation

    sum_k p_k * W[R'_k(R, a), L'_k(L, a), b, ps'_k]

which is `ExpectationEngine.expect`. Choosing W gives every quantity the
solvers need:

    W = expected revenue of hour t+1   ->  C_{t,t+2}(s, b)
    W = V_{t+1}                        ->  post-decision value of (s, b)
    W = both                           ->  Bellman Q-values
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple
import logging

import numpy as np

from storagebid.common.errors import CapabilityError
from storagebid.common.state import BidPair, Index, State
from storagebid.market.config import MarketConfig
from storagebid.market.mechanics import settle_grid
from storagebid.prices.base import PriceModel

logger = logging.getLogger(__name__)

__all__ = ["HourData", "ExpectationEngine", "expected_contribution", "bid_mask"]


@dataclass(frozen=True)
class HourData:
    """
    Hour t from one price state, settled against the whole grid.

    probs       : (K,)
    next_states : (K,)
    next_R      : (K, R, G, G)   resource after the hour, per starting R and bid
    next_L      : (K, L, G, G)
    revenue     : (R, L, G, G)   expected hourly revenue per starting (R, L) and bid
    """
    probs: np.ndarray
    next_states: np.ndarray
    next_R: np.ndarray
    next_L: np.ndarray
    revenue: np.ndarray


def bid_mask(n_bids: int) -> np.ndarray:
    """(G, G) boolean: True where lo <= hi."""
    g = np.arange(n_bids)
    return g[:, None] <= g[None, :]


class ExpectationEngine:
    """Caches settled hours of one (config, model) pair."""

    def __init__(self, cfg: MarketConfig, model: PriceModel) -> None:
        if not model.can_enumerate:
            raise CapabilityError(
                f"{type(model).__name__} cannot enumerate; exact expectations need an enumerable model"
            )
        self.cfg = cfg
        self.model = model
        self.n_ps = model.n_price_states
        self._hours: Dict[Tuple[int, int], HourData] = {}
        self._revenue: Dict[int, np.ndarray] = {}

    # ---- hours --------------------------------------------------------------
    def hour(self, t: int, ps: int) -> HourData:
        key = (int(t), int(ps))
        if key not in self._hours:
            out = self.model.enumerate_hour(t, ps)
            keep = out.probs > 0
            prices, probs, nxt = out.prices[keep], out.probs[keep], out.next_states[keep]
            cfg = self.cfg
            g = cfg.n_bids
            next_R = np.empty((probs.size, cfg.R_max + 1, g, g), dtype=np.intp)
            next_L = np.empty((probs.size, cfg.L_max + 1, g, g), dtype=np.intp)
            revenue = np.zeros((cfg.R_max + 1, cfg.L_max + 1, g, g), dtype=float)
            for k in range(probs.size):
                st = settle_grid(prices[k], cfg)
                next_R[k] = st.next_R
                next_L[k] = st.next_L
                revenue += probs[k] * st.revenue
            self._hours[key] = HourData(probs, nxt.astype(np.intp), next_R, next_L, revenue)
            logger.debug("Settled hour t=%d ps=%d over %d outcomes", t, ps, probs.size)
        return self._hours[key]

    def expected_revenue(self, t: int) -> np.ndarray:
        """Expected revenue of hour t laid out as W: shape (R, L, G, G, P)."""
        if t not in self._revenue:
            self._revenue[t] = np.stack([self.hour(t, ps).revenue for ps in range(self.n_ps)], axis=-1)
        return self._revenue[t]

    # ---- expectations -------------------------------------------------------
    def expect(self, t: int, W: np.ndarray, ps: int, lo: Optional[Sequence[int]] = None) -> np.ndarray:
        """
        E[W(S_{t+1}, b) | S_t] for every state at t with price state `ps`
        (optionally only previous-bid rows `lo`) and every bid b.

        W has shape (R, L, G, G, P); the result has shape (R, L, n_lo, G, G, G),
        indexed [R, L, a_lo, a_hi, b_lo, b_hi].
        """
        hd = self.hour(t, ps)
        rows = np.arange(self.cfg.n_bids) if lo is None else np.asarray(lo, dtype=np.intp)
        R, L = self.cfg.R_max + 1, self.cfg.L_max + 1
        g = self.cfg.n_bids
        out = np.zeros((R, L, rows.size, g, g, g), dtype=float)
        for k in range(hd.probs.size):
            Wk = W[..., hd.next_states[k]]
            rn = hd.next_R[k][:, None, rows, :]
            ln = hd.next_L[k][None, :, rows, :]
            out += hd.probs[k] * Wk[rn, ln]
        return out

    def expect_state(self, t: int, W: np.ndarray, idx: Index) -> np.ndarray:
        """E[W(S_{t+1}, b) | S_t = idx] for every bid b: shape (G, G)."""
        r, l, a_lo, a_hi, ps = idx
        hd = self.hour(t, ps)
        out = np.zeros((self.cfg.n_bids, self.cfg.n_bids), dtype=float)
        for k in range(hd.probs.size):
            rn = hd.next_R[k][r, a_lo, a_hi]
            ln = hd.next_L[k][l, a_lo, a_hi]
            out += hd.probs[k] * W[rn, ln, :, :, hd.next_states[k]]
        return out

    def contribution_state(self, t: int, idx: Index) -> np.ndarray:
        """C_{t,t+2}(s, b) for one state and every bid: shape (G, G)."""
        return self.expect_state(t, self.expected_revenue(t + 1), idx)

    def contribution(self, t: int) -> np.ndarray:
        """C_{t,t+2} over the post-decision lattice: shape (R, L, G, G, G, G, P)."""
        W = self.expected_revenue(t + 1)
        return np.stack([self.expect(t, W, ps) for ps in range(self.n_ps)], axis=-1)


def expected_contribution(s: State, b: BidPair, t: int, model: PriceModel, cfg: MarketConfig,
                          engine: Optional[ExpectationEngine] = None) -> float:
    """E[C(R_{t+1}, L_{t+1}, P_(t+1,t+2], b) | S_t = s]."""
    eng = engine or ExpectationEngine(cfg, model)
    lo, hi = cfg.bid_index(b)
    return float(eng.contribution_state(t, cfg.state_index(s))[lo, hi])
