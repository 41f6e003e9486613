# src/storagebid/adp/observation.py
from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from storagebid.common.errors import CapabilityError, ConfigurationError
from storagebid.common.state import Index
from storagebid.common.table import ValueTable
from storagebid.exact.expectation import ExpectationEngine, bid_mask
from storagebid.market.config import MarketConfig
from storagebid.market.contribution import ContributionEstimator
from storagebid.market.mechanics import (
    discharge_indicators,
    lifetime_transition,
    resource_transition,
    settle_grid,
    settlement_outcomes,
)
from storagebid.prices.base import Episode, PriceModel

__all__ = [
    "Observation",
    "smooth",
    "masked_max",
    "settle_state",
    "sample_observation_pre",
    "sample_observation_post",
    "post_bellman",
]

EXACT = "exact"
SAA = "saa"


@dataclass(frozen=True)
class Observation:
    """v-hat at (t, state); `bid` is the maximizing bid, `next_state` the sampled S_{t+1} if any."""
    t: int
    state: Index
    value: float
    bid: Optional[Tuple[int, int]] = None
    next_state: Optional[Index] = None


def smooth(old: float, obs: float, alpha: float) -> float:
    """(1 - alpha) * old + alpha * obs."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return (1.0 - alpha) * old + alpha * obs


def masked_max(q: np.ndarray) -> Tuple[float, int, int]:
    """Max of a (G, G) bid array over lo <= hi; the first maximizer in (lo, hi) order."""
    g = q.shape[0]
    masked = np.where(bid_mask(g), q, -np.inf)
    k = int(np.argmax(masked))
    lo, hi = divmod(k, g)
    return float(masked[lo, hi]), lo, hi


def settle_state(cfg: MarketConfig, r: int, l: int, a_lo: int, a_hi: int,
                 prices: np.ndarray) -> Tuple[int, int]:
    """(R, L) after one hour settled under the stored bid (a_lo, a_hi)."""
    bid = cfg.bid(a_lo, a_hi)
    r_next, _ = resource_transition(r, settlement_outcomes(prices, bid, cfg), cfg)
    l_next, _ = lifetime_transition(l, discharge_indicators(prices, bid, cfg), cfg)
    return r_next, l_next


def sample_observation_pre(idx: Index, t: int, vt: ValueTable, mode: str, model: PriceModel,
                           rng: np.random.Generator, engine: Optional[ExpectationEngine] = None,
                           J: int = 1) -> Observation:
    """
    Observation of V_t at pre-decision state idx.

    exact : max_b [C_{t,t+2}(s, b) + E[V_{t+1}(S_{t+1}) | s, b]]   (no noise)
    saa   : the expectation of V_{t+1} replaced by the mean over J sampled
            next states; biased upward because the max is taken after averaging.
    """
    cfg = vt.cfg
    if mode == EXACT:
        if engine is None:
            if not model.can_enumerate:
                raise CapabilityError("exact observations need an enumerable price model")
            engine = ExpectationEngine(cfg, model)
        W = engine.expected_revenue(t + 1) + vt.values[t + 1]
        value, lo, hi = masked_max(engine.expect_state(t, W, idx))
        return Observation(t, tuple(idx), value, (lo, hi))
    if mode != SAA:
        raise ConfigurationError(f"Unknown observation mode: {mode!r}")
    if J < 1:
        raise ConfigurationError("SAA needs J >= 1")
    r, l, a_lo, a_hi, ps = idx
    if engine is None and model.can_enumerate:
        engine = ExpectationEngine(cfg, model)
    g = cfg.n_bids
    acc = np.zeros((g, g), dtype=float)
    contrib = np.zeros((g, g), dtype=float)
    for _ in range(J):
        hour = model.sample_hour(t, ps, rng)
        rn, ln = settle_state(cfg, r, l, a_lo, a_hi, hour.prices)
        acc += vt.values[t + 1][rn, ln, :, :, hour.next_state]
        if engine is None:
            nxt = model.sample_hour(t + 1, hour.next_state, rng)
            contrib += settle_grid(nxt.prices, cfg).revenue[rn, ln]
    contrib = engine.contribution_state(t, idx) if engine is not None else contrib / J
    value, lo, hi = masked_max(contrib + acc / J)
    return Observation(t, tuple(idx), value, (lo, hi))


def sample_observation_post(idx: Index, t: int, vb: ValueTable, contribution: ContributionEstimator,
                            episode: Episode) -> Observation:
    """
    Single-sample observation of V^b_t at post-decision state idx.

    One hour t is drawn from the episode and settled under the stored bid;
    the observation is max_b' [C_{t+1,t+3}(S_{t+1}, b') + V^b_{t+1}(S_{t+1}, b')],
    or C_term(S_T) at t = T-1.
    """
    cfg = vb.cfg
    r, l, a_lo, a_hi, b_lo, b_hi, ps = idx
    hour = episode.hour(t, ps)
    rn, ln = settle_state(cfg, r, l, a_lo, a_hi, hour.prices)
    nxt = (rn, ln, b_lo, b_hi, int(hour.next_state))
    if t >= cfg.T - 1:
        return Observation(t, tuple(idx), cfg.terminal.value_at(nxt), None, nxt)
    q = contribution.state(t + 1, nxt) + vb.values[t + 1][rn, ln, b_lo, b_hi, :, :, nxt[-1]]
    value, lo, hi = masked_max(q)
    return Observation(t, tuple(idx), value, (lo, hi), nxt)


def post_bellman(vb: ValueTable, cfg: MarketConfig, model: PriceModel,
                 engine: Optional[ExpectationEngine] = None) -> ValueTable:
    """
    The post-decision Bellman operator applied to a whole table:

        (HV)_t(s, b)     = E[max_b' (C_{t+1,t+3}(S_{t+1}, b') + V_{t+1}(S_{t+1}, b')) | s, b]
        (HV)_{T-1}(s, b) = E[C_term(S_T) | s, b]
    """
    if not model.can_enumerate:
        raise CapabilityError("post_bellman needs an enumerable price model")
    eng = engine or ExpectationEngine(cfg, model)
    P = vb.n_price_states
    out = ValueTable.zeros(cfg, P, "post")
    pre_space = cfg.space(P)
    g = cfg.n_bids
    infeasible = ~bid_mask(g)
    terminal = cfg.terminal.values(pre_space)
    for t in range(cfg.T):
        if t == cfg.T - 1:
            W = terminal
        else:
            q = eng.contribution(t + 1) + vb.values[t + 1]        # (R, L, G, G, G, G, P)
            q[:, :, :, :, infeasible, :] = -np.inf
            W = q.max(axis=(4, 5))
            W[~pre_space.valid_mask()] = 0.0
        for ps in range(P):
            out.values[t, ..., ps] = eng.expect(t, W, ps)
    out.metadata = {"operator": "post_bellman"}
    return out
