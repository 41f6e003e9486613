# src/storagebid/market/mechanics.py
"""
Settlement mechanics of the hour-ahead market.

Index convention: settlement m runs 0..M-1 inside an hour. Trajectories have
M+1 entries; trajectory[m] is the level entering settlement m, and the
discount/penalty of settlement m are evaluated at that level.
"""
from __future__ import annotations
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union
import numpy as np

from storagebid.common.errors import ConfigurationError
from storagebid.common.state import BidPair, State
from storagebid.market.config import MarketConfig

ArrayLike = Union[Sequence[float], np.ndarray]

__all__ = [
    "as_price_vector",
    "settlement_outcomes",
    "discharge_indicators",
    "resource_transition",
    "lifetime_transition",
    "settlement_discount",
    "undersupply_factor",
    "hourly_revenue",
    "state_transition",
    "GridSettlement",
    "outcome_grid",
    "settle_grid",
]


def as_price_vector(P: ArrayLike, cfg: Optional[MarketConfig] = None) -> np.ndarray:
    """Validate an intra-hour price vector (length M, within [0, price_bound])."""
    p = np.asarray(P, dtype=float).ravel()
    if cfg is not None:
        if p.size != cfg.M:
            raise ConfigurationError(f"price vector has {p.size} entries, expected M={cfg.M}")
        if np.any(p > cfg.price_bound):
            raise ConfigurationError(f"price above bound {cfg.price_bound}")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ConfigurationError("prices must be finite and nonnegative")
    return p


def settlement_outcomes(P: ArrayLike, b: BidPair, cfg: Optional[MarketConfig] = None) -> np.ndarray:
    """
    q(P, b): +1 (sell) where b.high < P[m], -1 (buy) where b.low > P[m], 0 otherwise.
    Inequalities are strict: a price equal to a threshold leaves the device idle.
    """
    p = as_price_vector(P, cfg)
    return (b.high < p).astype(np.int8) - (b.low > p).astype(np.int8)


def discharge_indicators(P: ArrayLike, b: BidPair, cfg: Optional[MarketConfig] = None) -> np.ndarray:
    """d(P, b): 1 where the sell bid clears."""
    p = as_price_vector(P, cfg)
    return (b.high < p).astype(np.int8)


def resource_transition(r: int, q_s: ArrayLike, cfg: MarketConfig) -> Tuple[int, List[int]]:
    """Apply the M settlement outcomes to resource level r; returns (final, trajectory)."""
    if not 0 <= r <= cfg.R_max:
        raise ConfigurationError(f"resource level {r} outside [0, {cfg.R_max}]")
    traj = [int(r)]
    for q in np.asarray(q_s, dtype=int):
        traj.append(max(0, min(traj[-1] - int(q), cfg.R_max)))
    return traj[-1], traj


def lifetime_transition(l: int, d_s: ArrayLike, cfg: MarketConfig) -> Tuple[int, List[int]]:
    """Decrement lifetime l on every discharge, floored at 0; returns (final, trajectory)."""
    if not 0 <= l <= cfg.L_max:
        raise ConfigurationError(f"lifetime {l} outside [0, {cfg.L_max}]")
    traj = [int(l)]
    for d in np.asarray(d_s, dtype=int):
        traj.append(max(0, traj[-1] - int(d)))
    return traj[-1], traj


def settlement_discount(l_at_m: int, outcome_m: int, cfg: MarketConfig) -> float:
    """beta(l) when selling, 1 otherwise."""
    return float(cfg.beta[l_at_m]) if outcome_m == 1 else 1.0


def undersupply_factor(r_at_m: int, outcome_m: int, cfg: MarketConfig) -> float:
    """-K when obligated to sell from an empty device, 1 otherwise."""
    return -float(cfg.K) if (r_at_m == 0 and outcome_m == 1) else 1.0


def hourly_revenue(r: int, l: int, P: ArrayLike, b: BidPair, cfg: MarketConfig) -> float:
    """Revenue C(r, l, P, b) of one hour of settlements under bid b."""
    p = as_price_vector(P, cfg)
    q = settlement_outcomes(p, b, cfg)
    d = discharge_indicators(p, b, cfg)
    _, r_traj = resource_transition(r, q, cfg)
    _, l_traj = lifetime_transition(l, d, cfg)
    total = 0.0
    for m in range(cfg.M):
        gamma = settlement_discount(l_traj[m], int(q[m]), cfg)
        u = undersupply_factor(r_traj[m], int(q[m]), cfg)
        total += gamma * p[m] * int(q[m]) * u
    return float(total)


def state_transition(s: State, b: BidPair, P: ArrayLike, next_price_state: int, cfg: MarketConfig) -> State:
    """
    S_{t+1} from S_t: the hour (t, t+1] settles under the previous bid s.prev_bid,
    and the new bid b becomes the stored previous bid.
    """
    p = as_price_vector(P, cfg)
    r_next, _ = resource_transition(s.R, settlement_outcomes(p, s.prev_bid, cfg), cfg)
    l_next, _ = lifetime_transition(s.L, discharge_indicators(p, s.prev_bid, cfg), cfg)
    return State(r_next, l_next, b, int(next_price_state))


# ------------------ Vectorized settlement over the bid grid ------------------ #

@dataclass(frozen=True)
class GridSettlement:
    """
    One price vector settled against every (R, L, lo, hi) at once.

    next_R  : (R_max+1, G, G)          resource after the hour
    next_L  : (L_max+1, G, G)          lifetime after the hour
    revenue : (R_max+1, L_max+1, G, G) hourly revenue
    """
    next_R: np.ndarray
    next_L: np.ndarray
    revenue: np.ndarray


def outcome_grid(P: ArrayLike, grid: np.ndarray) -> np.ndarray:
    """q for every grid pair: shape (G, G, M), indexed [lo, hi, m]."""
    p = np.asarray(P, dtype=float).ravel()
    g = np.asarray(grid, dtype=float)
    sell = (g[None, :, None] < p[None, None, :]).astype(np.int8)
    buy = (g[:, None, None] > p[None, None, :]).astype(np.int8)
    return sell - buy


def settle_grid(P: ArrayLike, cfg: MarketConfig) -> GridSettlement:
    """Vectorized equivalent of resource_transition, lifetime_transition and hourly_revenue."""
    p = as_price_vector(P, cfg)
    q = outcome_grid(p, cfg.grid)
    beta = cfg.beta_table
    g = cfg.n_bids
    r_cur = np.broadcast_to(np.arange(cfg.R_max + 1)[:, None, None], (cfg.R_max + 1, g, g)).copy()
    l_cur = np.broadcast_to(np.arange(cfg.L_max + 1)[:, None, None], (cfg.L_max + 1, g, g)).copy()
    revenue = np.zeros((cfg.R_max + 1, cfg.L_max + 1, g, g), dtype=float)
    for m in range(cfg.M):
        qm = q[:, :, m]
        sell = qm == 1
        gamma = np.where(sell[None], beta[l_cur], 1.0)              # (L, G, G)
        under = np.where(sell[None] & (r_cur == 0), -cfg.K, 1.0)   # (R, G, G)
        revenue += gamma[None, :, :, :] * (p[m] * qm)[None, None] * under[:, None, :, :]
        r_cur = np.clip(r_cur - qm[None], 0, cfg.R_max)
        l_cur = np.maximum(l_cur - sell[None].astype(int), 0)
    return GridSettlement(next_R=r_cur, next_L=l_cur, revenue=revenue)
