# src/storagebid/exact/solver.py
from __future__ import annotations
from typing import Any, Dict, Optional, Tuple, Union
import logging

import numpy as np

from storagebid.common.errors import CapacityError
from storagebid.common.metrics import timer
from storagebid.common.state import BidPair, Index, State
from storagebid.common.table import ValueTable
from storagebid.exact.expectation import ExpectationEngine, bid_mask
from storagebid.market.config import MarketConfig, TerminalContribution
from storagebid.prices.base import PriceModel

logger = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_STATE_CAP",
    "backward_dp",
    "greedy_policy",
    "greedy_index",
    "post_values",
    "refine_terminal",
    "state_space_report",
]

# feasible pre-decision states summed over all periods
DEFAULT_STATE_CAP = 5_000_000


def _check_capacity(cfg: MarketConfig, n_price_states: int, state_cap: int) -> None:
    n = cfg.space(n_price_states).feasible_size * cfg.T
    if n > state_cap:
        raise CapacityError(
            f"backward DP over {n} states exceeds the cap of {state_cap}; "
            "train with Monotone-ADP instead"
        )


def backward_dp(cfg: MarketConfig, model: PriceModel, state_cap: int = DEFAULT_STATE_CAP,
                engine: Optional[ExpectationEngine] = None) -> ValueTable:
    """
    Exact V*_t for t = T..0 by backward induction.

    V_T is the terminal contribution; for t < T
        V_t(s) = max_b [C_{t,t+2}(s, b) + E[V_{t+1}(S_{t+1}) | s, b]].
    The returned table also carries the argmax bid indices per (t, state);
    ties go to the lexicographically smallest (lo, hi).
    """
    eng = engine or ExpectationEngine(cfg, model)
    P = model.n_price_states
    _check_capacity(cfg, P, state_cap)
    space = cfg.space(P)
    R, L, G = cfg.R_max + 1, cfg.L_max + 1, cfg.n_bids
    valid = space.valid_mask()
    infeasible_b = ~bid_mask(G).ravel()

    table = ValueTable.zeros(cfg, P, "pre")
    table.values[cfg.T] = cfg.terminal.values(space)
    policy = np.zeros((cfg.T,) + space.shape + (2,), dtype=np.int16)

    for t in reversed(range(cfg.T)):
        with timer() as elapsed:
            W = eng.expected_revenue(t + 1) + table.values[t + 1]
            for ps in range(P):
                for lo in range(G):
                    Q = eng.expect(t, W, ps, [lo]).reshape(R, L, G, G * G)
                    Q[..., infeasible_b] = -np.inf
                    best = np.argmax(Q, axis=-1)
                    table.values[t, :, :, lo, :, ps] = np.take_along_axis(Q, best[..., None], -1)[..., 0]
                    policy[t, :, :, lo, :, ps, 0] = best // G
                    policy[t, :, :, lo, :, ps, 1] = best % G
            table.values[t][~valid] = 0.0
            policy[t][~valid] = 0
        logger.info("BDP t=%d done in %.3fs", t, elapsed())

    table.policy = policy
    table.metadata = {"solver": "backward_dp", "model": model.describe()}
    return table


def greedy_index(vt: ValueTable, idx: Index, t: int, engine: ExpectationEngine,
                 values: Optional[np.ndarray] = None) -> Tuple[int, int]:
    """Grid indices of argmax_b [C_{t,t+2}(s, b) + E[V_{t+1} | s, b]] for state index `idx`."""
    V_next = vt.values[t + 1] if values is None else values
    W = engine.expected_revenue(t + 1) + V_next
    q = engine.expect_state(t, W, idx)
    q = np.where(bid_mask(q.shape[0]), q, -np.inf)
    k = int(np.argmax(q))
    return divmod(k, q.shape[0])


def greedy_policy(vt: ValueTable, s: Union[State, Index], t: int, model: PriceModel,
                  engine: Optional[ExpectationEngine] = None) -> BidPair:
    """Greedy bid at state s w.r.t. the pre-decision table vt (populated at t+1)."""
    cfg = vt.cfg
    eng = engine or ExpectationEngine(cfg, model)
    idx = cfg.state_index(s) if isinstance(s, State) else tuple(s)
    lo, hi = greedy_index(vt, idx, t, eng)
    return cfg.bid(lo, hi)


def post_values(vt: ValueTable, engine: ExpectationEngine) -> ValueTable:
    """
    Post-decision values from a pre-decision table:
    V^b_t(s, b) = E[V_{t+1}(S_{t+1}) | s, b] for t = 0..T-1.
    """
    cfg = vt.cfg
    P = vt.n_price_states
    out = ValueTable.zeros(cfg, P, "post")
    for t in range(cfg.T):
        for ps in range(P):
            out.values[t, ..., ps] = engine.expect(t, vt.values[t + 1], ps)
    out.metadata = {"derived_from": vt.metadata.get("solver", "table")}
    return out


def refine_terminal(cfg: MarketConfig, model: PriceModel, max_rounds: int = 5,
                    state_cap: int = DEFAULT_STATE_CAP) -> Tuple[ValueTable, int]:
    """
    Re-solve with the previous V*_0 (shifted so its minimum is 0) as the
    terminal contribution until the t=0 policy stops changing.
    Returns the last table and the number of solves.
    """
    eng = ExpectationEngine(cfg, model)
    valid = cfg.space(model.n_price_states).valid_mask()
    current = cfg
    previous: Optional[np.ndarray] = None
    table = backward_dp(current, model, state_cap, eng)
    rounds = 1
    while rounds < max_rounds:
        assert table.policy is not None
        p0 = table.policy[0]
        if previous is not None and np.array_equal(p0[valid], previous[valid]):
            break
        previous = p0.copy()
        v0 = table.values[0]
        terminal = np.where(valid, v0 - v0[valid].min(), 0.0)
        current = cfg.with_terminal(TerminalContribution("table", table=terminal))
        table = backward_dp(current, model, state_cap, eng)
        rounds += 1
        logger.info("Terminal refinement round %d: V_0 range [%.4f, %.4f]",
                    rounds, float(table.values[0][valid].min()), float(table.values[0][valid].max()))
    table.metadata["refinement_rounds"] = rounds
    return table, rounds


def state_space_report(cfg: MarketConfig, n_price_states: int = 1) -> Dict[str, Any]:
    """Full and feasible lattice cardinalities (per period and summed over periods)."""
    pre = cfg.space(n_price_states)
    post = cfg.space(n_price_states, post=True)
    g = cfg.n_bids
    return {
        "bid_levels": g,
        "feasible_bids": g * (g + 1) // 2,
        "price_states": n_price_states,
        "pre_full_per_period": pre.size,
        "pre_feasible_per_period": pre.feasible_size,
        "post_full_per_period": post.size,
        "post_feasible_per_period": post.feasible_size,
        "pre_feasible_total": pre.feasible_size * (cfg.T + 1),
        "post_feasible_total": post.feasible_size * cfg.T,
    }
