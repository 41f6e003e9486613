from __future__ import annotations

import numpy as np
import pytest

from storagebid.common.errors import ConfigurationError
from storagebid.common.state import BidPair, PostState, State, StateSpace
from storagebid.market.config import (
    MarketConfig,
    TerminalContribution,
    beta_constant,
    beta_linear,
    beta_power,
    beta_step,
    linear_grid,
    linear_terminal,
)
from storagebid.market.mechanics import (
    discharge_indicators,
    hourly_revenue,
    lifetime_transition,
    resource_transition,
    settle_grid,
    settlement_discount,
    settlement_outcomes,
    state_transition,
    undersupply_factor,
)


def _cfg(**kw) -> MarketConfig:
    base = dict(M=2, T=3, R_max=3, L_max=0, K=1.0, bid_grid=(10.0, 20.0, 40.0), beta=(1.0,))
    base.update(kw)
    return MarketConfig(**base)


def _reference_hour(r, l, prices, low, high, cfg):
    """Straight-line settlement: one loop, no helpers."""
    total = 0.0
    for p in prices:
        q = 1 if high < p else (-1 if low > p else 0)
        gamma = cfg.beta[l] if q == 1 else 1.0
        u = -cfg.K if (r == 0 and q == 1) else 1.0
        total += gamma * p * q * u
        r = min(max(r - q, 0), cfg.R_max)
        if q == 1:
            l = max(l - 1, 0)
    return r, l, total


def test_bid_pair_requires_order():
    with pytest.raises(ValueError):
        BidPair(30.0, 20.0)


def test_outcomes_are_strict():
    b = BidPair(20.0, 40.0)
    q = settlement_outcomes([50.0, 10.0, 40.0, 20.0, 30.0], b)
    assert q.tolist() == [1, -1, 0, 0, 0]
    assert discharge_indicators([50.0, 10.0, 40.0], b).tolist() == [1, 0, 0]


def test_resource_transition_clips():
    cfg = _cfg()
    assert resource_transition(1, [1, -1], cfg) == (1, [1, 0, 1])
    assert resource_transition(0, [1, 1], cfg) == (0, [0, 0, 0])
    assert resource_transition(3, [-1, -1], cfg) == (3, [3, 3, 3])


def test_lifetime_transition_floors_at_zero():
    cfg = _cfg(L_max=2, beta=(0.0, 0.5, 1.0))
    assert lifetime_transition(2, [1, 1, 1], cfg) == (0, [2, 1, 0, 0])


def test_revenue_worked_examples():
    cfg = _cfg()
    b = BidPair(20.0, 40.0)
    assert hourly_revenue(1, 0, [50.0, 10.0], b, cfg) == pytest.approx(40.0)
    # selling from an empty device is penalized
    assert hourly_revenue(0, 0, [50.0, 10.0], b, cfg) == pytest.approx(-60.0)


def test_revenue_discounted_by_lifetime():
    cfg = _cfg(L_max=2, beta=(0.0, 0.5, 1.0))
    b = BidPair(10.0, 20.0)
    # two sells: first at beta(2)=1, second at beta(1)=0.5
    assert hourly_revenue(3, 2, [30.0, 30.0], b, cfg) == pytest.approx(30.0 + 15.0)
    assert settlement_discount(1, 1, cfg) == 0.5
    assert settlement_discount(0, -1, cfg) == 1.0
    assert undersupply_factor(0, 1, _cfg(K=2.5)) == -2.5
    assert undersupply_factor(0, -1, cfg) == 1.0
    assert undersupply_factor(1, 1, cfg) == 1.0


def test_price_vector_validation():
    cfg = _cfg()
    with pytest.raises(ConfigurationError):
        hourly_revenue(1, 0, [50.0], BidPair(20.0, 40.0), cfg)
    with pytest.raises(ConfigurationError):
        hourly_revenue(1, 0, [50.0, -1.0], BidPair(20.0, 40.0), cfg)


def test_state_transition_settles_previous_bid():
    cfg = _cfg()
    s = State(1, 0, BidPair(10.0, 20.0))
    new_bid = BidPair(40.0, 40.0)
    nxt = state_transition(s, new_bid, [30.0, 30.0], 0, cfg)
    # previous bid sells twice: 1 -> 0 -> 0
    assert nxt == State(0, 0, new_bid, 0)


def test_settle_grid_matches_reference():
    rng = np.random.default_rng(7)
    cfg = MarketConfig(M=4, T=2, R_max=3, L_max=2, K=1.5, bid_grid=(10.0, 25.0, 40.0, 55.0),
                       beta=(0.2, 0.6, 1.0))
    g = cfg.n_bids
    for _ in range(300):
        prices = rng.integers(0, 70, size=cfg.M).astype(float)
        st = settle_grid(prices, cfg)
        r = int(rng.integers(0, cfg.R_max + 1))
        l = int(rng.integers(0, cfg.L_max + 1))
        lo = int(rng.integers(0, g))
        hi = int(rng.integers(lo, g))
        low, high = cfg.bid_grid[lo], cfg.bid_grid[hi]
        r_ref, l_ref, rev_ref = _reference_hour(r, l, prices, low, high, cfg)
        assert st.next_R[r, lo, hi] == r_ref
        assert st.next_L[l, lo, hi] == l_ref
        assert st.revenue[r, l, lo, hi] == pytest.approx(rev_ref, rel=1e-9, abs=1e-9)
        assert hourly_revenue(r, l, prices, BidPair(low, high), cfg) == pytest.approx(rev_ref, rel=1e-9, abs=1e-9)


def test_beta_families():
    assert beta_constant(3) == (1.0, 1.0, 1.0, 1.0)
    assert beta_step(2) == (0.0, 1.0, 1.0)
    assert beta_linear(2) == pytest.approx((0.0, 0.5, 1.0))
    power = beta_power(3, 6.0)
    assert power[-1] == pytest.approx(1.0)
    assert all(a <= b for a, b in zip(power, power[1:]))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        _cfg(beta=(1.0, 1.0))
    with pytest.raises(ConfigurationError):
        _cfg(bid_grid=(20.0, 10.0))
    with pytest.raises(ConfigurationError):
        _cfg(L_max=1, beta=(1.0, 0.5))


def test_config_round_trip_through_dict():
    cfg = _cfg(terminal=linear_terminal(2.0), bid_grid=linear_grid(15, 85, 30))
    again = MarketConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    assert again.n_bids == 30


def test_grid_index_helpers():
    cfg = _cfg()
    assert cfg.bid_index(BidPair(10.0, 40.0)) == (0, 2)
    assert cfg.snap(33.0) == 40.0
    with pytest.raises(ConfigurationError):
        cfg.level_index(11.0)
    s = cfg.initial_state()
    assert cfg.state_from_index(cfg.state_index(s)) == s
    assert s.prev_bid == cfg.idle_bid
    post = PostState(s, BidPair(20.0, 40.0))
    assert cfg.post_index(post) == (0, 0, 0, 2, 1, 2, 0)
    assert cfg.post_from_index(cfg.post_index(post)) == post


def test_lattice_cardinalities():
    space = StateSpace(73, 1, 15, post=True)
    assert space.size == 73 * 15 ** 4 == 3_695_625
    assert space.feasible_size == 73 * 120 ** 2
    assert int(space.valid_mask().sum()) == space.feasible_size


def test_lattice_order():
    space = StateSpace(3, 2, 3, n_price_states=2)
    assert space.leq((0, 0, 0, 1, 1), (1, 0, 1, 2, 1))
    assert not space.leq((0, 0, 0, 1, 0), (1, 0, 1, 2, 1))
    v = np.zeros(space.shape)
    v[1, 0, 0, 0, 0] = 1.0
    assert not space.is_monotone(v)
    v = np.broadcast_to(np.arange(3.0)[:, None, None, None, None], space.shape).copy()
    assert space.is_monotone(v)


def test_terminal_values():
    space = StateSpace(3, 1, 2)
    values = linear_terminal(5.0).values(space)
    assert values[2, 0, 0, 1, 0] == 10.0
    assert linear_terminal(5.0).value_at((2, 0, 0, 1, 0)) == 10.0
    assert TerminalContribution().is_zero
    with pytest.raises(ConfigurationError):
        TerminalContribution("linear", value_per_unit=-1.0)


@pytest.mark.slow
def test_scalar_mechanics_match_reference_at_scale():
    rng = np.random.default_rng(2024)
    cfg = MarketConfig(M=3, T=2, R_max=5, L_max=4, K=2.0, bid_grid=tuple(float(x) for x in range(0, 100, 10)),
                       beta=beta_power(4, 6.0))
    g = cfg.n_bids
    for _ in range(100_000):
        prices = rng.uniform(0.0, 100.0, size=cfg.M)
        r = int(rng.integers(0, cfg.R_max + 1))
        l = int(rng.integers(0, cfg.L_max + 1))
        lo = int(rng.integers(0, g))
        hi = int(rng.integers(lo, g))
        b = BidPair(cfg.bid_grid[lo], cfg.bid_grid[hi])
        r_ref, l_ref, rev_ref = _reference_hour(r, l, prices, b.low, b.high, cfg)
        nxt = state_transition(State(r, l, b), cfg.idle_bid, prices, 0, cfg)
        assert (nxt.R, nxt.L) == (r_ref, l_ref)
        assert hourly_revenue(r, l, prices, b, cfg) == pytest.approx(rev_ref, rel=1e-9, abs=1e-12)
