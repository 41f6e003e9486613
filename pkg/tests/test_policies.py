from __future__ import annotations
from datetime import date, timedelta

import numpy as np
import pandas as pd
import pytest

from storagebid.common.errors import ConfigurationError, DataError
from storagebid.common.state import BidPair
from storagebid.common.table import ValueTable
from storagebid.data.ingest import DayPath
from storagebid.exact.expectation import ExpectationEngine, bid_mask
from storagebid.exact.solver import backward_dp, post_values
from storagebid.market.config import MarketConfig, linear_grid
from storagebid.market.contribution import ExactContribution
from storagebid.policies.base import (
    FixedBidPolicy,
    GreedyPostPolicy,
    GreedyPrePolicy,
    IdlePolicy,
    greedy_from_post,
)
from storagebid.policies.evaluate import evaluate, simulate_path, write_report
from storagebid.policies.rules import (
    HourlyPriceStats,
    RulePolicyA,
    RulePolicyB,
    RulePolicyC,
    rule_policy_A,
    rule_policy_B,
    rule_policy_C,
)
from storagebid.prices.synthetic import DeterministicModel


@pytest.fixture
def day_cfg() -> MarketConfig:
    return MarketConfig(M=12, T=23, R_max=24, L_max=0, K=1.0, bid_grid=linear_grid(0, 150, 15), beta=(1.0,))


@pytest.fixture
def day_stats(day_cfg, make_days) -> HourlyPriceStats:
    return HourlyPriceStats(day_cfg, make_days(20))


def _flat(days: np.ndarray):
    return [d.reshape(-1) for d in days]


# ---------------------------
# simple and greedy policies
# ---------------------------

def test_idle_policy_never_trades(desk):
    rep = evaluate(IdlePolicy(desk.market), desk.model, n_paths=200, seed=1)
    assert rep.mean == 0.0
    assert np.all(rep.final_storage == desk.market.initial_resource)
    assert rep.storage_histogram[0] == pytest.approx(1.0)


def test_fixed_bid_policy(desk):
    cfg = desk.market
    pol = FixedBidPolicy(cfg, cfg.bid(2, 3))
    assert pol.bid(0, cfg.initial_state()) == cfg.bid(2, 3)
    assert pol.describe()["bid"] == [cfg.bid_grid[2], cfg.bid_grid[3]]
    with pytest.raises(ConfigurationError):
        FixedBidPolicy(cfg, BidPair(16.0, 20.0))


def test_greedy_policy_earns_the_deterministic_optimum(two_hour_cfg, buy_low_sell_high):
    table = backward_dp(two_hour_cfg, buy_low_sell_high)
    pol = GreedyPrePolicy(table, ExpectationEngine(two_hour_cfg, buy_low_sell_high))
    rep = evaluate(pol, buy_low_sell_high, n_paths=3, seed=0)
    assert np.allclose(rep.revenues, 35.0)
    revenue, levels = simulate_path(pol, two_hour_cfg, buy_low_sell_high.start_episode(np.random.default_rng(0)))
    assert revenue == pytest.approx(35.0)
    assert levels == [0, 1, 0]


def test_greedy_value_matches_optimal_value(desk, desk_engine, desk_bdp):
    cfg = desk.market
    rep = evaluate(GreedyPrePolicy(desk_bdp, desk_engine), desk.model, n_paths=2000, seed=3)
    v0 = desk_bdp.value(0, cfg.state_index(cfg.initial_state()))
    assert abs(rep.mean - v0) <= 4 * rep.stderr + 1e-9


def test_post_greedy_attains_the_optimal_q(desk, desk_engine, desk_bdp):
    cfg = desk.market
    vb = post_values(desk_bdp, desk_engine)
    contribution = ExactContribution(desk_engine)
    pol = GreedyPostPolicy(vb, contribution)
    rng = np.random.default_rng(8)
    space = cfg.space(1)
    for _ in range(25):
        idx = space.random_state(rng)
        t = int(rng.integers(0, cfg.T))
        lo, hi = pol.decide(t, idx)
        assert lo <= hi
        r, l, a_lo, a_hi, ps = idx
        q = contribution.state(t, idx)[lo, hi] + vb.values[t][r, l, a_lo, a_hi, lo, hi, ps]
        assert q == pytest.approx(desk_bdp.value(t, idx), abs=1e-9)


def test_greedy_from_zero_table_maximizes_contribution(desk, desk_engine):
    cfg = desk.market
    vb = ValueTable.zeros(cfg, 1, "post")
    contribution = ExactContribution(desk_engine)
    s = cfg.initial_state()
    b = greedy_from_post(vb, s, 1, contribution)
    c = np.where(bid_mask(cfg.n_bids), contribution.state(1, cfg.state_index(s)), -np.inf)
    lo, hi = cfg.bid_index(b)
    assert c[lo, hi] == c.max()


def test_greedy_policies_check_layout(desk, desk_engine, desk_bdp):
    with pytest.raises(ConfigurationError):
        GreedyPostPolicy(desk_bdp, ExactContribution(desk_engine))
    with pytest.raises(ConfigurationError):
        GreedyPrePolicy(ValueTable.zeros(desk.market, 1, "post"), desk_engine)


# ---------------------------
# evaluation
# ---------------------------

def test_evaluation_is_reproducible_across_threads(desk, desk_engine, desk_bdp):
    pol = GreedyPrePolicy(desk_bdp, desk_engine)
    a = evaluate(pol, desk.model, n_paths=300, seed=5, threads=1)
    b = evaluate(pol, desk.model, n_paths=300, seed=5, threads=3)
    assert np.array_equal(a.revenues, b.revenues)
    assert np.array_equal(a.storage_histogram, b.storage_histogram)
    assert a.storage_histogram.sum() == pytest.approx(1.0)


def test_short_paths_raise_data_error(tiny_cfg, day_cfg, make_days):
    short = DeterministicModel([[40.0], [40.0], [40.0]])
    with pytest.raises(DataError):
        evaluate(IdlePolicy(tiny_cfg), short, n_paths=1)
    long_cfg = MarketConfig(M=12, T=24, R_max=4, L_max=0, K=1.0, bid_grid=(0.0, 150.0), beta=(1.0,))
    with pytest.raises(DataError):
        evaluate(IdlePolicy(long_cfg), _flat(make_days(2)))


def test_day_paths_are_replayed_once_each(day_cfg, make_days, tmp_path):
    start = date(2012, 2, 1)
    days = [DayPath(start + timedelta(days=i), d.reshape(-1)) for i, d in enumerate(make_days(4, seed=1))]
    days.append(DayPath(date(2012, 3, 1), make_days(1, seed=2)[0].reshape(-1)))
    pol = FixedBidPolicy(day_cfg, day_cfg.bid(4, 6))
    rep = evaluate(pol, days)
    assert rep.n_paths == 5
    assert rep.labels[0] == "2012-02-01"
    monthly = rep.monthly()
    assert list(monthly["month"]) == ["2012-02", "2012-03"]
    assert list(monthly["days"]) == [4, 1]
    assert monthly["total"].sum() == pytest.approx(rep.revenues.sum())

    written = write_report(rep, tmp_path / "eval")
    names = sorted(p.name for p in written)
    assert names == ["monthly_revenues.csv", "quantiles.csv", "report.json", "revenues.csv",
                     "storage_histogram.csv"]
    revenues = pd.read_csv(tmp_path / "eval" / "revenues.csv")
    assert list(revenues.columns) == ["path", "label", "revenue"]
    assert len(revenues) == 5
    quantiles = pd.read_csv(tmp_path / "eval" / "quantiles.csv")
    assert set(quantiles["statistic"]) == {"revenue", "storage"}


def test_report_quantiles(desk):
    rep = evaluate(IdlePolicy(desk.market), desk.model, n_paths=10, seed=0)
    assert set(rep.quantiles()) == {"0.05", "0.5", "0.95"}
    assert rep.monthly().empty
    assert rep.to_dict()["n_paths"] == 10


# ---------------------------
# rule-based policies
# ---------------------------

def test_hourly_stats(day_cfg, day_stats, make_days):
    assert day_stats.n_days == 20 and day_stats.n_hours == 24
    assert int(np.argmin(day_stats.mean)) == 0
    assert int(np.argmax(day_stats.mean)) == 12
    lo, hi = day_stats.quantiles(0.1)
    assert np.all(lo <= hi)
    assert set(lo).issubset(set(day_cfg.bid_grid))
    idx = (5, 0, 0, day_cfg.n_bids - 1, 0)
    assert day_stats.forecast(0, idx) == 5.0
    # the idle bid never clears on these prices
    assert day_stats.forecast(7, idx) == pytest.approx(5.0)
    # a bid of (150, 150) buys in every settlement
    assert day_stats.forecast(7, (5, 0, 14, 14, 0)) == pytest.approx(17.0)
    with pytest.raises(ConfigurationError):
        HourlyPriceStats(day_cfg, make_days(3)[..., :6])


def test_rule_a_buys_early_and_sells_late(day_cfg, day_stats):
    pol = rule_policy_A(day_stats, h_star=12)
    assert pol.buy_hours == frozenset(range(0, 6))
    assert pol.sell_hours == frozenset(range(12, 18))
    g = day_cfg.n_bids
    idx = (0, 0, 0, g - 1, 0)
    assert pol.decide(0, idx) == (g - 1, g - 1)       # hour 1
    assert pol.decide(11, idx) == (0, 0)              # hour 12
    assert pol.decide(6, idx) == (0, g - 1)           # hour 7
    with pytest.raises(ConfigurationError):
        RulePolicyA(day_stats, h_star=6)


def test_rule_b_thresholds_and_sell_off(day_cfg, day_stats):
    pol = rule_policy_B(day_stats, k_star=10)
    assert pol.full == pytest.approx(20.0) and pol.empty == pytest.approx(4.0)
    assert pol.buy_hours == frozenset({0, 1, 2, 3, 4, 19, 20, 21, 22, 23})
    assert pol.sell_hours == frozenset({7, 8, 9, 10, 11, 12, 13, 14, 15, 16})
    g = day_cfg.n_bids
    idle = (0, g - 1)
    assert pol.decide(0, (0, 0, 0, g - 1, 0)) == (g - 1, g - 1)
    assert pol.decide(0, (22, 0, 0, g - 1, 0)) == idle        # too full to buy
    assert pol.decide(11, (2, 0, 0, g - 1, 0)) == idle        # too empty to sell
    assert pol.decide(11, (10, 0, 0, g - 1, 0)) == (0, 0)
    # one hour left and 15 units stored: sell whatever the hour
    assert pol.decide(22, (15, 0, 0, g - 1, 0)) == (0, 0)
    assert pol.decide(23, (15, 0, 0, g - 1, 0)) == idle
    with pytest.raises(ConfigurationError):
        RulePolicyB(day_stats, k_star=13)


def test_rule_c_bids_quantiles(day_cfg, day_stats):
    pol = rule_policy_C(day_stats, alpha=0.1)
    g = day_cfg.n_bids
    h = 8
    lo, hi = int(pol.q_lo[h]), int(pol.q_hi[h])
    assert lo <= hi
    assert pol.decide(h - 1, (10, 0, 0, g - 1, 0)) == (lo, hi)
    assert pol.decide(h - 1, (23, 0, 0, g - 1, 0)) == (0, hi)
    assert pol.decide(h - 1, (1, 0, 0, g - 1, 0)) == (lo, g - 1)
    with pytest.raises(ConfigurationError):
        RulePolicyC(day_stats, alpha=0.5)


@pytest.mark.parametrize("factory", [rule_policy_A, rule_policy_B, rule_policy_C])
def test_rule_policies_run_on_day_paths(day_cfg, day_stats, make_days, factory):
    pol = factory(day_stats)
    rep = evaluate(pol, _flat(make_days(5, seed=9)))
    assert rep.n_paths == 5
    assert np.all(np.isfinite(rep.revenues))
    assert rep.storage_histogram.size == day_cfg.R_max + 1


def test_stats_from_a_model(desk):
    stats = HourlyPriceStats.from_model(desk.market, desk.model, 50, np.random.default_rng(0))
    assert stats.n_hours == desk.market.T + 1
    pol = RulePolicyB(stats, k_star=2)
    rep = evaluate(pol, desk.model, n_paths=20, seed=0)
    assert rep.n_paths == 20
