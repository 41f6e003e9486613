from __future__ import annotations

import numpy as np
import pytest

from storagebid.adp.observation import (
    masked_max,
    post_bellman,
    sample_observation_post,
    sample_observation_pre,
    smooth,
)
from storagebid.adp.projection import monotone_project, monotone_project_post
from storagebid.adp.solver import TrainerConfig, parse_exploration, train_post, train_pre
from storagebid.adp.stepsize import (
    BAKFStepsize,
    ConstantStepsize,
    HarmonicStepsize,
    make_stepsize,
    next_stepsize,
)
from storagebid.common.errors import CapabilityError, ConfigurationError, DomainError
from storagebid.common.table import ValueTable
from storagebid.exact.expectation import ExpectationEngine
from storagebid.exact.solver import backward_dp, post_values
from storagebid.market.contribution import EpisodeContribution, ExactContribution
from storagebid.policies.base import GreedyPrePolicy
from storagebid.policies.evaluate import evaluate
from storagebid.prices.historical import HistoricalReplayModel
from storagebid.prices.instances import preset


def _random_monotone(space, rng) -> np.ndarray:
    """Sum of nondecreasing functions of each ordered axis, independent per price state."""
    shape = space.shape
    v = np.zeros(shape)
    for axis, n in enumerate(shape[:-1]):
        steps = np.cumsum(rng.random((n, shape[-1])), axis=0)
        view = [1] * len(shape)
        view[axis] = n
        view[-1] = shape[-1]
        v = v + steps.reshape(view)
    return v


# ---------------------------
# stepsizes
# ---------------------------

def test_harmonic_counts_per_state():
    rule = HarmonicStepsize()
    assert [rule.next("a", 0.0, 0.0) for _ in range(3)] == [1.0, 0.5, pytest.approx(1 / 3)]
    assert rule.next("b", 0.0, 0.0) == 1.0
    rule.reset()
    assert rule.next("a", 0.0, 0.0) == 1.0


def test_constant_stepsize():
    rule = make_stepsize("constant:0.2")
    assert isinstance(rule, ConstantStepsize)
    assert [rule.next(0, 1.0, 0.0) for _ in range(3)] == [1.0, 0.2, 0.2]
    with pytest.raises(DomainError):
        ConstantStepsize(c=0.0)
    with pytest.raises(DomainError):
        make_stepsize("constant:abc")
    with pytest.raises(DomainError):
        make_stepsize("search-then-converge")


def test_bakf_stays_in_range_and_settles_on_noise():
    rule = make_stepsize("bakf")
    assert isinstance(rule, BAKFStepsize)
    rng = np.random.default_rng(4)
    est = 0.0
    for n in range(1, 501):
        obs = float(rng.normal(10.0, 1.0))
        alpha = next_stepsize(rule, "s", obs, est)
        assert 1.0 / n - 1e-12 <= alpha <= 1.0
        est = smooth(est, obs, alpha)
    assert alpha < 0.5
    assert est == pytest.approx(10.0, abs=0.5)
    with pytest.raises(DomainError):
        BAKFStepsize(eta_bar=1.5)


def test_smooth_rejects_bad_alpha():
    assert smooth(2.0, 4.0, 0.25) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        smooth(0.0, 1.0, 1.5)


def test_masked_max_ignores_infeasible_bids():
    q = np.array([[1.0, 2.0], [9.0, 2.0]])
    # q[1, 0] has lo > hi
    assert masked_max(q) == (2.0, 0, 1)


# ---------------------------
# projection
# ---------------------------

def test_projection_keeps_slices_monotone(desk):
    rng = np.random.default_rng(0)
    space = desk.market.space(1)
    values = np.zeros(space.shape)
    for _ in range(300):
        idx = space.random_state(rng)
        z = float(rng.normal(0.0, 50.0))
        monotone_project(values, idx, z, space)
        assert values[idx] == z
        assert space.is_monotone(values)


def test_projection_is_idempotent(desk):
    rng = np.random.default_rng(1)
    space = desk.market.space(1, post=True)
    base = _random_monotone(space, rng)
    idx = space.random_state(rng)
    once = monotone_project_post(base.copy(), idx, 3.0, space)
    twice = monotone_project_post(once.copy(), idx, 3.0, space)
    assert np.array_equal(once, twice)
    assert space.is_monotone(once)
    with pytest.raises(ValueError):
        monotone_project_post(np.zeros(desk.market.space(1).shape), (0, 0, 0, 0, 0), 1.0,
                              desk.market.space(1))


# ---------------------------
# observations and the post-decision operator
# ---------------------------

def test_post_observation_is_unbiased(desk, desk_engine, desk_bdp):
    cfg, model = desk.market, desk.model
    vb = post_values(desk_bdp, desk_engine)
    H = post_bellman(vb, cfg, model, desk_engine)
    contribution = ExactContribution(desk_engine)
    space = cfg.space(1, post=True)
    rng = np.random.default_rng(11)
    n = 4000
    for _ in range(6):
        idx = space.random_state(rng)
        t = int(rng.integers(0, cfg.T - 1))
        obs = np.array([
            sample_observation_post(idx, t, vb, contribution, model.start_episode(rng)).value
            for _ in range(n)
        ])
        se = obs.std(ddof=1) / np.sqrt(n)
        assert abs(obs.mean() - H.value(t, idx)) <= 4 * se + 1e-9


def test_post_values_are_a_fixed_point(desk, desk_engine, desk_bdp):
    vb = post_values(desk_bdp, desk_engine)
    H = post_bellman(vb, desk.market, desk.model, desk_engine)
    valid = vb.space.valid_mask()
    for t in range(desk.market.T):
        assert np.allclose(H.values[t][valid], vb.values[t][valid], atol=1e-9)


def test_post_bellman_preserves_monotonicity(desk, desk_engine):
    rng = np.random.default_rng(5)
    cfg = desk.market
    for _ in range(20):
        vb = ValueTable.zeros(cfg, 1, "post")
        for t in range(cfg.T):
            vb.values[t] = _random_monotone(vb.space, rng)
        out = post_bellman(vb, cfg, desk.model, desk_engine)
        assert out.is_monotone(tol=1e-9)


def test_saa_observation_is_not_below_exact(desk, desk_engine, desk_bdp):
    cfg, model = desk.market, desk.model
    rng = np.random.default_rng(2)
    idx = (2, 2, 1, 4, 0)
    t = 2
    exact = sample_observation_pre(idx, t, desk_bdp, "exact", model, rng, desk_engine).value
    draws = np.array([
        sample_observation_pre(idx, t, desk_bdp, "saa", model, rng, desk_engine, J=10).value
        for _ in range(300)
    ])
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert draws.mean() >= exact - 3 * se - 1e-9


def test_exact_pre_observation_reproduces_bdp(desk, desk_engine, desk_bdp):
    rng = np.random.default_rng(0)
    space = desk.market.space(1)
    for _ in range(20):
        idx = space.random_state(rng)
        t = int(rng.integers(0, desk.market.T))
        obs = sample_observation_pre(idx, t, desk_bdp, "exact", desk.model, rng, desk_engine)
        assert obs.value == pytest.approx(desk_bdp.value(t, idx), abs=1e-9)


# ---------------------------
# trainers
# ---------------------------

def test_train_pre_is_monotone_and_reproducible(desk, desk_engine):
    trainer = TrainerConfig(iterations=200, seed=3, log_every=0)
    a = train_pre(desk.market, desk.model, trainer, desk_engine)
    b = train_pre(desk.market, desk.model, trainer, desk_engine)
    assert np.array_equal(a.values, b.values)
    assert a.is_monotone()
    assert int(a.counts.sum()) == 200 * desk.market.T
    assert a.metadata["algorithm"] == "M-ADP"
    assert np.all(a.values[-1] == 0.0)


def test_train_pre_variants(desk, desk_engine):
    avi = train_pre(desk.market, desk.model,
                    TrainerConfig(iterations=50, projection=False, log_every=0), desk_engine)
    assert avi.metadata["algorithm"] == "AVI"
    saa = train_pre(desk.market, desk.model,
                    TrainerConfig(iterations=30, mode="saa", J=5, explore="egreedy:0.5",
                                  stepsize="bakf", log_every=0), desk_engine)
    assert saa.is_monotone()
    assert saa.metadata["stepsize"]["kind"] == "bakf"


def test_train_pre_needs_enumeration_for_exact(desk):
    replay = HistoricalReplayModel([np.full(24, 30.0)], M=1)
    with pytest.raises(CapabilityError):
        train_pre(desk.market, replay, TrainerConfig(iterations=1))


def test_train_post(desk, desk_engine):
    cfg = desk.market
    trainer = TrainerConfig(iterations=150, seed=9, log_every=0)
    a = train_post(cfg, desk.model, trainer, engine=desk_engine)
    b = train_post(cfg, desk.model, trainer, engine=desk_engine)
    assert a.post and np.array_equal(a.values, b.values)
    assert a.is_monotone()
    # zero terminal: the last row is never trained
    assert np.all(a.values[cfg.T - 1] == 0.0)
    assert int(a.counts.sum()) == 150 * (cfg.T - 1)
    ep = train_post(cfg, desk.model, TrainerConfig(iterations=20, contribution="episode", log_every=0))
    assert ep.is_monotone()


def test_train_post_on_replayed_days(tiny_cfg):
    days = [np.full(24, p) for p in (30.0, 45.0, 60.0)]
    replay = HistoricalReplayModel(days, M=1)
    table = train_post(tiny_cfg, replay, TrainerConfig(iterations=40, log_every=0))
    assert table.is_monotone()
    with pytest.raises(CapabilityError):
        train_post(tiny_cfg, replay, TrainerConfig(iterations=1, contribution="exact"))


def test_episode_contribution_is_zero_past_the_horizon(two_hour_cfg, buy_low_sell_high):
    ep = buy_low_sell_high.start_episode(np.random.default_rng(0))
    contrib = EpisodeContribution(two_hour_cfg, ep)
    idx = two_hour_cfg.state_index(two_hour_cfg.initial_state())
    assert np.all(contrib.state(2, idx) == 0.0)
    # b0 buys at 5 whatever its level
    assert contrib.state(0, idx)[0, 0] == pytest.approx(-5.0)


def test_trainer_config_validation():
    assert parse_exploration("uniform") == 1.0
    assert parse_exploration("egreedy") == 0.25
    assert parse_exploration("egreedy:0.1") == 0.1
    with pytest.raises(ConfigurationError):
        parse_exploration("egreedy:2")
    with pytest.raises(ConfigurationError):
        parse_exploration("boltzmann")
    with pytest.raises(ConfigurationError):
        TrainerConfig(iterations=-1)
    with pytest.raises(ConfigurationError):
        TrainerConfig(mode="mc")
    with pytest.raises(ConfigurationError):
        TrainerConfig(contribution="oracle")
    with pytest.raises(DomainError):
        TrainerConfig(stepsize="nope")


@pytest.mark.slow
def test_monotone_adp_approaches_the_optimal_policy(desk, desk_engine, desk_bdp):
    table = train_pre(desk.market, desk.model, TrainerConfig(iterations=50_000, seed=0, log_every=0),
                      desk_engine)
    optimal = evaluate(GreedyPrePolicy(desk_bdp, desk_engine), desk.model, 2000, seed=7).mean
    learned = evaluate(GreedyPrePolicy(table, desk_engine), desk.model, 2000, seed=7).mean
    assert learned >= 0.97 * optimal


@pytest.mark.slow
@pytest.mark.parametrize("name", ["V1-small", "V2-small"])
def test_projection_beats_plain_value_iteration(name):
    inst = preset(name)
    cfg, model = inst.market, inst.model
    engine = ExpectationEngine(cfg, model)
    bdp = backward_dp(cfg, model, engine=engine)
    optimal = evaluate(GreedyPrePolicy(bdp, engine), model, 1000, seed=0).mean
    assert optimal > 0
    for n in (500, 2000):
        median = {}
        for projection in (True, False):
            values = []
            for seed in range(5):
                trainer = TrainerConfig(iterations=n, seed=seed, projection=projection, log_every=0)
                table = train_pre(cfg, model, trainer, engine)
                values.append(evaluate(GreedyPrePolicy(table, engine), model, 1000, seed=0).mean)
            median[projection] = float(np.median(values)) / optimal
        assert median[True] > median[False], (n, median)
