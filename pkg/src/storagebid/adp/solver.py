# src/storagebid/adp/solver.py
from __future__ import annotations
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Optional
import logging

import numpy as np

from storagebid.adp.observation import (
    EXACT,
    SAA,
    Observation,
    sample_observation_post,
    sample_observation_pre,
    settle_state,
    smooth,
)
from storagebid.adp.projection import monotone_project, monotone_project_post
from storagebid.adp.stepsize import make_stepsize, next_stepsize
from storagebid.common.errors import CapabilityError, ConfigurationError
from storagebid.common.state import Index, StateSpace
from storagebid.common.table import ValueTable
from storagebid.exact.expectation import ExpectationEngine
from storagebid.market.config import MarketConfig
from storagebid.market.contribution import (
    ContributionEstimator,
    EpisodeContribution,
    ExactContribution,
)
from storagebid.prices.base import PriceModel

logger = logging.getLogger(__name__)

__all__ = ["TrainerConfig", "parse_exploration", "train_pre", "train_post"]

# number of sanity-bound warnings logged before going quiet
_MAX_BOUND_WARNINGS = 5


@dataclass(frozen=True)
class TrainerConfig:
    """
    Knobs of one Monotone-ADP run.

    iterations : N, number of sample paths (0 leaves the initial table)
    mode       : "exact" or "saa" observations for pre-decision training
    J          : samples per SAA observation
    stepsize   : "harmonic", "constant:<c>" or "bakf"
    explore    : "uniform" or "egreedy[:eps]"
    projection : False turns the algorithm into plain approximate value iteration
    contribution: "auto", "exact" or "episode" estimator of C inside post-decision observations
    """
    iterations: int = 1000
    mode: str = EXACT
    J: int = 100
    stepsize: str = "harmonic"
    explore: str = "uniform"
    projection: bool = True
    seed: Optional[int] = 0
    sanity_bound: float = 1e6
    log_every: int = 1000
    contribution: str = "auto"

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if self.mode not in (EXACT, SAA):
            raise ConfigurationError(f"mode must be 'exact' or 'saa', got {self.mode!r}")
        if self.mode == SAA and self.J < 1:
            raise ConfigurationError("SAA needs J >= 1")
        if self.contribution not in ("auto", "exact", "episode"):
            raise ConfigurationError(f"Unknown contribution estimator {self.contribution!r}")
        parse_exploration(self.explore)
        make_stepsize(self.stepsize)

    @property
    def algorithm(self) -> str:
        return "M-ADP" if self.projection else "AVI"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def parse_exploration(spec: str) -> float:
    """Probability of a uniform jump: 1 for "uniform", eps for "egreedy[:eps]" (default 0.25)."""
    kind, _, arg = spec.strip().lower().partition(":")
    if kind == "uniform":
        return 1.0
    if kind == "egreedy":
        try:
            eps = float(arg) if arg else 0.25
        except ValueError:
            raise ConfigurationError(f"Bad exploration spec {spec!r}") from None
        if not 0.0 <= eps <= 1.0:
            raise ConfigurationError(f"epsilon must be in [0, 1], got {eps}")
        return eps
    raise ConfigurationError(f"Unknown exploration scheme {spec!r}")


class _Updater:
    """Stepsize, smoothing, projection and bookkeeping shared by both trainers."""

    def __init__(self, table: ValueTable, space: StateSpace, trainer: TrainerConfig,
                 project: Callable[[np.ndarray, Index, float, StateSpace], np.ndarray]) -> None:
        self.table = table
        self.space = space
        self.trainer = trainer
        self.project = project
        self.rule = make_stepsize(trainer.stepsize)
        self.bound_violations = 0

    def apply(self, obs: Observation) -> float:
        t, idx = obs.t, obs.state
        if not np.isfinite(obs.value) or abs(obs.value) > self.trainer.sanity_bound:
            self.bound_violations += 1
            if self.bound_violations <= _MAX_BOUND_WARNINGS:
                logger.warning("Observation %.6g at t=%d %s exceeds the sanity bound %.3g",
                               obs.value, t, idx, self.trainer.sanity_bound)
        key = (t,) + tuple(idx)
        old = float(self.table.values[key])
        alpha = next_stepsize(self.rule, key, obs.value, old)
        z = smooth(old, obs.value, alpha)
        assert self.table.counts is not None
        self.table.counts[key] += 1
        if self.trainer.projection:
            self.project(self.table.values[t], idx, z, self.space)
        else:
            self.table.values[key] = z
        return z

    def metadata(self, layout: str, model: PriceModel) -> Dict[str, Any]:
        return {
            "algorithm": self.trainer.algorithm,
            "layout": layout,
            "trainer": self.trainer.to_dict(),
            "stepsize": self.rule.describe(),
            "bound_violations": self.bound_violations,
            "model": model.describe(),
        }


def train_pre(cfg: MarketConfig, model: PriceModel, trainer: TrainerConfig,
              engine: Optional[ExpectationEngine] = None) -> ValueTable:
    """
    Pre-decision Monotone-ADP.

    Each iteration starts from a uniformly drawn state and, for t = 0..T-1,
    observes v-hat, smooths it into the visited state with the stepsize rule,
    projects the period's slice back onto monotone functions and moves on
    (uniform jump, or the greedy sampled transition under e-greedy).
    """
    if trainer.mode == EXACT and not model.can_enumerate:
        raise CapabilityError("exact observations need an enumerable price model; use mode='saa'")
    rng = np.random.default_rng(trainer.seed)
    P = model.n_price_states
    space = cfg.space(P)
    table = ValueTable.zeros(cfg, P, "pre", with_counts=True)
    table.values[cfg.T] = cfg.terminal.values(space)
    eng = engine
    if eng is None and model.can_enumerate:
        eng = ExpectationEngine(cfg, model)
    jump = parse_exploration(trainer.explore)
    upd = _Updater(table, space, trainer, monotone_project)

    for n in range(1, trainer.iterations + 1):
        idx = space.random_state(rng)
        for t in range(cfg.T):
            obs = sample_observation_pre(idx, t, table, trainer.mode, model, rng, eng, trainer.J)
            upd.apply(obs)
            if t + 1 < cfg.T:
                idx = _next_pre(cfg, space, model, rng, idx, t, obs, jump)
        if trainer.log_every and n % trainer.log_every == 0:
            logger.info("%s pre-decision: iteration %d/%d", trainer.algorithm, n, trainer.iterations)

    table.metadata = upd.metadata("pre", model)
    return table


def _next_pre(cfg: MarketConfig, space: StateSpace, model: PriceModel, rng: np.random.Generator,
              idx: Index, t: int, obs: Observation, jump: float) -> Index:
    if jump >= 1.0 or obs.bid is None or rng.random() < jump:
        return space.random_state(rng)
    r, l, a_lo, a_hi, ps = idx
    hour = model.sample_hour(t, ps, rng)
    rn, ln = settle_state(cfg, r, l, a_lo, a_hi, hour.prices)
    return (rn, ln, obs.bid[0], obs.bid[1], int(hour.next_state))


def _shared_contribution(trainer: TrainerConfig, engine: Optional[ExpectationEngine],
                         fixed: Optional[ContributionEstimator]) -> Optional[ContributionEstimator]:
    """Estimator used for every episode, or None when each episode brings its own."""
    if fixed is not None:
        return fixed
    use_exact = trainer.contribution == "exact" or (trainer.contribution == "auto" and engine is not None)
    if use_exact:
        if engine is None:
            raise CapabilityError("exact contributions need an enumerable price model")
        return ExactContribution(engine)
    return None


def train_post(cfg: MarketConfig, model: PriceModel, trainer: TrainerConfig,
               contribution: Optional[ContributionEstimator] = None,
               engine: Optional[ExpectationEngine] = None) -> ValueTable:
    """
    Post-decision (distribution-free) Monotone-ADP.

    Only sampling is required: each iteration draws one episode and one
    post-decision state, then for t = 0..T-2 takes a single-sample observation,
    smooths and projects. The t = T-1 row is trained as well when the terminal
    contribution is nonzero; with a zero terminal it is exactly 0.
    """
    if not model.can_sample:
        raise CapabilityError(f"{type(model).__name__} cannot sample")
    rng = np.random.default_rng(trainer.seed)
    P = model.n_price_states
    space = cfg.space(P, post=True)
    table = ValueTable.zeros(cfg, P, "post", with_counts=True)
    eng = engine
    if eng is None and model.can_enumerate and trainer.contribution != "episode":
        eng = ExpectationEngine(cfg, model)
    jump = parse_exploration(trainer.explore)
    upd = _Updater(table, space, trainer, monotone_project_post)
    last = cfg.T - 1 if not cfg.terminal.is_zero else cfg.T - 2
    shared = _shared_contribution(trainer, eng, contribution)

    for n in range(1, trainer.iterations + 1):
        episode = model.start_episode(rng)
        contrib = shared if shared is not None else EpisodeContribution(cfg, episode)
        idx = space.random_state(rng)
        for t in range(last + 1):
            obs = sample_observation_post(idx, t, table, contrib, episode)
            upd.apply(obs)
            if t < last:
                idx = _next_post(space, rng, obs, jump)
        if trainer.log_every and n % trainer.log_every == 0:
            logger.info("%s post-decision: iteration %d/%d", trainer.algorithm, n, trainer.iterations)

    table.metadata = upd.metadata("post", model)
    return table


def _next_post(space: StateSpace, rng: np.random.Generator, obs: Observation, jump: float) -> Index:
    if jump >= 1.0 or obs.bid is None or obs.next_state is None or rng.random() < jump:
        return space.random_state(rng)
    r, l, lo, hi, ps = obs.next_state
    return (r, l, lo, hi, obs.bid[0], obs.bid[1], ps)
