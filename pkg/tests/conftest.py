from __future__ import annotations
from pathlib import Path

import numpy as np
import pytest

from storagebid.exact.expectation import ExpectationEngine
from storagebid.exact.solver import backward_dp
from storagebid.market.config import MarketConfig
from storagebid.prices.distributions import uniform
from storagebid.prices.instances import preset
from storagebid.prices.synthetic import DeterministicModel, SeasonalNoiseModel

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def root() -> Path:
    return ROOT


@pytest.fixture(scope="session")
def desk():
    """T=6, M=1, R_max=4, L_max=3, 6 bid levels, 5-point noise."""
    return preset("desk")


@pytest.fixture(scope="session")
def desk_engine(desk):
    return ExpectationEngine(desk.market, desk.model)


@pytest.fixture(scope="session")
def desk_bdp(desk, desk_engine):
    return backward_dp(desk.market, desk.model, engine=desk_engine)


@pytest.fixture
def tiny_cfg() -> MarketConfig:
    return MarketConfig(M=1, T=3, R_max=2, L_max=1, K=1.0, bid_grid=(30.0, 50.0, 70.0), beta=(0.5, 1.0))


@pytest.fixture
def tiny_model() -> SeasonalNoiseModel:
    return SeasonalNoiseModel(1, uniform((-10.0, 0.0, 10.0)))


@pytest.fixture
def two_hour_cfg() -> MarketConfig:
    """Bids at t = 0, 1 settle hours 1 and 2; three price levels."""
    return MarketConfig(M=1, T=2, R_max=2, L_max=0, K=1.0, bid_grid=(10.0, 20.0, 30.0), beta=(1.0,))


@pytest.fixture
def buy_low_sell_high() -> DeterministicModel:
    # hour 0 sits inside the grid range, so the initial idle bid never clears
    return DeterministicModel([[20.0], [5.0], [40.0]])


def _day_hours(n_days: int, M: int = 12, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    profile = np.linspace(20.0, 80.0, 24)
    profile = np.concatenate([profile[::2], profile[::-2]])   # low .. high .. low
    noise = rng.normal(0.0, 3.0, size=(n_days, 24, M))
    return np.clip(profile[None, :, None] + noise, 0.0, None)


@pytest.fixture
def make_days():
    """Builder of synthetic training days, shape (n_days, 24, M): cheap mornings, dear evenings."""
    return _day_hours
