# src/storagebid/data/synthetic.py
"""Synthetic "historical" 5-minute price files for tests and the bundled demo data."""
from __future__ import annotations
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from storagebid.common.io import PathLike, ensure_dir
from storagebid.data.convert import TIMESTAMP_FORMAT

__all__ = ["daily_profile", "synthetic_history", "write_synthetic_history"]


def daily_profile(M: int = 12) -> np.ndarray:
    """Mean price per settlement of a day: cheap nights, a morning ramp and an evening peak."""
    h = np.arange(24 * M) / M
    return 30.0 + 12.0 * np.sin(2 * np.pi * (h - 9.0) / 24.0) + 10.0 * np.exp(-0.5 * ((h - 18.0) / 2.0) ** 2)


def synthetic_history(start: str = "2012-01-16", days: int = 30, M: int = 12, seed: Optional[int] = 0,
                      sigma: float = 6.0, spike_prob: float = 0.01, spike_scale: float = 60.0) -> pd.DataFrame:
    """
    `days` consecutive days of prices: the daily profile plus Gaussian noise
    and rare exponential spikes, clipped to be nonnegative.
    """
    rng = np.random.default_rng(seed)
    n = 24 * M
    base = daily_profile(M)
    stamps = pd.date_range(start=start, periods=days * n, freq=pd.Timedelta(minutes=60 / M))
    noise = rng.normal(0.0, sigma, size=(days, n))
    spikes = (rng.random((days, n)) < spike_prob) * rng.exponential(spike_scale, size=(days, n))
    prices = np.clip(base[None, :] + noise + spikes, 0.0, None).round(2)
    return pd.DataFrame({"timestamp": stamps.strftime(TIMESTAMP_FORMAT), "price": prices.ravel()})


def write_synthetic_history(path: PathLike, **kwargs) -> Path:
    p = Path(path)
    ensure_dir(p.parent)
    synthetic_history(**kwargs).to_csv(p, index=False, lineterminator="\n")
    return p
