# src/storagebid/policies/evaluate.py
from __future__ import annotations
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd

from storagebid.common.errors import ConfigurationError, DataError
from storagebid.common.io import PathLike, ensure_dir, write_json, write_rows_csv
from storagebid.market.config import MarketConfig
from storagebid.market.mechanics import settle_grid
from storagebid.policies.base import Policy
from storagebid.prices.base import Episode, PriceModel
from storagebid.prices.historical import HistoricalReplayModel, ReplayEpisode

logger = logging.getLogger(__name__)

__all__ = ["EvaluationReport", "simulate_path", "evaluate", "write_report", "REVENUE_QUANTILES",
           "STORAGE_QUANTILES"]

REVENUE_QUANTILES = (0.05, 0.5, 0.95)
STORAGE_QUANTILES = (0.9, 0.95)


@dataclass
class EvaluationReport:
    """
    Realized revenue of a policy over a set of sample paths.

    revenues          : one total per path (hours 1..T)
    labels            : path labels (dates for historical days, indices otherwise)
    storage_histogram : mass of each level 0..R_max over all hourly levels of all paths
    """
    policy: Dict[str, Any]
    revenues: np.ndarray
    labels: List[str]
    storage_histogram: np.ndarray
    storage_levels: np.ndarray = field(repr=False)
    final_storage: np.ndarray = field(repr=False)

    @property
    def n_paths(self) -> int:
        return int(self.revenues.size)

    @property
    def mean(self) -> float:
        return float(self.revenues.mean())

    @property
    def std(self) -> float:
        return float(self.revenues.std(ddof=1)) if self.n_paths > 1 else 0.0

    @property
    def stderr(self) -> float:
        return self.std / np.sqrt(self.n_paths)

    def quantiles(self, qs: Sequence[float] = REVENUE_QUANTILES) -> Dict[str, float]:
        # np.quantile's default is linear interpolation between order statistics
        return {f"{q:g}": float(np.quantile(self.revenues, q)) for q in qs}

    def storage_quantiles(self, qs: Sequence[float] = STORAGE_QUANTILES) -> Dict[str, float]:
        return {f"{q:g}": float(np.quantile(self.storage_levels, q)) for q in qs}

    def monthly(self) -> pd.DataFrame:
        """Revenue per month (total, mean, days) when labels are ISO dates; empty otherwise."""
        months = pd.Series(self.labels).str.slice(0, 7)
        if not months.str.match(r"^\d{4}-\d{2}$").all():
            return pd.DataFrame(columns=["month", "days", "total", "mean"])
        df = pd.DataFrame({"month": months, "revenue": self.revenues})
        out = df.groupby("month", sort=True)["revenue"].agg(days="count", total="sum", mean="mean")
        return out.reset_index()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "policy": self.policy,
            "n_paths": self.n_paths,
            "mean": self.mean,
            "std": self.std,
            "stderr": self.stderr,
            "quantiles": self.quantiles(),
            "storage_quantiles": self.storage_quantiles(),
            "storage_histogram": [float(x) for x in self.storage_histogram],
            "monthly": self.monthly().to_dict(orient="records"),
        }


def simulate_path(policy: Policy, cfg: MarketConfig, episode: Episode,
                  price_state: int = 0) -> Tuple[float, List[int]]:
    """
    Run one horizon. Hour 0 has no active bid and does not settle; bid b_t
    (placed at t = 0..T-1) settles hour t+1. Returns the revenue and the
    storage level after every hour 0..T.
    """
    r, l = cfg.initial_resource, cfg.L0
    prev = cfg.bid_index(cfg.idle_bid)
    ps = int(price_state)
    revenue = 0.0
    levels: List[int] = []
    for t in range(cfg.T + 1):
        if not episode.has_hour(t):
            raise DataError(f"sample path ends at hour {t}; horizon needs hours 0..{cfg.T}")
        bid = policy.decide(t, (r, l, prev[0], prev[1], ps)) if t < cfg.T else None
        hour = episode.hour(t, ps)
        if t > 0:
            settled = settle_grid(hour.prices, cfg)
            revenue += float(settled.revenue[r, l, prev[0], prev[1]])
            r, l = int(settled.next_R[r, prev[0], prev[1]]), int(settled.next_L[l, prev[0], prev[1]])
        levels.append(r)
        if bid is not None:
            prev = (int(bid[0]), int(bid[1]))
        ps = int(hour.next_state)
    return revenue, levels


def _day_episodes(cfg: MarketConfig, source: Any) -> Tuple[List[Episode], List[str]]:
    model = source if isinstance(source, HistoricalReplayModel) else HistoricalReplayModel(
        list(getattr(source, "paths", source)), M=cfg.M, price_bound=cfg.price_bound)
    if model.M != cfg.M:
        raise ConfigurationError(f"dataset has M={model.M}, market has M={cfg.M}")
    rng = np.random.default_rng(0)
    return [ReplayEpisode(model, d, rng) for d in range(model.n_days)], list(model.labels)


def evaluate(policy: Policy, source: Union[PriceModel, Sequence[Any], Any], n_paths: int = 1000,
             seed: Optional[int] = 0, cfg: Optional[MarketConfig] = None,
             threads: int = 1) -> EvaluationReport:
    """
    Empirical value of `policy`.

    Parameters
    ----------
    source : a sampling PriceModel (n_paths episodes, one generator per path
             spawned from `seed`) or a test dataset (day paths or a
             HistoricalReplayModel), each day replayed once.
    threads : workers; results do not depend on it.
    """
    cfg = cfg or policy.cfg
    if threads < 1:
        raise ConfigurationError("threads must be >= 1")
    ps0 = 0
    if isinstance(source, PriceModel) and not isinstance(source, HistoricalReplayModel):
        if n_paths < 1:
            raise ConfigurationError("n_paths must be >= 1")
        children = np.random.SeedSequence(seed).spawn(n_paths)
        episodes = [source.start_episode(np.random.default_rng(c)) for c in children]
        labels = [str(i) for i in range(n_paths)]
        ps0 = source.initial_price_state()
    else:
        episodes, labels = _day_episodes(cfg, source)

    def run(ep: Episode) -> Tuple[float, List[int]]:
        return simulate_path(policy, cfg, ep, ps0)

    if threads == 1:
        results = [run(ep) for ep in episodes]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, episodes))

    revenues = np.array([r for r, _ in results], dtype=float)
    levels = np.array([lv for _, lv in results], dtype=int)
    hist = np.bincount(levels[:, 1:].ravel(), minlength=cfg.R_max + 1).astype(float)
    hist /= hist.sum()
    logger.info("Evaluated %s on %d paths: mean %.4f", policy.name, revenues.size, revenues.mean())
    return EvaluationReport(
        policy=policy.describe(),
        revenues=revenues,
        labels=labels,
        storage_histogram=hist,
        storage_levels=levels[:, 1:].ravel(),
        final_storage=levels[:, -1],
    )


def write_report(report: EvaluationReport, out_dir: PathLike) -> List[Path]:
    """report.json, revenues.csv, monthly_revenues.csv, quantiles.csv and storage_histogram.csv."""
    out = ensure_dir(out_dir)
    written = [write_json(out / "report.json", report.to_dict())]
    written.append(write_rows_csv(
        out / "revenues.csv",
        [{"path": i, "label": lab, "revenue": float(v)}
         for i, (lab, v) in enumerate(zip(report.labels, report.revenues))],
        fieldnames=["path", "label", "revenue"],
    ))
    monthly = report.monthly()
    written.append(write_rows_csv(out / "monthly_revenues.csv", monthly.to_dict(orient="records"),
                                  fieldnames=["month", "days", "total", "mean"]))
    rows = [{"statistic": "revenue", "quantile": q, "value": v} for q, v in report.quantiles().items()]
    rows += [{"statistic": "storage", "quantile": q, "value": v}
             for q, v in report.storage_quantiles().items()]
    written.append(write_rows_csv(out / "quantiles.csv", rows, fieldnames=["statistic", "quantile", "value"]))
    written.append(write_rows_csv(
        out / "storage_histogram.csv",
        [{"level": i, "mass": float(m)} for i, m in enumerate(report.storage_histogram)],
        fieldnames=["level", "mass"],
    ))
    return written
