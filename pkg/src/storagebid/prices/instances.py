# src/storagebid/prices/instances.py
"""
Named problem instances and the JSON instance loader.

An instance file has a `market` block (see MarketConfig.from_dict) and a
`prices` block naming the model family:

    {"kind": "seasonal", "noise": "pseudonormal"|"uniform", "support": [-20, 20], "sigma": 7}
    {"kind": "regime", "trend": "sin"|"cos", "alpha_p": 0.9, "alpha_q": 0.5}
    {"kind": "deterministic", "hourly_prices": [[...], ...]}
    {"kind": "historical", "csv": "data/x.csv", "dataset": {...}}

Historical instances carry no model here; the dataset is resolved by the caller.
"""
from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union
import json

from storagebid.common.errors import ConfigurationError
from storagebid.market.config import MarketConfig, beta_constant, beta_power
from storagebid.prices.base import PriceModel
from storagebid.prices.distributions import integer_support, pseudonormal, uniform
from storagebid.prices.synthetic import DeterministicModel, RegimeSwitchingModel, SeasonalNoiseModel

__all__ = [
    "Instance",
    "PRESETS",
    "preset",
    "price_model_from_dict",
    "instance_from_dict",
    "load_instance",
]

PathLike = Union[str, Path]

# (T, R_max, L_max, aged, noise)
_SEASONAL_PRESETS = {
    "A1": (24, 6, 8, False, "pseudonormal"),
    "B1": (24, 6, 8, True, "pseudonormal"),
    "C1": (36, 6, 8, False, "pseudonormal"),
    "D1": (24, 12, 12, True, "uniform"),
    "E1": (24, 12, 12, True, "pseudonormal"),
    "F1": (36, 18, 18, True, "pseudonormal"),
}

# (T, R_max, L_max, trend, alpha_p, alpha_q); beta is always the aged power curve
_REGIME_PRESETS = {
    "A2": (24, 4, 6, "cos", 0.9, 0.5),
    "B2": (24, 4, 8, "sin", 0.8, 0.7),
    "C2": (12, 8, 6, "cos", 0.9, 0.5),
    "D2": (12, 6, 8, "cos", 0.8, 0.7),
    "E2": (12, 8, 10, "sin", 0.9, 0.5),
    "F2": (12, 10, 8, "cos", 0.8, 0.7),
}

AGED_EXPONENT = 6.0


@dataclass(frozen=True)
class Instance:
    name: str
    market: MarketConfig
    prices: Dict[str, Any] = field(default_factory=dict)
    model: Optional[PriceModel] = None

    @property
    def is_historical(self) -> bool:
        return self.prices.get("kind") == "historical"

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "market": self.market.to_dict(), "prices": dict(self.prices)}


def price_model_from_dict(d: Dict[str, Any], cfg: MarketConfig) -> Optional[PriceModel]:
    """Build the price model a `prices` block describes (None for historical data)."""
    kind = d.get("kind")
    cap = int(d.get("enumeration_cap", 10 ** 6))
    if kind == "seasonal":
        lo, hi = d.get("support", [-20, 20])
        support = integer_support(lo, hi)
        if "step" in d:
            support = tuple(x for x in support if (x - lo) % int(d["step"]) == 0)
        noise_kind = d.get("noise", "pseudonormal")
        if noise_kind == "pseudonormal":
            noise = pseudonormal(support, float(d.get("mu", 0.0)), float(d.get("sigma", 7.0)))
        elif noise_kind == "uniform":
            noise = uniform(support)
        else:
            raise ConfigurationError(f"Unknown noise family: {noise_kind}")
        return SeasonalNoiseModel(cfg.M, noise, price_bound=cfg.price_bound, enumeration_cap=cap)
    if kind == "regime":
        return RegimeSwitchingModel(
            cfg.M,
            trend=d.get("trend", "sin"),
            alpha_p=float(d.get("alpha_p", 0.9)),
            alpha_q=float(d.get("alpha_q", 0.5)),
            price_bound=cfg.price_bound,
            enumeration_cap=cap,
        )
    if kind == "deterministic":
        return DeterministicModel(d["hourly_prices"])
    if kind == "historical":
        return None
    raise ConfigurationError(f"Unknown price model kind: {kind!r}")


def instance_from_dict(d: Dict[str, Any], name: str = "custom") -> Instance:
    if "market" not in d or "prices" not in d:
        raise ConfigurationError("instance config needs 'market' and 'prices' blocks")
    cfg = MarketConfig.from_dict(d["market"])
    prices = dict(d["prices"])
    return Instance(d.get("name", name), cfg, prices, price_model_from_dict(prices, cfg))


def load_instance(path: PathLike) -> Instance:
    """Read a JSON instance file, or resolve a preset name such as 'A1' or 'desk'."""
    p = Path(path)
    if not p.exists() and str(path) in PRESETS:
        return preset(str(path))
    try:
        d = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config file {path} is not valid JSON: {e}") from None
    return instance_from_dict(d, name=p.stem)


# ---------------------------
# Presets
# ---------------------------

def _seasonal_instance(name: str) -> Dict[str, Any]:
    T, R_max, L_max, aged, noise = _SEASONAL_PRESETS[name]
    beta = list(beta_power(L_max, AGED_EXPONENT) if aged else beta_constant(L_max))
    return {
        "name": name,
        "market": {"M": 1, "T": T, "R_max": R_max, "L_max": L_max, "K": 1.0,
                   "bid_grid": {"min": 15, "max": 85, "levels": 30}, "beta": beta},
        "prices": {"kind": "seasonal", "noise": noise, "support": [-20, 20], "sigma": 7.0},
    }


def _regime_instance(name: str) -> Dict[str, Any]:
    T, R_max, L_max, trend, alpha_p, alpha_q = _REGIME_PRESETS[name]
    return {
        "name": name,
        "market": {"M": 1, "T": T, "R_max": R_max, "L_max": L_max, "K": 1.0,
                   "bid_grid": {"min": 15, "max": 85, "levels": 30},
                   "beta": list(beta_power(L_max, AGED_EXPONENT))},
        "prices": {"kind": "regime", "trend": trend, "alpha_p": alpha_p, "alpha_q": alpha_q},
    }


_SMALL = {
    "desk": {
        "name": "desk",
        "market": {"M": 1, "T": 6, "R_max": 4, "L_max": 3, "K": 1.0,
                   "bid_grid": {"min": 15, "max": 85, "levels": 6},
                   "beta": list(beta_power(3, AGED_EXPONENT))},
        "prices": {"kind": "seasonal", "noise": "pseudonormal", "support": [-20, 20], "step": 10,
                   "sigma": 10.0},
    },
    "V1-small": {
        "name": "V1-small",
        "market": {"M": 1, "T": 12, "R_max": 3, "L_max": 3, "K": 1.0,
                   "bid_grid": {"min": 15, "max": 85, "levels": 8},
                   "beta": list(beta_power(3, AGED_EXPONENT))},
        "prices": {"kind": "seasonal", "noise": "pseudonormal", "support": [-20, 20], "sigma": 7.0},
    },
    "V2-small": {
        "name": "V2-small",
        "market": {"M": 1, "T": 12, "R_max": 3, "L_max": 3, "K": 1.0,
                   "bid_grid": {"min": 15, "max": 85, "levels": 8},
                   "beta": list(beta_power(3, AGED_EXPONENT))},
        "prices": {"kind": "regime", "trend": "cos", "alpha_p": 0.9, "alpha_q": 0.5},
    },
    "case-study": {
        "name": "case-study",
        "market": {"M": 12, "T": 23, "R_max": 72, "L_max": 0, "K": 1.0,
                   "bid_grid": {"min": 0, "max": 150, "levels": 15}, "beta": [1.0]},
        "prices": {"kind": "historical", "csv": "data/synthetic_history.csv",
                   "dataset": {"mode": "prior-month", "target": "2012-02", "weekday_only": False}},
    },
}

PRESETS: Tuple[str, ...] = tuple(_SEASONAL_PRESETS) + tuple(_REGIME_PRESETS) + tuple(_SMALL)


def preset(name: str) -> Instance:
    """Named instance: A1..F1, A2..F2, 'desk', 'V1-small', 'V2-small' or 'case-study'."""
    if name in _SEASONAL_PRESETS:
        return instance_from_dict(_seasonal_instance(name))
    if name in _REGIME_PRESETS:
        return instance_from_dict(_regime_instance(name))
    if name in _SMALL:
        return instance_from_dict(_SMALL[name])
    raise ConfigurationError(f"Unknown preset {name!r}; known: {', '.join(PRESETS)}")
