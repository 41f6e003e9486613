# src/storagebid/common/table.py
from __future__ import annotations
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union
import csv
import json
import zipfile

import numpy as np

from storagebid.common.errors import ConfigurationError
from storagebid.common.io import ensure_dir
from storagebid.common.state import Index, StateSpace
from storagebid.market.config import MarketConfig, TerminalContribution

__all__ = ["ValueTable", "FORMAT_VERSION"]

PathLike = Union[str, Path]
FORMAT_VERSION = 1


@dataclass
class ValueTable:
    """
    Per-period values over the pre- or post-decision lattice.

    layout "pre" : values[t] for t = 0..T, shape (T+1,) + pre-decision lattice
    layout "post": values[t] for t = 0..T-1, shape (T,) + post-decision lattice

    `policy` (exact solves only) holds the argmax bid indices per (t, state),
    shape (T,) + pre-decision lattice + (2,). `counts` holds visit counts of
    trained tables. Infeasible cells (some lo > hi) are never read.
    """
    cfg: MarketConfig
    layout: str
    n_price_states: int
    values: np.ndarray
    policy: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.layout not in ("pre", "post"):
            raise ConfigurationError(f"layout must be 'pre' or 'post', got {self.layout!r}")
        expected = (self.n_periods,) + self.space.shape
        if self.values.shape != expected:
            raise ConfigurationError(f"values shape {self.values.shape} != {expected}")

    # ---- constructors -----------------------------------------------------
    @classmethod
    def zeros(cls, cfg: MarketConfig, n_price_states: int = 1, layout: str = "pre",
              with_counts: bool = False) -> "ValueTable":
        space = cfg.space(n_price_states, post=(layout == "post"))
        n = cfg.T + 1 if layout == "pre" else cfg.T
        values = np.zeros((n,) + space.shape, dtype=float)
        counts = np.zeros(values.shape, dtype=np.int64) if with_counts else None
        return cls(cfg, layout, n_price_states, values, counts=counts)

    # ---- geometry -----------------------------------------------------------
    @property
    def post(self) -> bool:
        return self.layout == "post"

    @property
    def n_periods(self) -> int:
        return self.cfg.T if self.post else self.cfg.T + 1

    @property
    def space(self) -> StateSpace:
        return self.cfg.space(self.n_price_states, post=self.post)

    def slice(self, t: int) -> np.ndarray:
        return self.values[t]

    def value(self, t: int, idx: Index) -> float:
        return float(self.values[(t,) + tuple(idx)])

    def violations(self, tol: float = 0.0) -> int:
        """Monotonicity violations summed over every period."""
        space = self.space
        return sum(space.violations(self.values[t], tol) for t in range(self.n_periods))

    def is_monotone(self, tol: float = 0.0) -> bool:
        return self.violations(tol) == 0

    # ---- serialization ----------------------------------------------------
    def header(self) -> Dict[str, Any]:
        return {
            "format": FORMAT_VERSION,
            "layout": self.layout,
            "n_price_states": self.n_price_states,
            "shape": list(self.values.shape),
            "market": self.cfg.to_dict(),
            "metadata": self.metadata,
        }

    def save(self, path: PathLike) -> Path:
        """npz archive with a JSON header; doubles round-trip bit-exactly."""
        p = Path(path)
        ensure_dir(p.parent)
        arrays: Dict[str, np.ndarray] = {
            "header": np.array(json.dumps(self.header(), sort_keys=True)),
            "values": self.values,
        }
        if self.policy is not None:
            arrays["policy"] = self.policy
        if self.counts is not None:
            arrays["counts"] = self.counts
        if self.cfg.terminal.kind == "table":
            assert self.cfg.terminal.table is not None
            arrays["terminal"] = np.asarray(self.cfg.terminal.table, dtype=float)
        # fixed member timestamps keep reruns byte-identical
        with zipfile.ZipFile(p, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for name, arr in arrays.items():
                info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
                info.compress_type = zipfile.ZIP_DEFLATED
                with zf.open(info, "w", force_zip64=True) as f:
                    np.lib.format.write_array(f, np.asanyarray(arr), allow_pickle=False)
        return p

    @classmethod
    def load(cls, path: PathLike) -> "ValueTable":
        """Read a table written by `save`; unreadable or foreign files raise ConfigurationError."""
        try:
            return cls._load(Path(path))
        except (OSError, KeyError, ValueError, zipfile.BadZipFile) as e:
            raise ConfigurationError(f"cannot read value table {path}: {e}") from e

    @classmethod
    def _load(cls, path: Path) -> "ValueTable":
        with np.load(Path(path), allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            if header.get("format") != FORMAT_VERSION:
                raise ConfigurationError(f"unsupported value table format {header.get('format')}")
            market = dict(header["market"])
            terminal = None
            if market.get("terminal", {}).get("kind") == "table":
                terminal = TerminalContribution("table", table=np.array(data["terminal"]))
                market["terminal"] = {"kind": "zero"}
            cfg = MarketConfig.from_dict(market)
            if terminal is not None:
                cfg = cfg.with_terminal(terminal)
            return cls(
                cfg,
                header["layout"],
                int(header["n_price_states"]),
                np.array(data["values"]),
                policy=np.array(data["policy"]) if "policy" in data else None,
                counts=np.array(data["counts"]) if "counts" in data else None,
                metadata=header.get("metadata", {}),
            )

    def to_csv(self, path: PathLike) -> Path:
        """
        Row-major export of the feasible cells: '#'-prefixed JSON header line,
        then one row per (t, cell) with the value printed to 17 significant digits.
        """
        p = Path(path)
        ensure_dir(p.parent)
        axes = ["R", "L", "lo", "hi"] + (["bid_lo", "bid_hi"] if self.post else []) + ["price_state"]
        mask = self.space.valid_mask()
        with p.open("w", newline="") as f:
            f.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["t"] + axes + ["value"])
            for t in range(self.n_periods):
                vt = self.values[t]
                for idx in zip(*np.nonzero(mask)):
                    w.writerow([t] + [int(i) for i in idx] + ["%.17g" % vt[idx]])
        return p
