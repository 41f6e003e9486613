from __future__ import annotations
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple
import numpy as np

from storagebid.common.errors import ConfigurationError
from storagebid.common.state import BidPair, Index, PostState, State, StateSpace

__all__ = [
    "MarketConfig",
    "TerminalContribution",
    "beta_constant",
    "beta_step",
    "beta_linear",
    "beta_power",
    "make_beta",
    "linear_grid",
    "zero_terminal",
    "linear_terminal",
]


# ---------------------------
# Lifetime discount tables
# ---------------------------

def beta_constant(L_max: int, c: float = 1.0) -> Tuple[float, ...]:
    """beta(l) = c for every l."""
    return tuple(float(c) for _ in range(L_max + 1))


def beta_step(L_max: int) -> Tuple[float, ...]:
    """beta(0) = 0, beta(l) = 1 otherwise."""
    return tuple(0.0 if l == 0 else 1.0 for l in range(L_max + 1))


def beta_linear(L_max: int) -> Tuple[float, ...]:
    """beta(l) = l / L_max."""
    if L_max < 1:
        raise ConfigurationError("linear beta needs L_max >= 1")
    return tuple(l / L_max for l in range(L_max + 1))


def beta_power(L_max: int, n: float) -> Tuple[float, ...]:
    """beta(l) = (l / L_max) ** (1/n), n > 1."""
    if L_max < 1:
        raise ConfigurationError("power beta needs L_max >= 1")
    if n <= 1:
        raise ConfigurationError(f"power beta needs n > 1, got {n}")
    return tuple((l / L_max) ** (1.0 / n) for l in range(L_max + 1))


def make_beta(kind: str, L_max: int, **kwargs: Any) -> Tuple[float, ...]:
    """
    Build a beta table by family name.
    kind in {"constant", "step", "linear", "power"}.
    """
    k = kind.lower()
    if k == "constant":
        return beta_constant(L_max, float(kwargs.get("c", 1.0)))
    if k == "step":
        return beta_step(L_max)
    if k == "linear":
        return beta_linear(L_max)
    if k == "power":
        return beta_power(L_max, float(kwargs["n"]))
    raise ConfigurationError(f"Unknown beta family: {kind}")


def linear_grid(b_min: float, b_max: float, levels: int) -> Tuple[float, ...]:
    """`levels` bid values spaced linearly on [b_min, b_max]."""
    if levels < 1:
        raise ConfigurationError("bid grid needs at least one level")
    return tuple(float(x) for x in np.linspace(b_min, b_max, levels))


# ---------------------------
# Terminal contribution
# ---------------------------

@dataclass(frozen=True, eq=False)
class TerminalContribution:
    """
    C_term(S_T), nondecreasing in (R_T, L_T, b_{T-1}).

    kind "zero"  : 0 everywhere
    kind "linear": value_per_unit * R_T
    kind "table" : explicit values over the pre-decision lattice
    """
    kind: str = "zero"
    value_per_unit: float = 0.0
    table: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "linear", "table"):
            raise ConfigurationError(f"Unknown terminal kind: {self.kind}")
        if self.kind == "linear" and self.value_per_unit < 0:
            raise ConfigurationError("linear terminal needs value_per_unit >= 0")
        if self.kind == "table" and self.table is None:
            raise ConfigurationError("table terminal needs a table")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "linear" and self.value_per_unit == 0.0)

    def values(self, space: StateSpace) -> np.ndarray:
        """Terminal values laid out over the pre-decision lattice `space`."""
        if self.kind == "table":
            assert self.table is not None
            table = np.asarray(self.table, dtype=float)
            if table.shape != space.shape:
                raise ConfigurationError(
                    f"terminal table shape {table.shape} != lattice shape {space.shape}"
                )
            return table.copy()
        out = np.zeros(space.shape, dtype=float)
        if self.kind == "linear":
            r = np.arange(space.n_resource, dtype=float) * self.value_per_unit
            out += r.reshape((-1,) + (1,) * (len(space.shape) - 1))
        return out

    def value_at(self, idx: Index) -> float:
        """C_term at one pre-decision lattice index (R, L, lo, hi, p)."""
        if self.kind == "table":
            assert self.table is not None
            return float(np.asarray(self.table)[tuple(idx)])
        if self.kind == "linear":
            return self.value_per_unit * float(idx[0])
        return 0.0

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "table":
            raise ConfigurationError("table terminals are stored with the value table, not in JSON")
        return {"kind": self.kind, "value_per_unit": self.value_per_unit}


def zero_terminal() -> TerminalContribution:
    return TerminalContribution("zero")


def linear_terminal(value_per_unit: float) -> TerminalContribution:
    return TerminalContribution("linear", value_per_unit=float(value_per_unit))


# ---------------------------
# Market configuration
# ---------------------------

@dataclass(frozen=True)
class MarketConfig:
    """
    Static parameters of the bidding problem.

    Parameters
    ----------
    M : int
        Settlements per hour (12 for 5-minute markets).
    T : int
        Last value-function index; bids are placed at t = 0..T-1.
    R_max : int
        Storage capacity in units of 1/M MWh.
    L_max : int
        Lifetime budget (number of discharges).
    K : float
        Undersupply penalty multiplier.
    bid_grid : tuple of float
        Strictly increasing allowed bid levels; b_min/b_max are its ends.
    beta : tuple of float
        Discount per remaining lifetime l = 0..L_max, nondecreasing, in [0, 1].
    terminal : TerminalContribution
        C_term(S_T).
    price_bound : float
        Global upper bound on spot prices.
    """
    M: int
    T: int
    R_max: int
    L_max: int
    K: float
    bid_grid: Tuple[float, ...]
    beta: Tuple[float, ...]
    terminal: TerminalContribution = field(default_factory=zero_terminal)
    price_bound: float = 3000.0
    initial_resource: int = 0
    initial_lifetime: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "bid_grid", tuple(float(b) for b in self.bid_grid))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if self.M < 1:
            raise ConfigurationError("M must be >= 1")
        if self.T < 1:
            raise ConfigurationError("T must be >= 1")
        if self.R_max < 1:
            raise ConfigurationError("R_max must be >= 1")
        if self.L_max < 0:
            raise ConfigurationError("L_max must be >= 0")
        if self.K < 0:
            raise ConfigurationError("K must be >= 0")
        g = np.asarray(self.bid_grid)
        if g.size < 1 or np.any(np.diff(g) <= 0):
            raise ConfigurationError("bid_grid must be nonempty and strictly increasing")
        if g[0] < 0:
            raise ConfigurationError("bid_grid must be nonnegative")
        b = np.asarray(self.beta)
        if b.size != self.L_max + 1:
            raise ConfigurationError(f"beta needs {self.L_max + 1} entries, got {b.size}")
        if np.any(b < 0) or np.any(b > 1) or np.any(np.diff(b) < 0):
            raise ConfigurationError("beta must be nondecreasing with values in [0, 1]")
        if not 0 <= self.initial_resource <= self.R_max:
            raise ConfigurationError("initial_resource must be within [0, R_max]")
        if self.initial_lifetime is not None and not 0 <= self.initial_lifetime <= self.L_max:
            raise ConfigurationError("initial_lifetime must be within [0, L_max]")
        if self.price_bound <= 0:
            raise ConfigurationError("price_bound must be > 0")

    # ---- derived quantities -------------------------------------------
    @property
    def dt(self) -> float:
        return 1.0 / self.M

    @property
    def grid(self) -> np.ndarray:
        return np.asarray(self.bid_grid, dtype=float)

    @property
    def n_bids(self) -> int:
        return len(self.bid_grid)

    @property
    def b_min(self) -> float:
        return self.bid_grid[0]

    @property
    def b_max(self) -> float:
        return self.bid_grid[-1]

    @property
    def beta_table(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)

    @property
    def L0(self) -> int:
        return self.L_max if self.initial_lifetime is None else self.initial_lifetime

    @property
    def idle_bid(self) -> BidPair:
        """(b_min, b_max): clears only when prices leave the grid range."""
        return BidPair(self.b_min, self.b_max)

    def space(self, n_price_states: int = 1, post: bool = False) -> StateSpace:
        return StateSpace(self.R_max + 1, self.L_max + 1, self.n_bids, n_price_states, post)

    # ---- bid <-> grid index --------------------------------------------
    def level_index(self, value: float) -> int:
        pos = int(np.searchsorted(self.grid, value))
        if pos >= self.n_bids or not np.isclose(self.grid[pos], value, rtol=0.0, atol=1e-9):
            raise ConfigurationError(f"bid level {value} is not on the bid grid")
        return pos

    def bid_index(self, bid: BidPair) -> Tuple[int, int]:
        return self.level_index(bid.low), self.level_index(bid.high)

    def bid(self, lo: int, hi: int) -> BidPair:
        return BidPair(self.bid_grid[lo], self.bid_grid[hi])

    def snap(self, value: float) -> float:
        """Nearest grid level (ties go to the lower level)."""
        return float(self.grid[int(np.argmin(np.abs(self.grid - value)))])

    def feasible_bids(self) -> List[Tuple[int, int]]:
        """All (lo, hi) index pairs with lo <= hi, in lexicographic order."""
        g = self.n_bids
        return [(lo, hi) for lo in range(g) for hi in range(lo, g)]

    # ---- state <-> lattice index ---------------------------------------
    def state_index(self, s: State) -> Index:
        lo, hi = self.bid_index(s.prev_bid)
        return (int(s.R), int(s.L), lo, hi, int(s.price_state))

    def state_from_index(self, idx: Index) -> State:
        r, l, lo, hi, p = idx
        return State(int(r), int(l), self.bid(lo, hi), int(p))

    def post_index(self, s: PostState) -> Index:
        r, l, lo, hi, p = self.state_index(s.state)
        blo, bhi = self.bid_index(s.bid)
        return (r, l, lo, hi, blo, bhi, p)

    def initial_state(self, price_state: int = 0) -> State:
        """R_0, L_0 and the idle bid standing in for the undefined b_{-1}."""
        return State(self.initial_resource, self.L0, self.idle_bid, price_state)

    # ---- JSON -------------------------------------------------------------
    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "MarketConfig":
        missing = [k for k in ("T", "R_max", "L_max", "bid_grid") if k not in d]
        if missing:
            raise ConfigurationError(f"market config is missing {missing}")
        L_max = int(d["L_max"])
        grid_spec = d["bid_grid"]
        if isinstance(grid_spec, dict):
            grid = linear_grid(float(grid_spec["min"]), float(grid_spec["max"]), int(grid_spec["levels"]))
        else:
            grid = tuple(float(x) for x in grid_spec)
        beta_spec = d.get("beta", {"kind": "constant", "c": 1.0})
        if isinstance(beta_spec, dict):
            spec = dict(beta_spec)
            beta = make_beta(spec.pop("kind"), L_max, **spec)
        else:
            beta = tuple(float(x) for x in beta_spec)
        term_spec = d.get("terminal", {"kind": "zero"})
        terminal = TerminalContribution(
            kind=term_spec.get("kind", "zero"),
            value_per_unit=float(term_spec.get("value_per_unit", 0.0)),
        )
        return cls(
            M=int(d.get("M", 1)),
            T=int(d["T"]),
            R_max=int(d["R_max"]),
            L_max=L_max,
            K=float(d.get("K", 1.0)),
            bid_grid=grid,
            beta=beta,
            terminal=terminal,
            price_bound=float(d.get("price_bound", 3000.0)),
            initial_resource=int(d.get("initial_resource", 0)),
            initial_lifetime=d.get("initial_lifetime"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "M": self.M,
            "T": self.T,
            "R_max": self.R_max,
            "L_max": self.L_max,
            "K": self.K,
            "bid_grid": list(self.bid_grid),
            "beta": list(self.beta),
            "terminal": self.terminal.to_dict() if self.terminal.kind != "table" else {"kind": "table"},
            "price_bound": self.price_bound,
            "initial_resource": self.initial_resource,
            "initial_lifetime": self.initial_lifetime,
        }

    def with_terminal(self, terminal: TerminalContribution) -> "MarketConfig":
        return replace(self, terminal=terminal)
