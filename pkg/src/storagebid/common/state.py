from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union
import numpy as np

ArrayLike = Union[Sequence[float], np.ndarray]
Index = Tuple[int, ...]

__all__ = [
    "BidPair",
    "State",
    "PostState",
    "StateSpace",
]


@dataclass(frozen=True)
class BidPair:
    """
    Hour-ahead bid (b-, b+): buy below `low`, sell above `high`.
    Grid membership is checked by MarketConfig.bid_index, not here.
    """
    low: float
    high: float

    def __post_init__(self) -> None:
        if not self.low <= self.high:
            raise ValueError(f"BidPair requires low <= high, got ({self.low}, {self.high})")


@dataclass(frozen=True)
class State:
    """Pre-decision state (R, L, previous bid, price-model state index)."""
    R: int
    L: int
    prev_bid: BidPair
    price_state: int = 0


@dataclass(frozen=True)
class PostState:
    """Post-decision state: the pre-decision state plus the bid just placed."""
    state: State
    bid: BidPair


@dataclass(frozen=True)
class StateSpace:
    """
    Dense lattice over (R, L, bid pairs..., price state).

    Pre-decision layout : (R, L, lo, hi, p)
    Post-decision layout: (R, L, lo, hi, lo', hi', p)

    Bid pairs are stored over the full Cartesian product of grid indices;
    cells with lo > hi are infeasible. Every axis except the last is ordered;
    the price-state axis only relates equal values.
    """
    n_resource: int
    n_lifetime: int
    n_bids: int
    n_price_states: int = 1
    post: bool = False

    def __post_init__(self) -> None:
        for name in ("n_resource", "n_lifetime", "n_bids", "n_price_states"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def n_pairs(self) -> int:
        return 2 if self.post else 1

    @property
    def shape(self) -> Tuple[int, ...]:
        g = self.n_bids
        return (self.n_resource, self.n_lifetime) + (g, g) * self.n_pairs + (self.n_price_states,)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def valid_mask(self) -> np.ndarray:
        """Boolean array over `shape`: True where every bid pair has lo <= hi."""
        g = self.n_bids
        pair_ok = np.arange(g)[:, None] <= np.arange(g)[None, :]
        if self.post:
            pairs = pair_ok[:, :, None, None] & pair_ok[None, None, :, :]
        else:
            pairs = pair_ok
        mask = np.broadcast_to(
            pairs[None, None, ..., None], self.shape
        )
        return np.array(mask, dtype=bool)

    @property
    def feasible_size(self) -> int:
        g = self.n_bids
        n_pair = g * (g + 1) // 2
        return self.n_resource * self.n_lifetime * n_pair ** self.n_pairs * self.n_price_states

    # ------------------------------------------------------------------
    # Order relations
    # ------------------------------------------------------------------
    def leq(self, a: Index, b: Index) -> bool:
        """a precedes b: same price state and componentwise <= on the ordered axes."""
        if a[-1] != b[-1]:
            return False
        return all(x <= y for x, y in zip(a[:-1], b[:-1]))

    def up_box(self, idx: Index) -> Tuple[slice, ...]:
        """Slices selecting every cell s with idx <= s (same price state)."""
        return tuple(slice(i, None) for i in idx[:-1]) + (slice(idx[-1], idx[-1] + 1),)

    def down_box(self, idx: Index) -> Tuple[slice, ...]:
        """Slices selecting every cell s with s <= idx (same price state)."""
        return tuple(slice(0, i + 1) for i in idx[:-1]) + (slice(idx[-1], idx[-1] + 1),)

    # ------------------------------------------------------------------
    # Monotonicity audit
    # ------------------------------------------------------------------
    def violations(self, values: np.ndarray, tol: float = 0.0) -> int:
        """
        Number of adjacent feasible pairs (one step along one ordered axis)
        whose values decrease by more than `tol`.

        Between any two comparable feasible cells there is a chain of adjacent
        feasible cells (raise `hi` before `lo`), so zero violations here means
        the whole slice is monotone.
        """
        v = np.asarray(values, dtype=float)
        if v.shape != self.shape:
            raise ValueError(f"values shape {v.shape} != lattice shape {self.shape}")
        valid = self.valid_mask()
        bad = 0
        for axis in range(v.ndim - 1):
            if v.shape[axis] < 2:
                continue
            lower = [slice(None)] * v.ndim
            upper = [slice(None)] * v.ndim
            lower[axis] = slice(0, -1)
            upper[axis] = slice(1, None)
            both = valid[tuple(lower)] & valid[tuple(upper)]
            drop = v[tuple(upper)] - v[tuple(lower)] < -tol
            bad += int(np.count_nonzero(drop & both))
        return bad

    def is_monotone(self, values: np.ndarray, tol: float = 0.0) -> bool:
        return self.violations(values, tol) == 0

    # ------------------------------------------------------------------
    # Sampling
    # ------------------------------------------------------------------
    def random_state(self, rng: Optional[np.random.Generator] = None) -> Index:
        """Uniform draw over the feasible cells."""
        rng = rng or np.random.default_rng()
        flat = self._feasible_flat()
        k = int(flat[rng.integers(0, flat.size)])
        return tuple(int(i) for i in np.unravel_index(k, self.shape))

    def _feasible_flat(self) -> np.ndarray:
        cache = self.__dict__.get("_flat_cache")
        if cache is None:
            cache = np.flatnonzero(self.valid_mask().ravel())
            object.__setattr__(self, "_flat_cache", cache)
        return cache
