# src/storagebid/adp/projection.py
from __future__ import annotations
import numpy as np

from storagebid.common.state import Index, StateSpace

__all__ = ["monotone_project", "monotone_project_post"]


def monotone_project(values: np.ndarray, idx: Index, z: float, space: StateSpace) -> np.ndarray:
    """
    Monotone projection of one period's slice after observing z at idx (in place).

        s == idx   -> z
        s >= idx   -> max(z, value(s))
        s <= idx   -> min(z, value(s))
        otherwise  -> unchanged

    Comparisons only relate cells with the same price state, so the update is
    confined to the two boxes spanned by idx inside that price state.
    """
    idx = tuple(int(i) for i in idx)
    up = values[space.up_box(idx)]
    np.maximum(up, z, out=up)
    down = values[space.down_box(idx)]
    np.minimum(down, z, out=down)
    values[idx] = z
    return values


def monotone_project_post(values: np.ndarray, idx: Index, z: float, space: StateSpace) -> np.ndarray:
    """Same projection over the post-decision order (six ordered axes plus price state)."""
    if not space.post:
        raise ValueError("monotone_project_post needs a post-decision StateSpace")
    return monotone_project(values, idx, z, space)
