from __future__ import annotations
import time
from contextlib import contextmanager
from typing import Callable, Iterator


@contextmanager
def timer(enabled: bool = True) -> Iterator[Callable[[], float]]:
    """
    Context manager to measure elapsed wall time.
    Usage:
        with timer() as t:
            ... code ...
        elapsed = t()
    With enabled=False the reading is always 0.0, which keeps report files
    byte-identical between reruns.
    """
    t0 = time.perf_counter()
    if not enabled:
        yield lambda: 0.0
        return
    yield lambda: (time.perf_counter() - t0)
