# src/storagebid/common/errors.py
from __future__ import annotations
from typing import List, Optional

__all__ = [
    "StorageBidError",
    "ConfigurationError",
    "DomainError",
    "CapabilityError",
    "CapacityError",
    "IngestionError",
    "DataError",
]


class StorageBidError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(StorageBidError):
    """Invalid market/trainer/dataset configuration."""


class DomainError(StorageBidError):
    """A numeric parameter is outside its mathematical domain (e.g. sigma <= 0)."""


class CapabilityError(StorageBidError):
    """The price model cannot do what was asked (e.g. exact enumeration of a replay model)."""


class CapacityError(StorageBidError):
    """Enumeration or state space larger than the configured cap."""


class IngestionError(StorageBidError):
    """Malformed price file. `lines` holds the offending 1-based line numbers."""

    def __init__(self, message: str, lines: Optional[List[int]] = None) -> None:
        super().__init__(message)
        self.lines: List[int] = list(lines or [])


class DataError(StorageBidError):
    """Evaluation data does not cover the requested horizon."""
