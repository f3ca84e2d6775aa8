"""Helper functions to be used in other modules."""

from typing import Any

import numpy as np


def as_float(value: Any, name: str) -> float:
    """Convert a scalar input to float or raise a TypeError."""
    if isinstance(value, bool) or not isinstance(value, (int, float, np.floating,
                                                         np.integer)):
        raise TypeError(
            f'{name} must be a real number. Instead got {type(value).__name__}.')
    return float(value)


def relative_gap(got: float, expected: float, floor: float = 1e-300) -> float:
    """Relative distance between two numbers."""
    return abs(got - expected) / max(abs(expected), floor)
