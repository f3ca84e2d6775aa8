"""testing functions in stepper module."""
import math

import numpy as np
import pytest

from gnslab.errors import DomainError, StepFailure
from gnslab.grid import GridFunction, WeightedGrid
from gnslab.stepper import RKF45, integrate_to, step_explicit


@pytest.fixture()
def state():
    grid = WeightedGrid.uniform(0, 1, 5)
    return GridFunction(grid, np.ones(5), True)


def test_zero_rhs(state):
    """Test a zero right hand side keeps the state."""
    new = step_explicit(state, lambda s: np.zeros(s.grid.size), 0.1)
    assert np.array_equal(new.values, state.values)


def test_exponential_decay(state):
    """Test u' = -u against exp(-1)."""
    stepper = RKF45(atol=1e-12, rtol=1e-12)
    end = integrate_to(state, lambda s: -s.values, 1.0, stepper)
    assert np.allclose(end.values, math.exp(-1), atol=1e-8)
    assert stepper.accepted > 0


def test_nan_rhs(state):
    """Test a NaN right hand side raises StepFailure."""
    with pytest.raises(StepFailure):
        step_explicit(state, lambda s: np.full(s.grid.size, np.nan), 0.1)


def test_invalid_step(state):
    """Test non-positive steps."""
    with pytest.raises(DomainError):
        step_explicit(state, lambda s: -s.values, 0.0)


def test_step_control(state):
    """Test the suggested step grows on an easy problem."""
    stepper = RKF45()
    stepper.step(state, lambda s: -s.values, 1e-4)
    assert stepper.dt_taken == pytest.approx(1e-4)
    assert stepper.dt_next > stepper.dt_taken
