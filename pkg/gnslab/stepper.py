"""Adaptive explicit Runge-Kutta-Fehlberg stepping for grid functions."""

import logging
from typing import Callable, Union

import numpy as np

from .errors import DomainError, StepFailure
from .grid import GridFunction

logger = logging.getLogger(__name__)

Rhs = Callable[[GridFunction], Union[GridFunction, np.ndarray]]


class RKF45:
    """Runge-Kutta-Fehlberg 4(5) pair with step size control.

    The 4th order solution is propagated and the difference to the 5th order
    solution is the local error estimate. A step is accepted when

        max |err| / (atol + rtol * max(|y|, |y_new|)) <= 1.

    Rejected steps are retried with half the step. When the state is flagged
    strictly positive, values of an accepted step are clamped from below at
    ``floor * max(values)`` and every clamped node is counted in clamp_events.

    Args:
        atol: Absolute tolerance. Default: 1e-8.
        rtol: Relative tolerance. Default: 1e-8.
        dt_min: Smallest step before giving up with StepFailure. Default: 1e-12.
        dt_max: Optional upper bound for the suggested next step.
        floor: Relative positivity floor. Default: 1e-12.
    """
    C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
    A = (
        (),
        (1 / 4,),
        (3 / 32, 9 / 32),
        (1932 / 2197, -7200 / 2197, 7296 / 2197),
        (439 / 216, -8.0, 3680 / 513, -845 / 4104),
        (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
    )
    B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
    TR = (1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55)

    def __init__(self, atol: float = 1e-8, rtol: float = 1e-8, dt_min: float = 1e-12,
                 dt_max: float = None, floor: float = 1e-12) -> None:
        self.atol = atol
        self.rtol = rtol
        self.dt_min = dt_min
        self.dt_max = dt_max
        self.floor = floor
        self._dt_taken = None
        self._dt_next = None
        self._clamp_events = 0
        self._rejected = 0
        self._accepted = 0

    @property
    def dt_taken(self) -> Union[float, None]:
        """Size of the last accepted step."""
        return self._dt_taken

    @property
    def dt_next(self) -> Union[float, None]:
        """Suggested size of the next step."""
        return self._dt_next

    @property
    def clamp_events(self) -> int:
        """Number of node values lifted to the positivity floor so far."""
        return self._clamp_events

    @property
    def rejected(self) -> int:
        return self._rejected

    @property
    def accepted(self) -> int:
        return self._accepted

    @staticmethod
    def _evaluate(rhs: Rhs, state: GridFunction, values: np.ndarray) -> np.ndarray:
        out = rhs(state.with_values(values, strictly_positive=False))
        return np.asarray(getattr(out, 'values', out), dtype=float)

    def _attempt(self, state: GridFunction, rhs: Rhs, dt: float):
        y = state.values
        stages = []
        for a_row in self.A:
            incr = y.copy()
            for a, k in zip(a_row, stages):
                if a:
                    incr += dt * a * k
            stages.append(self._evaluate(rhs, state, incr))
        y_new = y + dt * sum(b * k for b, k in zip(self.B4, stages) if b)
        err = dt * sum(t * k for t, k in zip(self.TR, stages) if t)
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid='ignore'):
            err_norm = float(np.max(np.abs(err) / scale))
        return y_new, err_norm

    def step(self, state: GridFunction, rhs: Rhs, dt: float) -> GridFunction:
        """Take one accepted step starting with a trial step dt.

        Args:
            state: Current GridFunction.
            rhs: Callable that maps a GridFunction to its time derivative.
            dt: Trial step size.

        Returns:
            The new state. dt_taken and dt_next are updated.
        """
        if not dt > 0:
            raise DomainError(f'Time step must be positive. Got {dt}.')
        while True:
            if dt < self.dt_min:
                raise StepFailure(
                    f'Step size underflow: dt = {dt:.3e} < dt_min = {self.dt_min:.1e} '
                    f'after {self._rejected} rejected steps.')
            y_new, err_norm = self._attempt(state, rhs, dt)
            if np.isfinite(err_norm) and np.all(np.isfinite(y_new)) and err_norm <= 1:
                break
            self._rejected += 1
            logger.debug('Rejected step dt=%.3e err=%.3e', dt, err_norm)
            dt *= 0.5
        self._accepted += 1
        self._dt_taken = dt
        factor = 5.0 if err_norm == 0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
        dt_next = dt * factor
        if self.dt_max is not None:
            dt_next = min(dt_next, self.dt_max)
        self._dt_next = dt_next
        if state.strictly_positive:
            floor = self.floor * float(np.max(y_new))
            low = y_new < floor
            count = int(np.count_nonzero(low))
            if count:
                self._clamp_events += count
                y_new[low] = floor
        return state.with_values(y_new)


def step_explicit(state: GridFunction, rhs: Rhs, dt: float,
                  stepper: RKF45 = None) -> GridFunction:
    """Advance state by one adaptive RKF45 step with trial size dt."""
    stepper = stepper or RKF45()
    return stepper.step(state, rhs, dt)


def integrate_to(state: GridFunction, rhs: Rhs, t_end: float, stepper: RKF45 = None,
                 dt0: float = 1e-3, observer: Callable = None) -> GridFunction:
    """Integrate from t = 0 to t_end with adaptive steps.

    Args:
        state: Initial GridFunction.
        rhs: Right hand side.
        t_end: Final time.
        stepper: An RKF45 instance. A default one is created if not provided.
        dt0: First trial step.
        observer: Optional callable observer(t, state) called after every accepted
            step.

    Returns:
        The state at t_end.
    """
    stepper = stepper or RKF45()
    t = 0.0
    dt = dt0
    while t < t_end * (1 - 1e-14):
        dt = min(dt, t_end - t)
        state = stepper.step(state, rhs, dt)
        t += stepper.dt_taken
        dt = stepper.dt_next
        if observer is not None:
            observer(t, state)
    logger.debug(
        'Reached t=%.6g in %d steps (%d rejected, %d clamped values).', t,
        stepper.accepted, stepper.rejected, stepper.clamp_events)
    return state
