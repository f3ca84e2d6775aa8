"""Nonlinear diffusion flows along which the GNS deficit is non-increasing."""

import enum
import logging
import math
from typing import Callable, NamedTuple

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from .constants import GNParams, log_zeta_p
from .errors import DomainError, StepFailure
from .functionals import lyapunov_line, lyapunov_ultra
from .grid import GridFunction, Measure, WeightedGrid
from .stepper import RKF45
from .trace import FlowTrace
from .transform import log_v_star

logger = logging.getLogger(__name__)

FLOW_COLUMNS = ('t', 'lyapunov', 'dissipation_lhs', 'dissipation_rhs',
                'conserved_norm', 'min_value', 'clamp_events')
U_FLOW_COLUMNS = ('t', 'functional', 'dissipation_lhs', 'dissipation_rhs', 'u_bar',
                  'power_integral', 'power_rate_lhs', 'power_rate_rhs', 'min_value',
                  'clamp_events')
TINY = 1e-300
FROZEN_NODES = 2


class Frame(enum.Enum):
    """Variables a flow is simulated in."""
    UltraF = 'ultra'  # f on the NuP or XiP grid
    LineV = 'line'  # v on the line (p > 2) or on (-pi/2, pi/2) (p < 2)


def _positive(values: np.ndarray) -> np.ndarray:
    return np.maximum(values, TINY)


def _face_mean(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values[1:] + values[:-1])


def _check_ultra_grid(grid: WeightedGrid, params: GNParams) -> None:
    expected = Measure.NuP if params.is_supercritical else Measure.XiP
    if grid.measure is not expected:
        raise DomainError(
            f'The ultraspherical flow for p = {params.p} runs on a {expected.value} grid.'
            f' Got {grid.measure.value}.')


def rhs_ultra(f: GridFunction, params: GNParams) -> GridFunction:
    """Right hand side f^(1-p/2) [L f + (p/2) nu |f'|^2 / f] in flux form.

    The flow is discretized as f^(1-p) (1/w) (w nu f^(p/2) f')' with zero end fluxes,
    which keeps the weighted sum of f^p constant. nu is replaced by xi = 1 + y^2 for
    1 < p < 2.
    """
    _check_ultra_grid(f.grid, params)
    p = params.p
    values = _positive(f.values)
    mobility = _face_mean(values ** (p / 2))
    div = f.grid.flux_divergence(values, mobility=mobility)
    return GridFunction(f.grid, values ** (1 - p) * div)


def ultra_dissipation(f: GridFunction, params: GNParams) -> float:
    """2 int f^(1-p/2) |f'' - (p/2) |f'|^2 / f|^2 nu^2, the decay rate of lyapunov_ultra."""
    _check_ultra_grid(f.grid, params)
    p = params.p
    values = _positive(f.values)
    df = f.grid.differentiate(values, 1)
    d2f = f.grid.differentiate(values, 2)
    square = (d2f - 0.5 * p * df ** 2 / values) ** 2
    return 2 * f.grid.integrate(values ** (1 - p / 2) * square * f.grid.diffusivity ** 2)


def _line_weight(x: np.ndarray, params: GNParams) -> np.ndarray:
    """1 - z^2 with z = tanh x, or 1 + y^2 with y = tan x."""
    if params.is_supercritical:
        return 1 / np.cosh(x) ** 2
    return 1 / np.cos(x) ** 2


def _line_drift(x: np.ndarray, params: GNParams) -> np.ndarray:
    return np.tanh(x) if params.is_supercritical else np.tan(x)


def _line_bracket(v: GridFunction):
    x = v.grid.nodes
    values = _positive(v.values)
    dv = v.grid.differentiate(values, 1)
    d2v = v.grid.differentiate(values, 2)
    return x, values, dv, d2v


def rhs_line(v: GridFunction, params: GNParams) -> GridFunction:
    """Right hand side of the flow in line variables.

    v^(1-p/2) (1 - z^2)^(-1/2) [v'' + 2p/(p-2) z v' + (p/2) |v'|^2 / v + 2/(p-2) v]
    with z = tanh x for p > 2, and the analogue with y = tan x and 1 + y^2 for
    1 < p < 2. The two outermost nodes on each side are held fixed.
    """
    if v.grid.measure is not Measure.Lebesgue:
        raise DomainError('rhs_line expects a Lebesgue grid in the line variable.')
    p = params.p
    x, values, dv, d2v = _line_bracket(v)
    k = 2 / abs(p - 2)
    bracket = d2v + p * k * _line_drift(x, params) * dv + 0.5 * p * dv ** 2 / values \
        + k * values
    rate = values ** (1 - p / 2) / np.sqrt(_line_weight(x, params)) * bracket
    rate[:FROZEN_NODES] = 0
    rate[-FROZEN_NODES:] = 0
    return GridFunction(v.grid, rate)


def line_dissipation(v: GridFunction, params: GNParams) -> float:
    """Decay rate of lyapunov_line along the line flow.

    2 int (1 - z^2)^-2 (v / v_star)^(1-p/2) |v'' - (p/2) |v'|^2 / v + 2/(p-2) v|^2 dx
    and the analogue with 1 + y^2 for 1 < p < 2, divided by zeta_p like lyapunov_line.
    """
    p = params.p
    x, values, dv, d2v = _line_bracket(v)
    k = 2 / abs(p - 2)
    ratio = np.exp((1 - p / 2) * (np.log(values) - log_v_star(x, params)))
    square = (d2v - 0.5 * p * dv ** 2 / values + k * values) ** 2
    integral = v.grid.integrate(ratio * square / _line_weight(x, params) ** 2)
    return 2 * integral * math.exp(-log_zeta_p(params))


def normalize_lp(f: GridFunction, target: float, p: float) -> GridFunction:
    """Rescale f so that (int |f|^p)^(1/p) equals target."""
    current = f.grid.integrate(np.abs(f.values) ** p) ** (1 / p)
    return f.with_values(f.values * (target / current))


def optimizer_norm(params: GNParams, frame: 'Frame') -> float:
    """|v_star|_p on the line, or 1 for the probability measures of the Ultra frame."""
    if frame is Frame.UltraF:
        return 1.0
    return math.exp(log_zeta_p(params) / params.p)


def line_grid(params: GNParams, size: int, tail: float = None) -> WeightedGrid:
    """Uniform grid in the line variable for LineV runs.

    For p > 2 the line is cut at the radius where the mass of v_star^p / zeta_p
    beyond +-R drops below ``tail`` (default 1e-12). For 1 < p < 2 the interval
    (-pi/2, pi/2) is cut at arctan of the radius of WeightedGrid.xi_p with the same
    tail (default 1e-10), so both frames cover the same truncated line.
    """
    log_zeta = log_zeta_p(params)
    if params.is_supercritical:
        tail = 1e-12 if tail is None else tail
        k = 2 * params.p / (params.p - 2)
        # v_star^p <= 2^k exp(-k |x|)
        radius = ((k + 1) * math.log(2) - math.log(k) - log_zeta - math.log(tail)) / k
    else:
        tail = 1e-10 if tail is None else tail
        k = -params.weight_exponent
        y_max = (2 / ((2 * k - 1) * math.exp(log_zeta) * tail)) ** (1 / (2 * k - 1))
        radius = math.atan(y_max)
    return WeightedGrid.uniform(-radius, radius, size)


def line_initial(profile: Callable, params: GNParams, grid: WeightedGrid,
                 normalize: bool = True) -> GridFunction:
    """v = v_star f(tanh x) for p > 2 or v_star f(tan x) for 1 < p < 2.

    Args:
        profile: Vectorized f in the ultraspherical variable.
        params: GNParams.
        grid: Lebesgue grid in the line variable, usually from line_grid.
        normalize: Rescale v so that |v|_p = optimizer_norm(params, Frame.LineV),
            the line counterpart of |f|_p = 1. Default: True.
    """
    x = grid.nodes
    s = np.tanh(x) if params.is_supercritical else np.tan(x)
    v = GridFunction(grid, np.exp(log_v_star(x, params)) * profile(s), True)
    if normalize:
        v = normalize_lp(v, optimizer_norm(params, Frame.LineV), params.p)
    return v


class FlowConfig:
    """Settings of a flow run.

    Args:
        params: GNParams.
        frame: A Frame.
        grid: WeightedGrid matching the frame.
        t_end: Final time.
        output_stride: Record a trace row every output_stride accepted steps of the
            explicit stepper. Default: 10.
        norm_target: Required value of |f|_p at t = 0. Set it to optimizer_norm(...)
            so that the Lyapunov functional vanishes on the optimizer. Default: None.
        atol: Absolute step tolerance. Default: 1e-8.
        rtol: Relative step tolerance. Default: 1e-8.
        dt0: First trial step. Default: 1e-4.
        implicit: Integrate with the BDF method of solve_ivp instead of RKF45. The
            line frame is stiff like cosh(R)^2 / h^2, so this defaults to True for
            LineV and False for UltraF.
        output_points: Number of equally spaced output times of implicit runs,
            t = 0 included. Default: 201.
    """

    def __init__(self, params: GNParams, frame: Frame, grid: WeightedGrid,
                 t_end: float, output_stride: int = 10, norm_target: float = None,
                 atol: float = 1e-8, rtol: float = 1e-8, dt0: float = 1e-4,
                 implicit: bool = None, output_points: int = 201) -> None:
        if not t_end > 0:
            raise DomainError(f't_end must be positive. Got {t_end}.')
        if output_stride < 1:
            raise DomainError(f'output_stride must be at least 1. Got {output_stride}.')
        if output_points < 3:
            raise DomainError(f'output_points must be at least 3. Got {output_points}.')
        if frame is Frame.UltraF:
            _check_ultra_grid(grid, params)
        elif grid.measure is not Measure.Lebesgue:
            raise DomainError('The line frame runs on a Lebesgue grid.')
        self.params = params
        self.frame = frame
        self.grid = grid
        self.t_end = float(t_end)
        self.output_stride = int(output_stride)
        self.norm_target = norm_target
        self.atol = atol
        self.rtol = rtol
        self.dt0 = dt0
        self.implicit = frame is Frame.LineV if implicit is None else bool(implicit)
        self.output_points = int(output_points)

    def __repr__(self) -> str:
        method = 'bdf' if self.implicit else 'rkf45'
        return (f'FlowConfig: p={self.params.p} | {self.frame.value} | '
                f'n={self.grid.size} | t_end={self.t_end} | {method}')


def _frame_operators(cfg: FlowConfig):
    params = cfg.params
    if cfg.frame is Frame.UltraF:
        return (lambda s: rhs_ultra(s, params),
                lambda s: lyapunov_ultra(s, params).value,
                lambda s: ultra_dissipation(s, params))
    return (lambda s: rhs_line(s, params),
            lambda s: lyapunov_line(s, params).value,
            lambda s: line_dissipation(s, params))


def _note_increase(trace: FlowTrace, previous: float, value: float) -> None:
    increase = value - previous
    if increase > 1e-7 * (1 + abs(previous)):
        trace.monotone_violations += 1
    trace.max_increase = max(trace.max_increase, increase)


def _integrate_explicit(cfg: FlowConfig, state: GridFunction, rhs, lyapunov, record,
                        trace: FlowTrace) -> dict:
    stepper = RKF45(atol=cfg.atol, rtol=cfg.rtol)
    t, dt, steps = 0.0, cfg.dt0, 0
    previous = lyapunov(state)
    record(t, state, previous, 0)
    try:
        while t < cfg.t_end * (1 - 1e-14):
            state = stepper.step(state, rhs, min(dt, cfg.t_end - t))
            t += stepper.dt_taken
            dt = stepper.dt_next
            steps += 1
            value = lyapunov(state)
            _note_increase(trace, previous, value)
            previous = value
            if steps % cfg.output_stride == 0 or t >= cfg.t_end * (1 - 1e-14):
                record(t, state, value, stepper.clamp_events)
    except StepFailure as err:
        trace.fill_time_derivative('lyapunov', 'dissipation_lhs')
        raise StepFailure(str(err), trace) from err
    return {'steps': steps, 'rejected': stepper.rejected}


def _integrate_implicit(cfg: FlowConfig, state: GridFunction, rhs, lyapunov, record,
                        trace: FlowTrace) -> dict:
    grid = cfg.grid
    pattern = abs(grid.diff_matrix(1)) + abs(grid.diff_matrix(2)) \
        + sparse.identity(grid.size, format='csr')
    times = np.linspace(0.0, cfg.t_end, cfg.output_points)

    def fun(_, y):
        return rhs(GridFunction(grid, y)).values

    previous = lyapunov(state)
    record(0.0, state, previous, 0)
    solution = solve_ivp(fun, (0.0, cfg.t_end), np.array(state.values), method='BDF',
                         t_eval=times[1:], rtol=cfg.rtol, atol=cfg.atol,
                         first_step=cfg.dt0, jac_sparsity=pattern != 0)
    for t, y in zip(solution.t, solution.y.T):
        current = GridFunction(grid, y)
        value = lyapunov(current)
        # monotonicity is only observed at the output times
        _note_increase(trace, previous, value)
        previous = value
        record(float(t), current, value, 0)
    if solution.status != 0:
        trace.fill_time_derivative('lyapunov', 'dissipation_lhs')
        raise StepFailure(f'BDF stopped before t_end: {solution.message}', trace)
    return {'steps': int(solution.t.size), 'rhs_evaluations': int(solution.nfev),
            'lu_decompositions': int(solution.nlu)}


def run_flow(cfg: FlowConfig, initial: GridFunction) -> FlowTrace:
    """Run a flow and record the Lyapunov functional and both sides of its
    dissipation identity.

    Explicit runs evaluate the Lyapunov functional after every accepted step,
    implicit runs at every output time. Increases beyond 1e-7 (1 + |F|) are counted
    in ``trace.monotone_violations``.

    Raises:
        StepFailure: With the partial trace attached.
    """
    if initial.grid is not cfg.grid:
        raise DomainError('The initial datum must live on the configured grid.')
    if not np.all(initial.values > 0):
        raise DomainError('Flows need a strictly positive initial datum.')
    p = cfg.params.p
    if cfg.norm_target is not None:
        norm = cfg.grid.integrate(initial.values ** p) ** (1 / p)
        if abs(norm - cfg.norm_target) > 1e-8:
            raise DomainError(
                f'Initial |f|_p = {norm:.12g} does not match the target '
                f'{cfg.norm_target:.12g}. Use normalize_lp first.')
    rhs, lyapunov, dissipation = _frame_operators(cfg)
    trace = FlowTrace(FLOW_COLUMNS)
    state = initial.with_values(initial.values, strictly_positive=True)

    def record(t, s, value, clamp_events):
        trace.append({
            't': t, 'lyapunov': value, 'dissipation_rhs': dissipation(s),
            'conserved_norm': cfg.grid.integrate(np.abs(s.values) ** p) ** (1 / p),
            'min_value': float(np.min(s.values)), 'clamp_events': clamp_events
        })

    integrate = _integrate_implicit if cfg.implicit else _integrate_explicit
    info = integrate(cfg, state, rhs, lyapunov, record, trace)
    trace.fill_time_derivative('lyapunov', 'dissipation_lhs')
    trace.metadata.update(info, frame=cfg.frame.value, radius=float(cfg.grid.nodes[-1]))
    logger.info(
        'Flow p=%g %s: %d steps, F(t_end)=%.3e, %d monotonicity violations.', p,
        cfg.frame.value, info['steps'], trace.column('lyapunov')[-1],
        trace.monotone_violations)
    return trace


def manifold_profile(a: float, b: float, grid: WeightedGrid,
                     params: GNParams) -> GridFunction:
    """(a + b z)^(-2/(p-2)), a zero of the ultraspherical Lyapunov functional."""
    if not a > abs(b):
        raise DomainError(f'(a + b z) must stay positive on (-1, 1): a={a}, b={b}.')
    values = (a + b * grid.nodes) ** (-params.weight_exponent)
    return GridFunction(grid, values, strictly_positive=True)


class ManifoldTrajectory(NamedTuple):
    t: np.ndarray
    a: np.ndarray
    b: np.ndarray


def manifold_ode(a0: float, b0: float, params: GNParams, t_end: float,
                 t_eval: np.ndarray = None) -> ManifoldTrajectory:
    """Integrate a' = -c b^2, b' = -c a b with c = 2p / (p - 2).

    a^2 - b^2 is conserved and b decays monotonically to 0.
    """
    if not params.is_supercritical:
        raise DomainError('The constant energy manifold is attached to p > 2.')
    if not a0 > abs(b0):
        raise DomainError(f'Need a0 > |b0|. Got a0={a0}, b0={b0}.')
    c = params.drift_coefficient

    def rhs(_, y):
        return [-c * y[1] ** 2, -c * y[0] * y[1]]

    solution = solve_ivp(rhs, (0.0, t_end), [a0, b0], method='DOP853', rtol=1e-12,
                         atol=1e-14, t_eval=t_eval)
    return ManifoldTrajectory(solution.t, solution.y[0], solution.y[1])


def manifold_closed_form(a0: float, b0: float, params: GNParams, t: np.ndarray):
    """Exact (a, b) at times t, from tanh(s/2) = tanh(s0/2) exp(-c K t).

    a = K cosh s and b = K sinh s with K^2 = a0^2 - b0^2.
    """
    c = params.drift_coefficient
    k = math.sqrt(a0 ** 2 - b0 ** 2)
    s0 = math.asinh(b0 / k)
    s = 2 * np.arctanh(math.tanh(s0 / 2) * np.exp(-c * k * np.asarray(t)))
    return k * np.cosh(s), k * np.sinh(s)


def rhs_u(u: GridFunction, params: GNParams, beta: float, kappa: float) -> GridFunction:
    """u_t = u^(2-2 beta) (L u + kappa nu |u'|^2 / u) in flux form.

    Written as u^(2-2 beta-kappa) (1/w) (w nu u^kappa u')'.
    """
    values = _positive(u.values)
    mobility = _face_mean(values ** kappa)
    div = u.grid.flux_divergence(values, mobility=mobility)
    return GridFunction(u.grid, values ** (2 - 2 * beta - kappa) * div)


def generalized_flow_u(params: GNParams, initial: GridFunction, t_end: float,
                       beta: float = None, kappa: float = None,
                       output_stride: int = 10, atol: float = 1e-8,
                       rtol: float = 1e-8) -> FlowTrace:
    """Run the flow of u with f = u^beta and track the identities attached to it.

    With kappa = beta (p - 2) + 1 the integral of u^(beta p) is conserved, and with
    beta = 4 / (6 - p) the functional int |(u^beta)'|^2 nu + c (u^(2 beta) - u_bar^(2 beta))
    decays at the rate 2 beta^2 int |u'' - (p+2)/(6-p) |u'|^2 / u|^2 nu^2.

    Args:
        params: GNParams with p != 6.
        initial: Positive GridFunction on the NuP (p > 2) or XiP (p < 2) grid.
        t_end: Final time.
        beta: Defaults to 4 / (6 - p).
        kappa: Defaults to beta (p - 2) + 1.
    """
    if params.p == 6:
        raise DomainError(
            'beta = 4 / (6 - p) is singular at p = 6. Run the f-form flow with '
            'run_flow instead.')
    _check_ultra_grid(initial.grid, params)
    if not np.all(initial.values > 0):
        raise DomainError('The u-flow needs a strictly positive initial datum.')
    p = params.p
    beta = params.beta if beta is None else beta
    kappa = beta * (p - 2) + 1 if kappa is None else kappa
    grid = initial.grid
    coefficient = (p + 2) / (6 - p)
    mismatch = kappa - beta * (p - 2) - 1

    def row(t, s):
        values = _positive(s.values)
        du = grid.differentiate(values, 1)
        d2u = grid.differentiate(values, 2)
        nu = grid.diffusivity
        power = grid.integrate(values ** (beta * p))
        functional = lyapunov_ultra(s.with_values(values ** beta), params).value
        square = (d2u - coefficient * du ** 2 / values) ** 2
        return {
            't': t, 'functional': functional,
            'dissipation_rhs': 2 * beta ** 2 * grid.integrate(square * nu ** 2),
            'u_bar': power ** (1 / (beta * p)), 'power_integral': power,
            'power_rate_rhs': beta * p * mismatch * grid.integrate(
                values ** (beta * (p - 2)) * du ** 2 * nu),
            'min_value': float(np.min(values)), 'clamp_events': stepper.clamp_events
        }

    stepper = RKF45(atol=atol, rtol=rtol)
    trace = FlowTrace(U_FLOW_COLUMNS)
    state = initial.with_values(initial.values, strictly_positive=True)
    t, dt, steps = 0.0, 1e-4, 0
    trace.append(row(t, state))
    try:
        while t < t_end * (1 - 1e-14):
            state = stepper.step(
                state, lambda s: rhs_u(s, params, beta, kappa), min(dt, t_end - t))
            t += stepper.dt_taken
            dt = stepper.dt_next
            steps += 1
            if steps % output_stride == 0 or t >= t_end * (1 - 1e-14):
                trace.append(row(t, state))
    except StepFailure as err:
        raise StepFailure(str(err), trace) from err
    trace.fill_time_derivative('functional', 'dissipation_lhs')
    trace.fill_time_derivative('power_integral', 'power_rate_lhs', sign=1.0)
    trace.metadata.update({'beta': beta, 'kappa': kappa, 'steps': steps})
    logger.info('u-flow p=%g beta=%g kappa=%g: %d steps.', p, beta, kappa, steps)
    return trace
