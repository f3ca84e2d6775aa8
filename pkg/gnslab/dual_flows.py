"""Flows on the dual side: fast diffusion in self-similar variables, the heat flow
and the gradient flow of the p/2 entropy."""

import enum
import logging
import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy.integrate import trapezoid

from .closed_forms import barenblatt_coefficient, barenblatt_mass_constant
from .constants import GNParams, log_c_gn
from .errors import DomainError, StepFailure
from .functionals import action, dual_quotient, entropy_f1, f1_scaling_optimum
from .grid import GridFunction, Measure, WeightedGrid
from .stepper import RKF45
from .trace import FlowTrace

logger = logging.getLogger(__name__)

FD_COLUMNS = ('t', 'entropy', 'scaling_optimum', 'mass', 'second_moment',
              'l1_distance', 'sigma', 'dual_quotient', 'min_value', 'clamp_events')
HEAT_COLUMNS = ('t', 'entropy', 'production', 'bound', 'entropy_rate', 'action_rate',
                'mass', 'boundary_flux')
RHO_COLUMNS = ('t', 'entropy', 'dissipation_lhs', 'dissipation_rhs', 'mass',
               'min_value', 'clamp_events')
FLOOR = 1e-300


class FDMode(enum.Enum):
    SelfSimilar = 'self-similar'  # dG/dt = (G^m)'' + (y G)'
    SigmaConstrained = 'sigma-constrained'  # sigma(t) (G^m)'' + (y G)', moment frozen


def gn_exponent_link(m: float) -> tuple:
    """Exponents of the GNS inequality that sets the growth rate of the dual quotient.

    Returns:
        (a, 2a) with a = 1 / (2m - 1). Requires 1/2 < m < 1.
    """
    if not 0.5 < m < 1:
        raise DomainError(f'The exponent link needs 1/2 < m < 1. Got {m}.')
    a = 1 / (2 * m - 1)
    return a, 2 * a


class FDConfig:
    """Settings of a fast diffusion run.

    Args:
        m: Exponent in (0, 1). SigmaConstrained runs need m in (1/2, 1).
        mode: An FDMode.
        grid: Truncated Lebesgue grid. Fluxes vanish through both ends.
        mass: Mass of the initial datum.
        t_end: Final time.
        params: Optional GNParams with params.m_fd == m. The dual quotient of the
            duality theorem is then recorded along the run.
        output_stride: Record a row every output_stride accepted steps. Default: 20.
        atol: Absolute step tolerance. Default: 1e-9.
        rtol: Relative step tolerance. Default: 1e-8.
    """

    def __init__(self, m: float, mode: FDMode, grid: WeightedGrid, mass: float,
                 t_end: float, params: GNParams = None, output_stride: int = 20,
                 atol: float = 1e-9, rtol: float = 1e-8) -> None:
        barenblatt_coefficient(m)
        if mode is FDMode.SigmaConstrained and not 0.5 < m < 1:
            raise DomainError(
                f'The second-moment constrained flow needs 1/2 < m < 1. Got {m}.')
        if grid.measure is not Measure.Lebesgue:
            raise DomainError('Fast diffusion runs on a Lebesgue grid.')
        if params is not None and abs(params.m_fd - m) > 1e-12:
            raise DomainError(
                f'm = {m} is not the fast diffusion exponent {params.m_fd} of p = '
                f'{params.p}.')
        if not t_end > 0:
            raise DomainError(f't_end must be positive. Got {t_end}.')
        self.m = float(m)
        self.mode = mode
        self.grid = grid
        self.mass = float(mass)
        self.t_end = float(t_end)
        self.params = params
        self.output_stride = output_stride
        self.atol = atol
        self.rtol = rtol

    def __repr__(self) -> str:
        return f'FDConfig: m={self.m} | {self.mode.value} | n={self.grid.size}'


def _second_moment(G: GridFunction) -> float:
    return G.grid.integrate(G.values * G.grid.nodes ** 2)


def sigma_of(G: GridFunction, m: float) -> float:
    """The diffusion factor that freezes the second moment: int G y^2 / int G^m."""
    barenblatt_coefficient(m)
    values = np.maximum(G.values, 0.0)
    power = G.grid.integrate(values ** m)
    if not power > 0:
        raise DomainError('sigma_of needs a density that is not identically 0.')
    return _second_moment(G) / power


def _potential_parts(values: np.ndarray, nodes: np.ndarray, m: float):
    """Pressure m/(m-1) G^(m-1) and confinement y^2 / 2 of the flux G (P + y^2/2)'."""
    logs = np.log(np.maximum(values, FLOOR))
    return m / (m - 1) * np.exp((m - 1) * logs), 0.5 * nodes ** 2


def fd_rhs(G: GridFunction, m: float, sigma: float = 1.0) -> np.ndarray:
    """sigma (G^m)'' + (y G)' as a conservative flux difference with zero end fluxes.

    The flux is G (sigma P + y^2/2)' with P = m/(m-1) G^(m-1), and G at the faces is
    the mean of the two nodes. The Barenblatt profile with sigma = 1 is an exact
    discrete equilibrium.
    """
    grid = G.grid
    values = np.maximum(G.values, 0.0)
    pressure, confinement = _potential_parts(values, grid.nodes, m)
    mobility = 0.5 * (values[1:] + values[:-1])
    ones = np.ones(grid.size - 1)
    return grid.flux_divergence(sigma * pressure + confinement, mobility=mobility,
                                coefficients=ones)


def moment_freezing_sigma(G: GridFunction, m: float, dt: float = 1e-6) -> float:
    """The sigma for which one explicit Euler step keeps int G y^2 unchanged.

    The moment change is affine in sigma, so two trial steps determine it.
    """
    y2 = G.grid.nodes ** 2
    start = _second_moment(G)
    rates = []
    for sigma in (0.0, 1.0):
        stepped = G.values + dt * fd_rhs(G, m, sigma)
        rates.append((G.grid.integrate(stepped * y2) - start) / dt)
    slope = rates[1] - rates[0]
    if slope == 0:
        raise DomainError('The diffusion term does not move the second moment.')
    return -rates[0] / slope


def _discrete_sigma(G: GridFunction, m: float) -> float:
    """Exact zero of the discrete moment rate, affine in sigma."""
    y2 = G.grid.nodes ** 2
    base = G.grid.integrate(fd_rhs(G, m, 0.0) * y2)
    slope = G.grid.integrate(fd_rhs(G, m, 1.0) * y2) - base
    return -base / slope


def run_fd(cfg: FDConfig, initial: GridFunction) -> FlowTrace:
    """Run the fast diffusion equation and record the generalized entropy.

    Rows hold F1, its scaling optimum, mass, second moment, the L1 distance to the
    Barenblatt profile of the same mass on the grid and sigma. F1 increases between
    accepted steps are counted in ``trace.monotone_violations``.
    """
    if initial.grid is not cfg.grid:
        raise DomainError('The initial datum must live on the configured grid.')
    if np.any(initial.values < 0):
        raise DomainError('Fast diffusion needs a non-negative initial datum.')
    mass = cfg.grid.integrate(initial.values)
    if abs(mass - cfg.mass) > 1e-6 * cfg.mass:
        raise DomainError(f'Initial mass {mass:.10g} differs from {cfg.mass:.10g}.')
    m = cfg.m
    grid = cfg.grid
    constant = barenblatt_mass_constant(m, cfg.mass, grid)
    target = (constant + barenblatt_coefficient(m) * grid.nodes ** 2) ** (1 / (m - 1))
    constrained = cfg.mode is FDMode.SigmaConstrained

    def sigma_for(state):
        return _discrete_sigma(state, m) if constrained else 1.0

    def rhs(state):
        return fd_rhs(state, m, sigma_for(state))

    stepper = RKF45(atol=cfg.atol, rtol=cfg.rtol)
    trace = FlowTrace(FD_COLUMNS)

    def record(t, state, value):
        row = {
            't': t, 'entropy': value, 'scaling_optimum': f1_scaling_optimum(state, m),
            'mass': grid.integrate(state.values), 'second_moment': _second_moment(state),
            'l1_distance': grid.integrate(np.abs(state.values - target)),
            'sigma': sigma_for(state), 'min_value': float(np.min(state.values)),
            'clamp_events': stepper.clamp_events
        }
        if cfg.params is not None:
            row['dual_quotient'] = dual_quotient(state, cfg.params).value
        trace.append(row)

    state = initial.with_values(initial.values,
                                strictly_positive=bool(np.all(initial.values > 0)))
    t, dt, steps = 0.0, 1e-4, 0
    previous = entropy_f1(state, m).value
    record(t, state, previous)
    try:
        while t < cfg.t_end * (1 - 1e-14):
            state = stepper.step(state, rhs, min(dt, cfg.t_end - t))
            t += stepper.dt_taken
            dt = stepper.dt_next
            steps += 1
            value = entropy_f1(state, m).value
            if value - previous > 1e-9 * (1 + abs(previous)):
                trace.monotone_violations += 1
            trace.max_increase = max(trace.max_increase, value - previous)
            previous = value
            if steps % cfg.output_stride == 0 or t >= cfg.t_end * (1 - 1e-14):
                record(t, state, value)
    except StepFailure as err:
        raise StepFailure(str(err), trace) from err
    trace.metadata.update({'steps': steps, 'mode': cfg.mode.value, 'm': m,
                           'barenblatt_constant': constant})
    logger.info('Fast diffusion m=%g %s: %d steps, F1(t_end)=%.10g.', m,
                cfg.mode.value, steps, previous)
    return trace


def gradient_flow_action(rho: GridFunction, q: float) -> float:
    """q (q - 1) A_alpha[rho, -rho'] with alpha = 2 - q.

    Along the heat flow this equals -d/dt int rho^q.
    """
    slope = rho.grid.differentiate(rho.values, 1)
    flux = GridFunction(rho.grid, -slope)
    return q * (q - 1) * action(rho, flux, 2 - q).value


def heat_decay_bound(entropy: float, mass: float, q: float) -> float:
    """Lower bound of -d/dt int rho^q from the GNS inequality with p = 2 / q.

    With f = rho^(q/2) and eta = (2 - p) / (2 + p),
    4 (q-1)/q int |f'|^2 >= 4 (q-1)/q C^(2/eta) (int rho^q)^(1/eta) M^(-2 (1-eta) / (p eta))
    where C is the infimum of |f'|^eta |f|_p^(1-eta) / |f|_2.
    """
    p = 2 / q
    params = GNParams(p)
    eta = params.eta
    log_bound = math.log(4 * (q - 1) / q) + 2 / eta * log_c_gn(params) \
        + math.log(entropy) / eta - 2 * (1 - eta) / (p * eta) * math.log(mass)
    return math.exp(log_bound)


def heat_rhs(rho: GridFunction) -> np.ndarray:
    """rho'' in conservative form with zero flux through both ends of the grid."""
    ones = np.ones(rho.grid.size - 1)
    return rho.grid.flux_divergence(rho.values, coefficients=ones, high_order=True)


def boundary_flux(rho: GridFunction) -> float:
    """|rho'(-R)| + |rho'(R)|, the rate at which mass would leave [-R, R] on the line."""
    slope = rho.grid.differentiate(rho.values, 1)
    return float(abs(slope[0]) + abs(slope[-1]))


def heat_entropy_production(rho0: GridFunction, q: float, t_end: float,
                            output_stride: int = 5, atol: float = 1e-10,
                            rtol: float = 1e-10) -> FlowTrace:
    """Run the heat flow and record int rho^q with its production.

    Columns are the entropy int rho^q, the production 4 (q-1)/q int |(rho^(q/2))'|^2,
    the GNS lower bound of the production, the finite difference rate
    -d/dt int rho^q, the same rate written as an action, the mass and the boundary
    flux. The grid is closed by zero end fluxes so the mass is conserved. The mass the
    flow on the line would have lost through the ends is integrated from the boundary
    flux and recorded as ``leakage`` in the metadata.

    Args:
        rho0: Strictly positive initial density on a Lebesgue grid.
        q: Exponent in (1, 2).
        t_end: Final time.
    """
    if not 1 < q < 2:
        raise DomainError(f'The entropy exponent q must be in (1, 2). Got {q}.')
    if rho0.grid.measure is not Measure.Lebesgue:
        raise DomainError('The heat flow runs on a Lebesgue grid.')
    if not np.all(rho0.values > 0):
        raise DomainError('The heat flow needs a strictly positive initial density.')
    grid = rho0.grid
    mass = grid.integrate(rho0.values)

    def record(t, state):
        values = np.maximum(state.values, FLOOR)
        entropy = grid.integrate(values ** q)
        half = grid.differentiate(values ** (q / 2), 1)
        trace.append({
            't': t, 'entropy': entropy,
            'production': 4 * (q - 1) / q * grid.integrate(half ** 2),
            'bound': heat_decay_bound(entropy, mass, q),
            'action_rate': gradient_flow_action(state.with_values(values), q),
            'mass': grid.integrate(state.values),
            'boundary_flux': boundary_flux(state)
        })

    stepper = RKF45(atol=atol, rtol=rtol)
    trace = FlowTrace(HEAT_COLUMNS)
    state = rho0.with_values(rho0.values, strictly_positive=True)
    t, dt, steps = 0.0, 1e-4, 0
    record(t, state)
    try:
        while t < t_end * (1 - 1e-14):
            state = stepper.step(state, heat_rhs, min(dt, t_end - t))
            t += stepper.dt_taken
            dt = stepper.dt_next
            steps += 1
            if steps % output_stride == 0 or t >= t_end * (1 - 1e-14):
                record(t, state)
    except StepFailure as err:
        raise StepFailure(str(err), trace) from err
    trace.fill_time_derivative('entropy', 'entropy_rate')
    leakage = float(trapezoid(trace.column('boundary_flux'), trace.column('t')))
    trace.metadata.update({'q': q, 'steps': steps, 'radius': float(grid.nodes[-1]),
                           'leakage': leakage, 'leakage_rel': leakage / mass})
    logger.info('Heat flow q=%g: %d steps to t=%g, tail leakage %.3e.', q, steps, t,
                leakage)
    return trace


def gaussian_heat_entropy(t: np.ndarray, q: float, mass: float = 1.0,
                          variance: float = 1.0) -> np.ndarray:
    """int rho^q along the heat flow from a Gaussian: q^(-1/2) (2 pi s)^((1-q)/2) M^q
    with s = variance + 2t."""
    s = variance + 2 * np.asarray(t, dtype=float)
    return q ** -0.5 * (2 * math.pi * s) ** ((1 - q) / 2) * mass ** q


class RhoFlowCheck(NamedTuple):
    exponent: float  # 2 - p/2
    alpha: float  # 3 - p
    mass_condition: bool  # 2 - p/2 > 1 - 1/d with d = 1


def rho_flow_check(params: GNParams) -> RhoFlowCheck:
    """Validate the exponent of the gradient flow d rho/dt = (rho^(2-p/2))''."""
    p = params.p
    if not 2 < p < 3:
        raise DomainError(
            f'The gradient flow of int rho^(p/2) needs 2 < p < 3 so that the action '
            f'with alpha = 3 - p is convex. Got p = {p}.')
    exponent = 2 - p / 2
    mass_condition = exponent > 0
    if not mass_condition:
        warnings.warn(f'Mass conservation fails for the exponent {exponent}.')
    return RhoFlowCheck(exponent, 3 - p, mass_condition)


def rho_rhs(rho: GridFunction, params: GNParams) -> np.ndarray:
    """(rho^(2-p/2))'' as ((2-p/2) rho^(1-p/2) rho')' with zero end fluxes."""
    p = params.p
    values = np.maximum(rho.values, FLOOR)
    mobility = (2 - p / 2) * 0.5 * (values[1:] ** (1 - p / 2)
                                    + values[:-1] ** (1 - p / 2))
    ones = np.ones(rho.grid.size - 1)
    return rho.grid.flux_divergence(values, mobility=mobility, coefficients=ones)


def run_rho_flow(params: GNParams, rho0: GridFunction, t_end: float,
                 output_stride: int = 10, atol: float = 1e-10,
                 rtol: float = 1e-9) -> FlowTrace:
    """Run d rho/dt = (rho^(2-p/2))'' for 2 < p < 3.

    Records int rho^(p/2) with both sides of
    d/dt int rho^(p/2) = -p (p-2) (4-p) / 8 int |rho'|^2 / rho.
    The entropy is evaluated after every accepted step. Increases beyond
    1e-10 (1 + |E|) are counted in ``trace.monotone_violations``.
    """
    check = rho_flow_check(params)
    if rho0.grid.measure is not Measure.Lebesgue:
        raise DomainError('The gradient flow runs on a Lebesgue grid.')
    if not np.all(rho0.values > 0):
        raise DomainError('The gradient flow needs a strictly positive density.')
    p = params.p
    grid = rho0.grid
    factor = p * (p - 2) * (4 - p) / 8

    def record(t, state):
        values = np.maximum(state.values, FLOOR)
        slope = grid.differentiate(values, 1)
        trace.append({
            't': t, 'entropy': grid.integrate(values ** (p / 2)),
            'dissipation_rhs': factor * grid.integrate(slope ** 2 / values),
            'mass': grid.integrate(state.values), 'min_value': float(np.min(values)),
            'clamp_events': stepper.clamp_events
        })

    stepper = RKF45(atol=atol, rtol=rtol)
    trace = FlowTrace(RHO_COLUMNS)
    state = rho0.with_values(rho0.values, strictly_positive=True)
    t, dt, steps = 0.0, 1e-5, 0
    record(t, state)
    previous = trace.column('entropy')[0]
    try:
        while t < t_end * (1 - 1e-14):
            state = stepper.step(state, lambda s: rho_rhs(s, params),
                                 min(dt, t_end - t))
            t += stepper.dt_taken
            dt = stepper.dt_next
            steps += 1
            entropy = grid.integrate(np.maximum(state.values, FLOOR) ** (p / 2))
            if entropy - previous > 1e-10 * (1 + abs(previous)):
                trace.monotone_violations += 1
            trace.max_increase = max(trace.max_increase, entropy - previous)
            previous = entropy
            if steps % output_stride == 0 or t >= t_end * (1 - 1e-14):
                record(t, state)
    except StepFailure as err:
        raise StepFailure(str(err), trace) from err
    trace.fill_time_derivative('entropy', 'dissipation_lhs')
    trace.metadata.update({'steps': steps, 'alpha': check.alpha,
                           'mass_condition': check.mass_condition})
    logger.info('Gradient flow p=%g: %d steps to t=%g.', p, steps, t)
    return trace
