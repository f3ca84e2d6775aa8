"""Transport plans, the inequality chain behind the duality theorem and numerical
solvers for its primal infimum and dual supremum."""

import logging
import math
import warnings
from typing import Callable, List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize
from scipy.sparse.linalg import splu
from scipy.special import xlogy

from .closed_forms import Optimizer, OptimizerKind, fit_symmetries
from .constants import (GNParams, h_of_q, log_c1_or_c2, log_c_p,
                        log_sobolev_estimates, log_sobolev_limits)
from .errors import ConvergenceWarning, DomainError
from .functionals import dual_exponents, primal_exponents
from .grid import GridFunction, Measure, WeightedGrid
from .schema import DualityReport

logger = logging.getLogger(__name__)

PUSHFORWARD_TESTS: Tuple[Callable[[np.ndarray], np.ndarray], ...] = (
    lambda y: 1 / (1 + y ** 2),
    lambda y: np.tanh(y / 2),
    lambda y: np.exp(-y ** 2 / 4),
    lambda y: y / (1 + y ** 2),
    lambda y: np.cos(y) / (1 + y ** 2 / 4),
)


def _check_density(f: GridFunction, name: str) -> float:
    if f.grid.measure is not Measure.Lebesgue:
        raise DomainError(f'{name} must live on a Lebesgue grid. Got {f.grid.measure.value}.')
    if np.any(f.values < 0):
        raise DomainError(f'{name} must be non-negative.')
    mass = f.grid.integrate(f.values)
    if not mass > 0:
        raise DomainError(f'{name} has zero mass.')
    return mass


def _cumulative(f: GridFunction) -> np.ndarray:
    """Cumulative trapezoid in the grid index. The last entry is the grid quadrature."""
    step = f.grid.lebesgue_weights.copy()
    step[0] *= 2
    step[-1] *= 2
    return cumulative_trapezoid(f.values * step, initial=0.0)


class TransportPlan:
    """Monotone map pushing the density F forward to G.

    Args:
        source: Unit mass source density F.
        target: Unit mass target density G.
        map_derivative: Values of the monotone map at the nodes of the source grid.
        map_second: Derivative of the monotone map at the same nodes.
    """

    def __init__(self, source: GridFunction, target: GridFunction,
                 map_derivative: GridFunction, map_second: GridFunction) -> None:
        assert map_derivative.grid is source.grid and map_second.grid is source.grid, \
            'The map must be sampled on the source grid.'
        assert np.all(np.diff(map_derivative.values) >= 0), \
            'The transport map must be non-decreasing.'
        self._source = source
        self._target = target
        self._map_derivative = map_derivative
        self._map_second = map_second

    @property
    def source(self) -> GridFunction:
        return self._source

    @property
    def target(self) -> GridFunction:
        return self._target

    @property
    def map_derivative(self) -> GridFunction:
        return self._map_derivative

    @property
    def map_second(self) -> GridFunction:
        return self._map_second

    def pushforward_errors(self, tests: Sequence[Callable] = PUSHFORWARD_TESTS
                           ) -> List[float]:
        """|int test(phi'(x)) F(x) dx - int test(y) G(y) dy| for each test function."""
        x_side = self._source.grid
        y_side = self._target.grid
        phi = self._map_derivative.values
        return [
            abs(x_side.integrate(test(phi) * self._source.values)
                - y_side.integrate(test(y_side.nodes) * self._target.values))
            for test in tests
        ]

    def pushforward_check(self, tolerance: float = 1e-4) -> bool:
        return max(self.pushforward_errors()) <= tolerance

    def __repr__(self) -> str:
        return (f'TransportPlan: {self._source.grid.size} source nodes -> '
                f'{self._target.grid.size} target nodes')


def build_transport(F: GridFunction, G: GridFunction) -> TransportPlan:
    """Build the monotone coupling phi' = Q_G o CDF_F between two densities.

    Both densities are rescaled to unit mass. CDFs come from the cumulative trapezoid
    rule and the quantile function of G is a monotone cubic interpolant, so phi' is
    non-decreasing at the nodes and phi'' = Q_G'(CDF_F) F is non-negative.

    Args:
        F: Source density on a Lebesgue grid.
        G: Target density on a Lebesgue grid.
    """
    mass_f = _check_density(F, 'F')
    mass_g = _check_density(G, 'G')
    source = F.with_values(F.values / mass_f)
    target = G.with_values(G.values / mass_g)
    cdf_f = np.clip(_cumulative(source), 0.0, 1.0)
    cdf_g = _cumulative(target)
    cdf_g = cdf_g / cdf_g[-1]
    keep = np.concatenate([[True], np.diff(cdf_g) > 0])
    quantile = PchipInterpolator(cdf_g[keep], target.grid.nodes[keep], extrapolate=True)
    derivative = quantile.derivative()
    phi = np.maximum.accumulate(quantile(cdf_f))
    second = np.maximum(derivative(cdf_f) * source.values, 0.0)
    return TransportPlan(source, target, GridFunction(source.grid, phi),
                         GridFunction(source.grid, second))


class ChainExponents(NamedTuple):
    """Exponents of the transport chain for one p.

    f = F^k, theta is the Holder split, holder = the power of F in the first Holder
    factor, r = 1/2 + k and alpha the companion exponent.
    """
    theta: float
    alpha: float
    k: float
    r: float
    holder: float


def chain_exponents(params: GNParams) -> ChainExponents:
    p = params.p
    if params.is_supercritical:
        theta = (p + 2) / (3 * p - 2)
        alpha = (p - 2) * (p + 2) / (p * (3 * p - 2))
        k = 1 / p
        holder = 2 / p
    else:
        theta = 2 / (4 - p)
        alpha = 1 - theta
        k = 0.5
        holder = p / 2
    return ChainExponents(theta, alpha, k, 0.5 + k, holder)


class ChainStep(NamedTuple):
    """One step of the chain. slack = (rhs - lhs) / |rhs|."""
    name: str
    is_equality: bool
    lhs: float
    rhs: float
    slack: float


def _step(name: str, is_equality: bool, lhs: float, rhs: float) -> ChainStep:
    return ChainStep(name, is_equality, lhs, rhs, (rhs - lhs) / max(abs(rhs), 1e-300))


class ChainReport(NamedTuple):
    p: float
    exponents: ChainExponents
    steps: List[ChainStep]

    def step(self, name: str) -> ChainStep:
        for s in self.steps:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def min_inequality_slack(self) -> float:
        return min(s.slack for s in self.steps if not s.is_equality)

    @property
    def max_equality_mismatch(self) -> float:
        return max(abs(s.slack) for s in self.steps if s.is_equality)

    def holds(self, slack_tolerance: float = 1e-7, equality_tolerance: float = 1e-4
              ) -> bool:
        """Inequalities hold up to slack_tolerance and equalities up to
        equality_tolerance. The final bound may lose what the equalities lose."""
        equalities = [abs(s.slack) for s in self.steps if s.is_equality]
        if max(equalities) > equality_tolerance:
            return False
        budget = slack_tolerance + sum(equalities)
        for s in self.steps:
            if s.is_equality:
                continue
            allowed = budget if s.name == 'final_bound' else slack_tolerance
            if s.slack < -allowed:
                return False
        return True


def verify_chain(plan: TransportPlan, params: GNParams) -> ChainReport:
    """Evaluate both sides of every step that bounds int G^theta by the primal terms.

    Steps are, in order: change of variables, Holder, integration by parts,
    Cauchy-Schwarz, moment transfer and the resulting final bound

        int G^theta <= (int F^h)^theta ((r/k) |y|_G |f'|_2)^(1 - theta).

    Holder and Cauchy-Schwarz use the same quadrature on both sides, so their discrete
    slacks are non-negative up to rounding.
    """
    e = chain_exponents(params)
    F = plan.source.values
    x_grid = plan.source.grid
    G = plan.target.values
    y_grid = plan.target.grid
    phi = plan.map_derivative.values
    second = np.maximum(plan.map_second.values, 0.0)
    factor = e.r / e.k

    target_power = y_grid.integrate(G ** e.theta)
    pulled_back = x_grid.integrate(F ** e.theta * second ** (1 - e.theta))
    holder_first = x_grid.integrate(F ** e.holder)
    holder_second = x_grid.integrate(F ** e.r * second)
    holder_rhs = holder_first ** e.theta * holder_second ** (1 - e.theta)

    f = F ** e.k
    df = x_grid.differentiate(f, 1)
    root = np.sqrt(F)
    by_parts = -factor * x_grid.integrate(root * phi * df)
    moment_x = x_grid.integrate(F * phi ** 2)
    gradient = x_grid.integrate(df ** 2)
    cauchy_rhs = factor * math.sqrt(moment_x * gradient)
    moment_y = y_grid.integrate(G * y_grid.nodes ** 2)
    final_rhs = holder_first ** e.theta \
        * (factor * math.sqrt(moment_y * gradient)) ** (1 - e.theta)

    steps = [
        _step('change_of_variables', True, target_power, pulled_back),
        _step('holder', False, pulled_back, holder_rhs),
        _step('integration_by_parts', True, holder_second, by_parts),
        _step('cauchy_schwarz', False, by_parts, cauchy_rhs),
        _step('moment_transfer', True, moment_x, moment_y),
        _step('final_bound', False, target_power, final_rhs),
    ]
    logger.debug('Chain at p=%g: %s', params.p,
                 ', '.join(f'{s.name}={s.slack:.3e}' for s in steps))
    return ChainReport(params.p, e, steps)


def optimizer_pair(params: GNParams, size: int = 2049, dual_size: int = 4097,
                   radius: float = 1e4) -> Tuple[GridFunction, GridFunction]:
    """Unit mass densities (F, G) of the closed-form optimizers.

    p > 2: F = f^p with f = cosh^(-2/(p-2)) and G = (1 + y^2)^(-q).
    p < 2: F = f^2 with f = cos^(2/(2-p)) on [-pi/2, pi/2] and the same G.
    """
    y_grid = WeightedGrid.tangent(radius, dual_size)
    g = Optimizer(OptimizerKind.GBarenblattDual, params.p)(y_grid.nodes)
    if params.is_supercritical:
        x_grid = WeightedGrid.uniform(-20.0, 20.0, size)
        f = Optimizer(OptimizerKind.FStarLine, params.p)(x_grid.nodes)
        F = f ** params.p
    else:
        x_grid = WeightedGrid.uniform(-math.pi / 2, math.pi / 2, size)
        f = Optimizer(OptimizerKind.FStarCompact, params.p)(x_grid.nodes)
        F = f ** 2
    F = F / x_grid.integrate(F)
    g = g / y_grid.integrate(g)
    return GridFunction(x_grid, F), GridFunction(y_grid, g)


def random_pair(rng: np.random.Generator, size: int = 1025, dual_size: int = 2049,
                radius: float = 1e4) -> Tuple[GridFunction, GridFunction]:
    """A random admissible pair: a two bump Gaussian mixture F and a shifted
    power law G = (1 + b (y - c)^2)^(-q) with q in [2.5, 4]."""
    x_grid = WeightedGrid.uniform(-20.0, 20.0, size)
    x = x_grid.nodes
    centers = rng.uniform(-2.0, 2.0, 2)
    widths = rng.uniform(0.5, 1.5, 2)
    share = rng.uniform(0.2, 0.8)
    F = share * np.exp(-0.5 * ((x - centers[0]) / widths[0]) ** 2) / widths[0] \
        + (1 - share) * np.exp(-0.5 * ((x - centers[1]) / widths[1]) ** 2) / widths[1]
    y_grid = WeightedGrid.tangent(radius, dual_size)
    y = y_grid.nodes
    q, b, c = rng.uniform(2.5, 4.0), rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0)
    G = np.exp(-q * np.log1p(b * (y - c) ** 2))
    return (GridFunction(x_grid, F / x_grid.integrate(F)),
            GridFunction(y_grid, G / y_grid.integrate(G)))


class PrimalSolution(NamedTuple):
    solution: GridFunction
    value: float
    iterations: int
    converged: bool


def primal_grid(params: GNParams, size: int = 1024) -> WeightedGrid:
    """Uniform working grid of the primal problem."""
    half = 20.0 if params.is_supercritical else 4.0
    return WeightedGrid.uniform(-half, half, size)


def primal_starts(grid: WeightedGrid) -> List[GridFunction]:
    """Three distinct non-optimal starting points."""
    x = grid.nodes
    return [
        GridFunction(grid, np.exp(-x ** 2 / 2)),
        GridFunction(grid, (1 + ((x - 0.5) / 1.5) ** 2) ** -2),
        GridFunction(grid, np.exp(-x ** 2 / 8) * (1 + 0.3 * np.tanh(x))),
    ]


def solve_primal(params: GNParams, start: GridFunction, max_iterations: int = 5000,
                 tolerance: float = 1e-10, floor: float = 1e-12) -> PrimalSolution:
    """Minimize (int |f'|^2)^a (int f^2)^b (int |f|^p)^c over grid functions.

    The descent direction is the gradient preconditioned with D^T W D + W and steps
    follow an Armijo backtracking line search. Iterates are rescaled to |f|_p = 1
    after every step. For p < 2 iterates are projected onto f >= floor and the
    direction is computed on the nodes off the floor.

    Args:
        params: GNParams.
        start: Non-zero starting point on a Lebesgue grid.
        max_iterations: Iteration cap. Default: 5000.
        tolerance: Stop when the decrease of the log quotient drops below it.
        floor: Lower bound of the iterates for p < 2.

    Returns:
        A PrimalSolution with the minimizer and the value of the quotient.
    """
    grid = start.grid
    if grid.measure is not Measure.Lebesgue:
        raise DomainError('solve_primal needs a Lebesgue grid.')
    if not np.any(start.values != 0):
        raise DomainError('solve_primal needs a non-zero start.')
    p = params.p
    a, b, c = primal_exponents(params)
    w = grid.weights
    D = grid.diff_matrix(1)
    precond = (D.T @ sparse.diags(w) @ D + sparse.diags(w)).tocsc()
    projected = not params.is_supercritical

    def project(values):
        values = values / (w @ np.abs(values) ** p) ** (1 / p)
        return np.maximum(values, floor) if projected else values

    def evaluate(values):
        df = D @ values
        parts = (w @ df ** 2, w @ values ** 2, w @ np.abs(values) ** p)
        if min(parts) <= 0:
            return math.inf, parts, df
        return a * math.log(parts[0]) + b * math.log(parts[1]) \
            + c * math.log(parts[2]), parts, df

    def gradient(values, parts, df):
        return 2 * a * (D.T @ (w * df)) / parts[0] + 2 * b * w * values / parts[1] \
            + c * p * w * np.abs(values) ** (p - 1) * np.sign(values) / parts[2]

    values = project(np.abs(start.values) if projected else start.values)
    J, parts, df = evaluate(values)
    if not math.isfinite(J):
        raise DomainError('solve_primal needs a non-constant start.')
    solver, free_key = splu(precond), None
    step, converged, iteration = 1.0, False, 0
    while iteration < max_iterations:
        iteration += 1
        g = gradient(values, parts, df)
        direction = np.zeros_like(values)
        if projected:
            free = ~((values <= floor) & (g > 0))
            key = free.tobytes()
            if key != free_key:
                solver = splu(precond[free][:, free].tocsc())
                free_key = key
            direction[free] = -solver.solve(g[free])
        else:
            direction = -solver.solve(g)
        slope = float(g @ direction)
        if slope >= 0:
            converged = True
            break
        step = min(1.0, 2 * step)
        while True:
            trial = project(values + step * direction)
            J_trial, parts_trial, df_trial = evaluate(trial)
            if J_trial <= J + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-14:
                break
        if step < 1e-14:
            logger.debug('Primal line search stalled at iteration %d.', iteration)
            converged = True
            break
        change = J - J_trial
        values, J, parts, df = trial, J_trial, parts_trial, df_trial
        if change < tolerance and -slope < math.sqrt(tolerance):
            converged = True
            break
        if iteration % 100 == 0:
            logger.debug('Primal iteration %d: log quotient %.15g, step %.3g.',
                         iteration, J, step)
    if not converged:
        warnings.warn(
            f'solve_primal stopped after {max_iterations} iterations at p = {p}. '
            'Returning the last iterate.', ConvergenceWarning)
    logger.info('Primal p=%g: value %.12g after %d iterations.', p, math.exp(J),
                iteration)
    return PrimalSolution(GridFunction(grid, values, projected), math.exp(J), iteration,
                          converged)


class DualSolution(NamedTuple):
    solution: GridFunction
    value: float
    iterations: int
    converged: bool


def dual_grid(size: int = 4097, radius: float = 1e4) -> WeightedGrid:
    """Tangent working grid of the dual problem."""
    return WeightedGrid.tangent(radius, size)


def _dual_log_quotient(log_g: np.ndarray, grid: WeightedGrid, params: GNParams):
    m, s, r = dual_exponents(params)
    values = np.exp(log_g)
    power = grid.integrate(np.exp(m * log_g))
    moment = grid.integrate(values * grid.nodes ** 2)
    mass = grid.integrate(values)
    return math.log(power) - s * math.log(moment) - r * math.log(mass), \
        (power, moment, mass)


def stationarity_map(G: GridFunction, params: GNParams) -> np.ndarray:
    """((P/m) (s y^2 / M2 + r / M0))^(1/(m-1)), which equals G at critical points
    of the dual quotient."""
    log_g = np.log(np.maximum(G.values, 1e-300))
    _, parts = _dual_log_quotient(log_g, G.grid, params)
    return np.exp(_log_stationarity(G.grid, params, parts))


def _log_stationarity(grid: WeightedGrid, params: GNParams, parts) -> np.ndarray:
    m, s, r = dual_exponents(params)
    power, moment, mass = parts
    inner = s * grid.nodes ** 2 / moment + r / mass
    return (math.log(power / m) + np.log(inner)) / (m - 1)


def solve_dual(params: GNParams, start: GridFunction, max_iterations: int = 5000,
               tolerance: float = 1e-10, floor: float = 1e-300) -> DualSolution:
    """Maximize int G^m / ((int G y^2)^s (int G)^r) by multiplicative updates.

    Each step is log G <- (1 - tau) log G + tau log T(G) with T the stationarity map.
    tau starts at 1 and is halved until the quotient increases, so iterates stay
    positive.
    """
    grid = start.grid
    if grid.measure is not Measure.Lebesgue:
        raise DomainError('solve_dual needs a Lebesgue grid.')
    if np.any(start.values < 0) or not np.any(start.values > 0):
        raise DomainError('solve_dual needs a non-negative, non-zero start.')
    moment = grid.integrate(start.values * grid.nodes ** 2)
    if not math.isfinite(moment) or moment <= 0:
        raise DomainError('solve_dual needs a start with finite second moment.')
    log_g = np.log(np.maximum(start.values / start.values.max(), floor))
    J, parts = _dual_log_quotient(log_g, grid, params)
    converged, iteration = False, 0
    while iteration < max_iterations:
        iteration += 1
        log_t = _log_stationarity(grid, params, parts)
        tau = 1.0
        while True:
            trial = (1 - tau) * log_g + tau * log_t
            J_trial, parts_trial = _dual_log_quotient(trial, grid, params)
            if J_trial >= J:
                break
            tau *= 0.5
            if tau < 1e-12:
                break
        if tau < 1e-12:
            converged = True
            break
        change = J_trial - J
        log_g, J = trial - trial.max(), J_trial
        _, parts = _dual_log_quotient(log_g, grid, params)
        if change < tolerance:
            converged = True
            break
        logger.debug('Dual iteration %d: log quotient %.15g, tau %.3g.', iteration, J, tau)
    if not converged:
        warnings.warn(
            f'solve_dual stopped after {max_iterations} iterations at p = {params.p}. '
            'Returning the last iterate.', ConvergenceWarning)
    logger.info('Dual p=%g: value %.12g after %d iterations.', params.p, math.exp(J),
                iteration)
    return DualSolution(GridFunction(grid, np.exp(log_g)), math.exp(J), iteration,
                        converged)


class ParametricAscent(NamedTuple):
    value: float
    q: float
    b: float
    evaluations: int


def dual_parametric(params: GNParams, grid: WeightedGrid) -> ParametricAscent:
    """Maximize the dual quotient over (1 + b y^2)^(-q) with Nelder-Mead in (q, log b)."""
    y2 = grid.nodes ** 2

    def negative(theta):
        q, log_b = theta
        if q <= 1.5 + 1e-6:
            return math.inf
        log_g = -q * np.log1p(math.exp(log_b) * y2)
        return -_dual_log_quotient(log_g, grid, params)[0]

    result = minimize(negative, [params.q_dual + 1.0, 0.0], method='Nelder-Mead',
                      options={'xatol': 1e-10, 'fatol': 1e-15, 'maxiter': 4000})
    return ParametricAscent(math.exp(-result.fun), float(result.x[0]),
                            math.exp(result.x[1]), int(result.nfev))


class DualFit(NamedTuple):
    """a (1 + b y^2)^(-q) with the mass and second moment of the fitted density."""
    scale: float
    coefficient: float
    relative_l2: float


def fit_dual_profile(G: GridFunction, params: GNParams) -> DualFit:
    q = params.q_dual
    grid = G.grid
    y2 = grid.nodes ** 2
    mass = grid.integrate(G.values)
    moment = grid.integrate(G.values * y2)
    h0, h1 = h_of_q(q), h_of_q(q - 1)
    coefficient = (h1 - h0) / (h0 * moment / mass)
    scale = mass * math.sqrt(coefficient) / h0
    profile = scale * np.exp(-q * np.log1p(coefficient * y2))
    error = math.sqrt(grid.integrate((G.values - profile) ** 2)
                      / grid.integrate(G.values ** 2))
    return DualFit(scale, coefficient, error)


def logsob_inf_side(f: GridFunction) -> float:
    """log((2 / (pi e)) |f'|^2 / |f|^2) - 2 int (f^2 / |f|^2) log(f^2 / |f|^2).

    Non-negative, zero for every Gaussian.
    """
    grid = f.grid
    norm = grid.integrate(f.values ** 2)
    gradient = grid.integrate(grid.differentiate(f.values, 1) ** 2)
    u2 = f.values ** 2 / norm
    return math.log(2 / (math.pi * math.e) * gradient / norm) \
        - 2 * grid.integrate(xlogy(u2, u2))


def logsob_sup_side(G: GridFunction) -> float:
    """log(|G|_1^3 / (2 pi int y^2 G)) - 2 int G log G / |G|_1 - 1.

    Non-positive, zero for every Gaussian and invariant under G -> l G(l y).
    """
    grid = G.grid
    mass = grid.integrate(G.values)
    moment = grid.integrate(G.values * grid.nodes ** 2)
    return math.log(mass ** 3 / (2 * math.pi * moment)) \
        - 2 * grid.integrate(xlogy(G.values, G.values)) / mass - 1


class LogSobolevCheck(NamedTuple):
    gaussian_inf: float
    gaussian_sup: float
    max_sup: float
    min_inf: float
    slope_above: float
    slope_below: float
    slope_reference: float
    samples: int


def perturbed_gaussians(grid: WeightedGrid, count: int = 20, seed: int = 0
                        ) -> List[GridFunction]:
    """Positive densities gaussian(x; c, v) (1 + e sin(k x + s)) with e < 1/2."""
    rng = np.random.default_rng(seed)
    x = grid.nodes
    out = []
    for _ in range(count):
        center, variance = rng.uniform(-1, 1), rng.uniform(0.5, 2.0)
        amp, freq, shift = rng.uniform(0, 0.5), rng.uniform(0.5, 3), rng.uniform(0, 2 * math.pi)
        base = np.exp(-(x - center) ** 2 / (2 * variance)) / math.sqrt(2 * math.pi * variance)
        out.append(GridFunction(grid, base * (1 + amp * np.sin(freq * x + shift))))
    return out


def logsob_limit_check(grid: WeightedGrid = None, samples: int = 20, seed: int = 0,
                       h: float = 1e-3) -> LogSobolevCheck:
    """Evaluate both log-Sobolev expressions at the standard Gaussian and at perturbed
    Gaussians, and the slope of C1 at p = 2 by finite differences."""
    grid = grid or WeightedGrid.uniform(-20.0, 20.0, 2001)
    gaussian = Optimizer(OptimizerKind.Gaussian)(grid.nodes)
    gaussian_sup = logsob_sup_side(GridFunction(grid, gaussian))
    gaussian_inf = logsob_inf_side(GridFunction(grid, np.sqrt(gaussian)))
    sups, infs = [], []
    for density in perturbed_gaussians(grid, samples, seed):
        sups.append(logsob_sup_side(density))
        infs.append(logsob_inf_side(density.with_values(np.sqrt(density.values))))
    estimates = log_sobolev_estimates(h)
    return LogSobolevCheck(
        gaussian_inf, gaussian_sup, max(sups), min(infs), estimates['slope_above'],
        estimates['slope_below'], log_sobolev_limits()[1], samples)


def run_duality(params: GNParams, grid_size: int = 1024, dual_size: int = None,
                starts: int = 1, max_iterations: int = 5000) -> DualityReport:
    """Solve both sides of the duality theorem and compare with the closed forms.

    Args:
        params: GNParams.
        grid_size: Nodes of the primal grid. Default: 1024.
        dual_size: Nodes of the dual tangent grid. Default: 4 * grid_size + 1.
        starts: Number of primal starting points, between 1 and 3. Default: 1.
        max_iterations: Iteration cap of both solvers.
    """
    if not 1 <= starts <= 3:
        raise DomainError(f'starts must be between 1 and 3. Got {starts}.')
    x_grid = primal_grid(params, grid_size)
    y_grid = dual_grid(dual_size or 4 * grid_size + 1)
    primal = [solve_primal(params, start, max_iterations)
              for start in primal_starts(x_grid)[:starts]]
    best = min(primal, key=lambda s: s.value)
    values = [s.value for s in primal]
    bump = GridFunction(y_grid, np.exp(-(y_grid.nodes / 2) ** 4))
    dual = solve_dual(params, bump, max_iterations)
    c_p = math.exp(log_c_p(params))
    closed = math.exp(log_c1_or_c2(params))
    report = DualityReport(
        p=params.p,
        primal_inf_numeric=best.value,
        dual_sup_numeric=dual.value,
        closed_form=closed,
        c_p=c_p,
        gap_primal=abs(c_p * best.value - closed) / closed,
        gap_dual=abs(dual.value - closed) / closed,
        gap=abs(dual.value - c_p * best.value) / dual.value,
        primal_fit_error=fit_symmetries(best.solution, params).relative_l2,
        dual_fit_error=fit_dual_profile(dual.solution, params).relative_l2,
        parametric_sup=dual_parametric(params, y_grid).value,
        start_spread=(max(values) - min(values)) / min(values),
        primal_iterations=best.iterations,
        dual_iterations=dual.iterations
    )
    logger.info('Duality p=%g: gap %.3e (primal %.3e, dual %.3e).', params.p,
                report.gap, report.gap_primal, report.gap_dual)
    return report
