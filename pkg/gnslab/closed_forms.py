"""Closed-form optimizers, Barenblatt profiles and the Euler-Lagrange equations."""

import enum
import logging
import math
from typing import NamedTuple, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, least_squares

from .constants import GNParams, log_h_of_q
from .errors import DomainError
from .grid import GridFunction, Measure, WeightedGrid
from .transform import log_v_star

logger = logging.getLogger(__name__)

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


class OptimizerKind(enum.Enum):
    """Closed-form extremal profiles.

    FStarLine: cosh(x)^(-2/(p-2)) for p > 2.
    FStarCompact: cos(x)^(2/(2-p)) on [-pi/2, pi/2] and 0 outside, for 1 < p < 2.
    GBarenblattDual: (1 + y^2)^(-q_dual), the dual optimizer.
    BarenblattFD: (C + (1-m)/(2m) y^2)^(1/(m-1)) with C fixed by the mass.
    Gaussian: exp(-x^2 / 2) / sqrt(2 pi), the logarithmic Sobolev optimizer.
    """
    FStarLine = 'f_star_line'
    FStarCompact = 'f_star_compact'
    GBarenblattDual = 'g_barenblatt_dual'
    BarenblattFD = 'barenblatt_fd'
    Gaussian = 'gaussian'


def barenblatt_coefficient(m: float) -> float:
    """(1 - m) / (2m), the quadratic coefficient of the Barenblatt profile."""
    if not 0 < m < 1:
        raise DomainError(f'The fast diffusion exponent must be in (0, 1). Got {m}.')
    return (1 - m) / (2 * m)


def barenblatt_mass_constant(m: float, mass: float, grid: WeightedGrid = None) -> float:
    """The constant C such that (C + c y^2)^(1/(m-1)) has the given mass.

    On the line the mass is C^(1/2 - s) c^(-1/2) h(s) with s = 1 / (1 - m). With a
    grid, C is matched to the quadrature mass on the truncated grid instead.

    Args:
        m: Fast diffusion exponent in (0, 1).
        mass: Requested mass.
        grid: Optional Lebesgue grid.
    """
    c = barenblatt_coefficient(m)
    if not mass > 0:
        raise DomainError(f'The Barenblatt mass must be positive. Got {mass}.')
    s = 1 / (1 - m)
    log_c = (math.log(mass) + 0.5 * math.log(c) - log_h_of_q(s)) / (0.5 - s)
    exact = math.exp(log_c)
    if grid is None:
        return exact
    y2 = grid.nodes ** 2

    def excess(log_constant):
        return math.log(grid.integrate((math.exp(log_constant) + c * y2) ** -s)) \
            - math.log(mass)

    lo, hi = log_c - 5.0, log_c + 5.0
    return math.exp(brentq(excess, lo, hi, xtol=1e-14, rtol=1e-14))


class Optimizer:
    """A closed-form optimizer with its symmetry parameters.

    The evaluated profile is scale * base(dilation * (x - center)).

    Args:
        kind: An OptimizerKind.
        exponent: p for FStarLine, FStarCompact and GBarenblattDual, m for
            BarenblattFD. Ignored for Gaussian.
        scale: Amplitude. Default: 1.
        dilation: Dilation. Default: 1.
        center: Center. Default: 0.
        mass: Mass of the BarenblattFD profile. Default: 1.
    """

    def __init__(self, kind: OptimizerKind, exponent: float = None, scale: float = 1.0,
                 dilation: float = 1.0, center: float = 0.0, mass: float = 1.0) -> None:
        if not (scale > 0 and dilation > 0):
            raise DomainError(
                f'scale and dilation must be positive. Got {scale} and {dilation}.')
        self._kind = kind
        self._params = None
        self._m = None
        if kind in (OptimizerKind.FStarLine, OptimizerKind.FStarCompact,
                    OptimizerKind.GBarenblattDual):
            self._params = GNParams(exponent)
            if kind is OptimizerKind.FStarLine and not self._params.is_supercritical:
                raise DomainError(f'FStarLine needs p > 2. Got p = {exponent}.')
            if kind is OptimizerKind.FStarCompact and self._params.is_supercritical:
                raise DomainError(f'FStarCompact needs 1 < p < 2. Got p = {exponent}.')
        elif kind is OptimizerKind.BarenblattFD:
            barenblatt_coefficient(exponent)
            self._m = float(exponent)
        self._scale = float(scale)
        self._dilation = float(dilation)
        self._center = float(center)
        self._mass = float(mass)
        self._constant = None
        if kind is OptimizerKind.BarenblattFD:
            self._constant = barenblatt_mass_constant(self._m, self._mass)

    @property
    def kind(self) -> OptimizerKind:
        return self._kind

    @property
    def params(self) -> Union[GNParams, None]:
        return self._params

    @property
    def m(self) -> Union[float, None]:
        return self._m

    @property
    def scale(self) -> float:
        return self._scale

    @property
    def dilation(self) -> float:
        return self._dilation

    @property
    def center(self) -> float:
        return self._center

    @property
    def mass(self) -> float:
        return self._mass

    @property
    def constant(self) -> Union[float, None]:
        """The constant C of the BarenblattFD profile."""
        return self._constant

    @property
    def is_positive(self) -> bool:
        return self._kind is not OptimizerKind.FStarCompact

    def base(self, x: np.ndarray) -> np.ndarray:
        """The profile with unit scale, unit dilation and zero center."""
        x = np.asarray(x, dtype=float)
        kind = self._kind
        if kind is OptimizerKind.FStarLine:
            return np.exp(log_v_star(x, self._params))
        if kind is OptimizerKind.FStarCompact:
            inside = np.abs(x) < math.pi / 2
            cos = np.where(inside, np.cos(np.where(inside, x, 0.0)), 0.0)
            return np.where(inside, cos ** (-self._params.weight_exponent), 0.0)
        if kind is OptimizerKind.GBarenblattDual:
            return np.exp(-self._params.q_dual * np.log1p(x ** 2))
        if kind is OptimizerKind.BarenblattFD:
            c = barenblatt_coefficient(self._m)
            return np.exp(np.log(self._constant + c * x ** 2) / (self._m - 1))
        return np.exp(-0.5 * x ** 2 - LOG_SQRT_2PI)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self._scale * self.base(self._dilation * (x - self._center))

    def __repr__(self) -> str:
        exponent = self._params.p if self._params else self._m
        return (f'Optimizer: {self._kind.value} | exponent: {exponent} | '
                f'scale: {self._scale} | dilation: {self._dilation} | '
                f'center: {self._center}')


def eval_optimizer(optimizer: Optimizer, grid: WeightedGrid) -> GridFunction:
    """Sample an optimizer on a Lebesgue grid in the line variable."""
    if grid.measure is not Measure.Lebesgue:
        raise DomainError(
            f'Optimizers are evaluated on Lebesgue grids. Got {grid.measure.value}.')
    values = optimizer(grid.nodes)
    return GridFunction(grid, values, optimizer.is_positive and bool(np.all(values > 0)))


def el_residual(f: GridFunction, params: GNParams) -> GridFunction:
    """Pointwise residual of the Euler-Lagrange equation of the GNS inequality.

    p > 2: -(p-2)^2 f'' + 4 f - 2p |f|^(p-2) f.
    p < 2: -(2-p)^2 f'' - 4 f + 2p |f|^(p-2) f.
    """
    p = params.p
    values = f.values
    d2f = f.grid.differentiate(values, 2)
    with np.errstate(divide='ignore', invalid='ignore'):
        power = np.where(values == 0, 0.0, np.abs(values) ** (p - 2) * values)
    if params.is_supercritical:
        residual = -(p - 2) ** 2 * d2f + 4 * values - 2 * p * power
    else:
        residual = -(2 - p) ** 2 * d2f - 4 * values + 2 * p * power
    return GridFunction(f.grid, residual)


def interior_mask(f: GridFunction, band: int = 3) -> np.ndarray:
    """Nodes at least ``band`` nodes away from the grid ends and from the zero set of f."""
    n = f.grid.size
    keep = np.zeros(n, dtype=bool)
    keep[band:n - band] = True
    zeros = np.flatnonzero(f.values == 0)
    for index in zeros:
        keep[max(index - band, 0):index + band + 1] = False
    return keep


def el_residual_norm(f: GridFunction, params: GNParams, band: int = 3) -> float:
    """Largest absolute Euler-Lagrange residual over interior_mask(f, band)."""
    residual = el_residual(f, params).values
    mask = interior_mask(f, band)
    return float(np.max(np.abs(residual[mask]))) if mask.any() else 0.0


def _energy(values: np.ndarray, slope: np.ndarray, params: GNParams) -> np.ndarray:
    p = params.p
    power = np.abs(values) ** p
    if params.is_supercritical:
        return 0.5 * (p - 2) ** 2 * slope ** 2 - 2 * values ** 2 + 2 * power
    return 0.5 * (2 - p) ** 2 * slope ** 2 + 2 * values ** 2 - 2 * power


def energy_invariant(f: GridFunction, params: GNParams) -> GridFunction:
    """Pointwise first integral of the Euler-Lagrange equation.

    p > 2: 1/2 (p-2)^2 |f'|^2 - 2 |f|^2 + 2 |f|^p.
    p < 2: 1/2 (2-p)^2 |f'|^2 + 2 |f|^2 - 2 |f|^p.
    Constant along every solution and zero along solutions that decay.
    """
    slope = f.grid.differentiate(f.values, 1)
    return GridFunction(f.grid, _energy(f.values, slope, params))


class ShootingOutcome(enum.Enum):
    Decaying = 'decaying'  # positive and decreasing up to x_max
    CompactSupport = 'compact-support'  # reaches 0 with zero slope
    NonDecaying = 'non-decaying'  # turns back or crosses zero with nonzero slope
    BlowUp = 'blow-up'


class ShootingResult(NamedTuple):
    """Solution of the Euler-Lagrange initial value problem, reflected to x < 0."""
    solution: GridFunction
    outcome: ShootingOutcome
    x_end: float
    energy_drift: float


def shooting_solve(params: GNParams, f0: float, size: int = 2001, x_max: float = 15.0,
                   upper: float = 1e3, lower: float = 1e-12) -> ShootingResult:
    """Integrate the Euler-Lagrange equation from f(0) = f0, f'(0) = 0 outward.

    Integration stops when |f| leaves [lower, upper], when f' turns positive or at
    x_max. Only f0 = 1 yields the decaying optimizer, which exhibits uniqueness of the
    positive solution up to the symmetries.

    Args:
        params: GNParams.
        f0: Value at the maximum point.
        size: Number of nodes of the returned symmetric grid.
        x_max: Integration range. Default: 15.
        upper: Blow-up threshold. Default: 1e3.
        lower: Vanishing threshold. Default: 1e-12.

    Returns:
        A ShootingResult. energy_drift is the largest deviation of the first
        integral from its value at 0 along the ODE solution.
    """
    if not f0 > 0:
        raise DomainError(f'f0 must be positive. Got {f0}.')
    p = params.p
    a = (p - 2) ** 2

    def rhs(_, y):
        f, df = y
        power = abs(f) ** (p - 2) * f if f != 0 else 0.0
        if params.is_supercritical:
            return [df, (4 * f - 2 * p * power) / a]
        return [df, (-4 * f + 2 * p * power) / a]

    def too_large(_, y):
        return abs(y[0]) - upper

    def too_small(_, y):
        return y[0] - lower

    def turning(x, y):
        return y[1] if x > 0 else -1.0

    for event in (too_large, too_small):
        event.terminal = True
    too_small.direction = -1
    turning.terminal = True
    turning.direction = 1

    solution = solve_ivp(rhs, (0.0, x_max), [f0, 0.0], method='DOP853', rtol=1e-12,
                         atol=1e-14, dense_output=True, events=(too_large, too_small,
                                                                turning))
    x_end = float(solution.t[-1])
    if solution.t_events[0].size:
        outcome = ShootingOutcome.BlowUp
    elif solution.t_events[1].size:
        slope = abs(solution.y_events[1][0][1])
        outcome = ShootingOutcome.CompactSupport \
            if not params.is_supercritical and slope < 1e-6 \
            else ShootingOutcome.NonDecaying
    elif solution.t_events[2].size:
        outcome = ShootingOutcome.NonDecaying
    else:
        outcome = ShootingOutcome.Decaying
    energy = _energy(solution.y[0], solution.y[1], params)
    drift = float(np.max(np.abs(energy - energy[0])))
    if x_end <= 0:
        raise DomainError(f'Shooting from f0 = {f0} stopped at x = 0.')
    grid = WeightedGrid.uniform(-x_end, x_end, size)
    values = solution.sol(np.abs(grid.nodes))[0]
    logger.debug('Shooting p=%g f0=%g: %s at x=%.4g, energy drift %.2e.',
                 p, f0, outcome.value, x_end, drift)
    return ShootingResult(GridFunction(grid, values), outcome, x_end, drift)


class SymmetryFit(NamedTuple):
    """Parameters of scale * base(dilation * (x - center)) fitted to a profile."""
    scale: float
    dilation: float
    center: float
    relative_l2: float


def fit_symmetries(f: GridFunction, params: GNParams) -> SymmetryFit:
    """Fit the closed-form optimizer of the regime to f by least squares.

    The fit runs over (log scale, log dilation, center) and the relative L2 error is
    measured with the quadrature of the grid.
    """
    kind = OptimizerKind.FStarLine if params.is_supercritical \
        else OptimizerKind.FStarCompact
    x = f.grid.nodes
    values = f.values
    sqrt_w = np.sqrt(f.grid.weights)
    peak = int(np.argmax(values))
    base = Optimizer(kind, params.p)
    if params.is_supercritical:
        start_dilation = 1.0
    else:
        support = x[values > 1e-3 * values[peak]]
        start_dilation = math.pi / max(support[-1] - support[0], 1e-12)

    def residual(theta):
        scale, dilation, center = math.exp(theta[0]), math.exp(theta[1]), theta[2]
        return sqrt_w * (scale * base.base(dilation * (x - center)) - values)

    start = [math.log(max(values[peak], 1e-300)), math.log(start_dilation), x[peak]]
    fit = least_squares(residual, start, method='lm', xtol=1e-14, ftol=1e-14,
                        max_nfev=2000)
    norm = math.sqrt(f.grid.integrate(values ** 2))
    error = float(np.linalg.norm(fit.fun)) / norm
    return SymmetryFit(math.exp(fit.x[0]), math.exp(fit.x[1]), float(fit.x[2]), error)
