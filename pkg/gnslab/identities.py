"""Operator identities of the weighted second order operators and rigidity of the
semilinear equation -Lf + lambda f = f^(p-1)."""

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .constants import GNParams
from .errors import DomainError
from .grid import GridFunction, Measure, WeightedGrid

logger = logging.getLogger(__name__)


class NuKind(enum.Enum):
    OneMinusZ2 = '1-z^2'  # on (-1, 1)
    OnePlusY2 = '1+y^2'  # on the line


class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float
    mismatch: float


def _mismatch(lhs: float, rhs: float) -> float:
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-14)


class AbOperatorSpec:
    """The operator L_ab f = nu^a f'' + (a+b)/a (nu^a)' f' on L^2(nu^b dx).

    Integrals use the unnormalized measure nu^b dx. Nodes where nu vanishes get zero
    weight.

    Args:
        a: Non-zero real.
        b: Real.
        nu: A NuKind.
        grid: Lebesgue grid on [-1, 1] for OneMinusZ2 or on a truncated interval for
            OnePlusY2.
    """

    def __init__(self, a: float, b: float, nu: NuKind, grid: WeightedGrid) -> None:
        if a == 0:
            raise DomainError('The operator L_ab needs a != 0.')
        if grid.measure is not Measure.Lebesgue:
            raise DomainError('AbOperatorSpec expects a Lebesgue grid.')
        if nu is NuKind.OneMinusZ2 and (grid.nodes[0] < -1 or grid.nodes[-1] > 1):
            raise DomainError('1 - z^2 is attached to grids inside [-1, 1].')
        self._a = float(a)
        self._b = float(b)
        self._nu = nu
        self._grid = grid

    @classmethod
    def build(cls, a: float, b: float, nu: NuKind, size: int = 801,
              radius: float = 4.0) -> 'AbOperatorSpec':
        """Spec with a uniform grid on [-1, 1] or on [-radius, radius]."""
        end = 1.0 if nu is NuKind.OneMinusZ2 else radius
        return cls(a, b, nu, WeightedGrid.uniform(-end, end, size))

    @property
    def a(self) -> float:
        return self._a

    @property
    def b(self) -> float:
        return self._b

    @property
    def nu(self) -> NuKind:
        return self._nu

    @property
    def grid(self) -> WeightedGrid:
        return self._grid

    @property
    def nu_values(self) -> np.ndarray:
        x = self._grid.nodes
        return 1 - x ** 2 if self._nu is NuKind.OneMinusZ2 else 1 + x ** 2

    def nu_power(self, exponent: float, order: int = 0) -> np.ndarray:
        """nu^exponent or its first or second derivative, set to 0 where nu = 0."""
        x = self._grid.nodes
        nu = self.nu_values
        sign = -1.0 if self._nu is NuKind.OneMinusZ2 else 1.0
        inside = nu > 0
        safe = np.where(inside, nu, 1.0)
        k = exponent
        if order == 0:
            out = safe ** k
        elif order == 1:
            out = 2 * sign * k * x * safe ** (k - 1)
        else:
            out = 2 * sign * k * safe ** (k - 1) + 4 * k * (k - 1) * x ** 2 \
                * safe ** (k - 2)
        return np.where(inside, out, 0.0)

    def integrate(self, values: np.ndarray, extra_power: float = 0.0) -> float:
        """Integral of values against nu^(b + extra_power) dx."""
        return self._grid.integrate(values * self.nu_power(self._b + extra_power))

    def apply(self, u: GridFunction) -> np.ndarray:
        """L_ab u at the nodes."""
        du = self._grid.differentiate(u.values, 1)
        d2u = self._grid.differentiate(u.values, 2)
        a, b = self._a, self._b
        return self.nu_power(a) * d2u + (a + b) / a * self.nu_power(a, 1) * du

    def __repr__(self) -> str:
        return f'AbOperatorSpec: a={self._a} | b={self._b} | nu={self._nu.value}'


def taper(nodes: np.ndarray, radius: float, order: int = 5) -> np.ndarray:
    """Bump (1 - (x / radius)^2)^order, zero outside [-radius, radius]."""
    inside = np.abs(nodes) < radius
    return np.where(inside, np.clip(1 - (nodes / radius) ** 2, 0, None) ** order, 0.0)


def tapered(grid: WeightedGrid, function: Callable, order: int = 5) -> GridFunction:
    """Sample function on grid and multiply it by a taper that vanishes at the ends."""
    radius = max(abs(grid.nodes[0]), abs(grid.nodes[-1]))
    return GridFunction(grid, function(grid.nodes) * taper(grid.nodes, radius, order))


def _check_grid(u: GridFunction, spec: AbOperatorSpec) -> None:
    if u.grid is not spec.grid:
        raise DomainError('The test function must live on the grid of the operator.')


def verify_identity_1(u: GridFunction, spec: AbOperatorSpec) -> IdentityCheck:
    """int (L_ab u)^2 dmu_b = int |u''|^2 dmu_(2a+b) - (a+b)/a int nu^a (nu^a)'' |u'|^2 dmu_b."""
    _check_grid(u, spec)
    a, b = spec.a, spec.b
    du = spec.grid.differentiate(u.values, 1)
    d2u = spec.grid.differentiate(u.values, 2)
    lhs = spec.integrate(spec.apply(u) ** 2)
    rhs = spec.integrate(d2u ** 2, 2 * a) - (a + b) / a * spec.integrate(
        spec.nu_power(a) * spec.nu_power(a, 2) * du ** 2)
    return IdentityCheck(lhs, rhs, _mismatch(lhs, rhs))


def identity_2_coefficients(a: float, b: float) -> Tuple[float, float]:
    """(a+b)/(2a+b) and (a+2b)/(2a+b)."""
    if 2 * a + b == 0:
        raise DomainError('The second identity needs 2a + b != 0.')
    return (a + b) / (2 * a + b), (a + 2 * b) / (2 * a + b)


def verify_identity_2(u: GridFunction, spec: AbOperatorSpec) -> IdentityCheck:
    """int (L_ab u) |u'|^2 / u nu^a dmu_b
    = c1 int |u'|^4 / u^2 nu^(2a) dmu_b - c2 int u'' |u'|^2 / u nu^(2a) dmu_b.

    Nodes where u vanishes do not contribute.
    """
    _check_grid(u, spec)
    values = u.values
    if np.any(values < 0):
        raise DomainError('The second identity needs a positive function.')
    c1, c2 = identity_2_coefficients(spec.a, spec.b)
    a = spec.a
    du = spec.grid.differentiate(values, 1)
    d2u = spec.grid.differentiate(values, 2)
    positive = values > 0
    inverse = np.where(positive, 1 / np.where(positive, values, 1.0), 0.0)
    square = du ** 2 * inverse
    lhs = spec.integrate(spec.apply(u) * square * spec.nu_power(a))
    rhs = c1 * spec.integrate(square ** 2, 2 * a) \
        - c2 * spec.integrate(d2u * square, 2 * a)
    return IdentityCheck(lhs, rhs, _mismatch(lhs, rhs))


def ultraspherical_spec(params: GNParams, size: int = 801,
                        radius: float = 4.0) -> AbOperatorSpec:
    """L_ab with a = 1 and b = 2/(p-2): nu = 1 - z^2 for p > 2, nu = 1 + y^2 for p < 2."""
    nu = NuKind.OneMinusZ2 if params.is_supercritical else NuKind.OnePlusY2
    return AbOperatorSpec.build(1.0, params.weight_exponent, nu, size, radius)


# rigidity


class Classification(enum.Enum):
    Constant = 'constant'
    Nonconstant = 'nonconstant'
    Diverged = 'diverged'


class RigidityResult(NamedTuple):
    solution: GridFunction
    classification: Classification
    residual: float
    iterations: int
    max_deviation: float


def rigidity_threshold(params: GNParams) -> float:
    """2p / (p - 2)^2, the threshold below which positive solutions are constant."""
    return params.el_coefficient


def _rigidity_grid_check(grid: WeightedGrid, params: GNParams) -> None:
    expected = Measure.NuP if params.is_supercritical else Measure.XiP
    if grid.measure is not expected:
        raise DomainError(
            f'Rigidity for p = {params.p} is solved on a {expected.value} grid.')


def rigidity_residual(f: GridFunction, params: GNParams, lam: float) -> np.ndarray:
    """-L f + lambda f - f^(p-1) for p > 2 and -L f - lambda f + f^(p-1) for p < 2.

    L is the self-adjoint discretization -W^-1 S of the grid.
    """
    values = f.values
    lf = f.grid.weighted_operator() @ values
    power = np.abs(values) ** (params.p - 1)
    if params.is_supercritical:
        return -lf + lam * values - power
    return -lf - lam * values + power


def rigidity_solve(params: GNParams, lam: float, initial: GridFunction,
                   max_iterations: int = 100, tolerance: float = 1e-10,
                   constant_tolerance: float = 1e-6) -> RigidityResult:
    """Damped Newton solve of the Euler-Lagrange equation of the rigidity problem.

    The Jacobian is assembled in the symmetric form S + W (lambda - (p-1) f^(p-2)) for
    p > 2 and S - W (lambda - (p-1) f^(p-2)) for p < 2. Iterates are kept positive by
    step halving.

    Args:
        params: GNParams. p = 6 is excluded for p > 2.
        lam: Positive lambda.
        initial: Strictly positive start on the NuP (p > 2) or XiP (p < 2) grid.
        max_iterations: Newton iteration cap. Default: 100.
        tolerance: Stop when the weighted residual norm drops below this. Default: 1e-10.
        constant_tolerance: Sup distance to lambda^(1/(p-2)) for the Constant class.

    Returns:
        A RigidityResult.
    """
    if not lam > 0:
        raise DomainError(f'lambda must be positive. Got {lam}.')
    if params.p == 6:
        raise DomainError('The rigidity identity is not available at p = 6.')
    _rigidity_grid_check(initial.grid, params)
    if not np.all(initial.values > 0):
        raise DomainError('Newton needs a strictly positive start.')
    grid = initial.grid
    p = params.p
    sign = 1.0 if params.is_supercritical else -1.0
    weights = grid.weights
    stiffness = grid.stiffness_matrix()
    constant = lam ** (1 / (p - 2))

    def norm(values):
        r = rigidity_residual(GridFunction(grid, values), params, lam)
        return math.sqrt(float(np.dot(weights, r ** 2)))

    values = np.array(initial.values, dtype=float)
    current = norm(values)
    iterations = 0
    stalled = False
    while current >= tolerance and iterations < max_iterations:
        iterations += 1
        residual = rigidity_residual(GridFunction(grid, values), params, lam)
        diagonal = sign * weights * (lam - (p - 1) * values ** (p - 2))
        jacobian = (stiffness + sparse.diags(diagonal)).tocsc()
        step = spsolve(jacobian, -weights * residual)
        damping = 1.0
        while damping > 1e-6:
            trial = values + damping * step
            if np.all(trial > 0):
                trial_norm = norm(trial)
                if trial_norm < current:
                    break
            damping *= 0.5
        else:
            stalled = True
            break
        values, current = trial, trial_norm
        logger.debug('Newton %d: residual %.3e, damping %.3g', iterations, current,
                     damping)
    if stalled or current >= tolerance:
        logger.debug('Newton stopped at residual %.3e after %d iterations.', current,
                     iterations)
    deviation = float(np.max(np.abs(values - constant)))
    if current > 1e-8 or float(np.max(values)) < 1e-8:
        classification = Classification.Diverged
    elif deviation <= constant_tolerance:
        classification = Classification.Constant
    else:
        classification = Classification.Nonconstant
    return RigidityResult(GridFunction(grid, values), classification, current,
                          iterations, deviation)


def perturbed_starts(params: GNParams, lam: float, grid: WeightedGrid, count: int = 20,
                     seed: int = 0, amplitude: float = 0.3) -> List[GridFunction]:
    """Seeded smooth positive perturbations of the constant solution.

    The perturbation is a random combination of the first four Legendre (p > 2) or
    scaled arctan (p < 2) modes.
    """
    rng = np.random.default_rng(seed)
    constant = lam ** (1 / (params.p - 2))
    x = grid.nodes
    z = x if params.is_supercritical else 2 / math.pi * np.arctan(x)
    modes = np.array([np.polynomial.legendre.Legendre.basis(k)(z) for k in range(1, 5)])
    starts = []
    for _ in range(count):
        coefficients = rng.uniform(-1, 1, len(modes))
        shape = coefficients @ modes
        shape /= max(float(np.max(np.abs(shape))), 1e-12)
        starts.append(GridFunction(grid, constant * (1 + amplitude * shape), True))
    return starts


class RigidityIdentity(NamedTuple):
    term1: float
    term2: float
    total: float
    coefficient: float
    orthogonality: float


def ultraspherical_apply(u: GridFunction, params: GNParams) -> np.ndarray:
    """L u = nu u'' + (1 + a) nu' u' with a = 2 / (p - 2), by finite differences."""
    grid = u.grid
    x = grid.nodes
    du = grid.differentiate(u.values, 1)
    d2u = grid.differentiate(u.values, 2)
    nu_slope = -2 * x if params.is_supercritical else 2 * x
    return grid.diffusivity * d2u + (1 + params.weight_exponent) * nu_slope * du


def rigidity_identity_check(f: GridFunction, params: GNParams,
                            lam: float) -> RigidityIdentity:
    """Evaluate the quadratures of the rigidity identity for a solution f = u^beta.

    p > 2: 0 = (2p/(p-2) - lambda (kappa-1)/beta) int |u'|^2 nu
                + int |u'' - (p+2)/(6-p) |u'|^2 / u|^2 nu^2.
    p < 2: the same with 2p/(2-p) + lambda (kappa-1)/beta and xi in place of nu.
    Also returns int (L u + kappa |u'|^2 / u nu) u^kappa, which vanishes for every u.
    """
    _rigidity_grid_check(f.grid, params)
    if params.p == 6:
        raise DomainError('The rigidity identity is not available at p = 6.')
    if not np.all(f.values > 0):
        raise DomainError('The rigidity identity needs a positive function.')
    p = params.p
    beta, kappa = params.beta, params.kappa
    grid = f.grid
    u = f.with_values(f.values ** (1 / beta))
    du = grid.differentiate(u.values, 1)
    d2u = grid.differentiate(u.values, 2)
    nu = grid.diffusivity
    ratio = (kappa - 1) / beta
    if params.is_supercritical:
        coefficient = 2 * p / (p - 2) - lam * ratio
    else:
        coefficient = 2 * p / (2 - p) + lam * ratio
    term1 = coefficient * grid.integrate(du ** 2 * nu)
    square = (d2u - (p + 2) / (6 - p) * du ** 2 / u.values) ** 2
    term2 = grid.integrate(square * nu ** 2)
    orthogonality = grid.integrate(
        (ultraspherical_apply(u, params) + kappa * du ** 2 / u.values * nu)
        * u.values ** kappa)
    return RigidityIdentity(term1, term2, term1 + term2, coefficient, orthogonality)


class ScanRow(NamedTuple):
    lam: float
    classification: Classification
    max_deviation: float


def _scan_one(params: GNParams, lam: float, grid: WeightedGrid, starts: int,
              seed: int) -> ScanRow:
    results = [rigidity_solve(params, lam, start)
               for start in perturbed_starts(params, lam, grid, starts, seed)]
    classes = {r.classification for r in results}
    if Classification.Nonconstant in classes:
        classification = Classification.Nonconstant
    elif classes == {Classification.Constant}:
        classification = Classification.Constant
    else:
        classification = Classification.Diverged
    converged = [r.max_deviation for r in results
                 if r.classification is not Classification.Diverged]
    return ScanRow(lam, classification, max(converged) if converged else math.nan)


def scan_lambdas(params: GNParams) -> np.ndarray:
    """lambda / threshold from 0.2 to 2 in steps of 0.05."""
    return rigidity_threshold(params) * np.round(np.arange(0.2, 2.0 + 1e-9, 0.05), 10)


def lambda_scan(params: GNParams, grid: WeightedGrid, lambdas: Sequence[float] = None,
                starts: int = 20, seed: int = 0, workers: int = None) -> List[ScanRow]:
    """Classify the Newton solutions from perturbed starts over a range of lambda.

    Each lambda is one task of a thread pool. A lambda is Nonconstant when any start
    converges to a nonconstant solution.
    """
    _rigidity_grid_check(grid, params)
    lambdas = scan_lambdas(params) if lambdas is None else lambdas
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(
            lambda lam: _scan_one(params, float(lam), grid, starts, seed), lambdas))
    logger.info('Scanned %d values of lambda for p=%g.', len(rows), params.p)
    return rows
