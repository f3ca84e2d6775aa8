"""Functionals evaluated on grid functions: Lyapunov functionals, GNS quotients,
the generalized entropy and the action."""

import enum
import math
from typing import Dict, NamedTuple, Tuple, Union

import numpy as np

from .constants import GNParams, log_optimizer_l2, log_zeta_p, lyapunov_constant
from .errors import DomainError
from .grid import GridFunction, Measure


class FunctionalName(enum.Enum):
    LyapunovLine = 'lyapunov_line'
    LyapunovUltra = 'lyapunov_ultra'
    PrimalQuotient = 'primal_quotient'
    DualQuotient = 'dual_quotient'
    Entropy1 = 'entropy_f1'
    Action = 'action'
    GFunctional = 'g_functional'


class FunctionalValue:
    """Value of a functional together with the parts it is assembled from.

    Args:
        name: A FunctionalName.
        value: The value.
        breakdown: Named parts. ``value`` is an explicit arithmetic combination of them.
    """

    def __init__(self, name: FunctionalName, value: float,
                 breakdown: Dict[str, float] = None) -> None:
        self._name = name
        self._value = float(value)
        self._breakdown = dict(breakdown or {})

    @property
    def name(self) -> FunctionalName:
        return self._name

    @property
    def value(self) -> float:
        return self._value

    @property
    def breakdown(self) -> Dict[str, float]:
        return dict(self._breakdown)

    def __float__(self) -> float:
        return self._value

    def __repr__(self) -> str:
        return f'{self._name.value}: {self._value:.12g}'


def _power_integral(f: GridFunction, exponent: float) -> float:
    return f.grid.integrate(np.abs(f.values) ** exponent)


def _gradient_integral(f: GridFunction, weight: np.ndarray = None) -> float:
    df = f.grid.differentiate(f.values, 1)
    integrand = df ** 2 if weight is None else df ** 2 * weight
    return f.grid.integrate(integrand)


def _norm_power(integral: float, p: float) -> float:
    """(int |f|^p)^(2/p) in the log domain."""
    if integral <= 0:
        return 0.0
    return math.exp(2 / p * math.log(integral))


def lyapunov_line(v: GridFunction, params: GNParams) -> FunctionalValue:
    """Deficit of the GNS inequality written on the line.

    p > 2: |v'|^2 + 4/(p-2)^2 |v|_2^2 - C |v|_p^2.
    p < 2: |v'|^2 + C |v|_p^2 - 4/(2-p)^2 |v|_2^2.

    C is fixed by the closed-form constants so the functional vanishes at the
    optimizer. Every term is divided by zeta_p, the mass of v_star^p, so the value
    equals lyapunov_ultra of the transformed function.
    """
    if v.grid.measure is not Measure.Lebesgue:
        raise DomainError('lyapunov_line expects a Lebesgue grid in the line variable.')
    p = params.p
    scale = math.exp(-log_zeta_p(params))
    gradient = scale * _gradient_integral(v)
    mass_term = scale * 4 / (p - 2) ** 2 * v.grid.integrate(v.values ** 2)
    norm_term = scale * lyapunov_constant(params) * _norm_power(_power_integral(v, p), p)
    if params.is_supercritical:
        value = gradient + mass_term - norm_term
    else:
        value = gradient + norm_term - mass_term
    return FunctionalValue(
        FunctionalName.LyapunovLine, value,
        {'gradient_term': gradient, 'mass_term': mass_term, 'norm_term': norm_term})


def lyapunov_ultra(f: GridFunction, params: GNParams) -> FunctionalValue:
    """The same deficit in ultraspherical variables.

    p > 2: int |f'|^2 nu + c (int f^2 - (int f^p)^(2/p)) on the NuP grid.
    p < 2: int |f'|^2 xi + c ((int f^p)^(2/p) - int f^2) on the XiP grid.
    c = 2p / (p - 2)^2.
    """
    expected = Measure.NuP if params.is_supercritical else Measure.XiP
    if f.grid.measure is not expected:
        raise DomainError(
            f'lyapunov_ultra for p = {params.p} expects a {expected.value} grid.')
    p = params.p
    gradient = _gradient_integral(f, f.grid.diffusivity)
    mass_term = params.el_coefficient * f.grid.integrate(f.values ** 2)
    norm_term = params.el_coefficient * _norm_power(_power_integral(f, p), p)
    if params.is_supercritical:
        value = gradient + mass_term - norm_term
    else:
        value = gradient + norm_term - mass_term
    return FunctionalValue(
        FunctionalName.LyapunovUltra, value,
        {'gradient_term': gradient, 'mass_term': mass_term, 'norm_term': norm_term})


def primal_exponents(params: GNParams) -> Tuple[float, float, float]:
    """Exponents (a, b, c) of the primal quotient A^a S^b B^c.

    A = int |f'|^2, S = int f^2 and B = int |f|^p.
    """
    p = params.p
    if params.is_supercritical:
        den = 3 * p - 2
        return (p - 2) / den, (p + 2) / den, -4 / den
    den = 2 * (4 - p)
    return (2 - p) / den, -(p + 2) / den, 4 / den


def dual_exponents(params: GNParams) -> Tuple[float, float, float]:
    """Exponents (m, s, r) of the dual quotient int G^m / (M2^s M0^r)."""
    p = params.p
    if params.is_supercritical:
        den = 3 * p - 2
        return params.m_fd, (p - 2) / den, 4 / den
    den = 2 * (4 - p)
    return params.m_fd, (2 - p) / den, (p + 2) / den


def primal_quotient(f: GridFunction, params: GNParams) -> FunctionalValue:
    """Right hand side quotient of the duality theorem, without the factor c_p.

    Invariant under f -> lambda f(mu (x - x0)).
    """
    gradient = _gradient_integral(f)
    l2 = f.grid.integrate(f.values ** 2)
    lp = _power_integral(f, params.p)
    if min(gradient, l2, lp) <= 0:
        raise DomainError('primal_quotient needs a non-constant, non-zero function.')
    a, b, c = primal_exponents(params)
    value = math.exp(a * math.log(gradient) + b * math.log(l2) + c * math.log(lp))
    return FunctionalValue(
        FunctionalName.PrimalQuotient, value,
        {'gradient': gradient, 'l2': l2, 'lp': lp})


def dual_quotient(G: GridFunction, params: GNParams) -> FunctionalValue:
    """Left hand side quotient of the duality theorem.

    int G^m / ((int G |y|^2)^s (int G)^r), invariant under G -> lambda G(mu y).
    """
    if np.any(G.values < 0):
        raise DomainError('dual_quotient needs a non-negative density.')
    m, s, r = dual_exponents(params)
    power = _power_integral(G, m)
    moment = G.grid.integrate(G.values * G.grid.nodes ** 2)
    mass = G.grid.integrate(G.values)
    if min(power, moment, mass) <= 0:
        raise DomainError('dual_quotient needs positive mass and second moment.')
    value = math.exp(math.log(power) - s * math.log(moment) - r * math.log(mass))
    return FunctionalValue(
        FunctionalName.DualQuotient, value,
        {'power': power, 'second_moment': moment, 'mass': mass})


def gns_quotient(f: GridFunction, params: GNParams) -> float:
    """|f'|^theta |f|_2^(1-theta) / |f|_p for p > 2 and the analogue
    |f'|^eta |f|_p^(1-eta) / |f|_2 for p < 2.

    The infimum over f is C_GN.
    """
    gradient = math.sqrt(_gradient_integral(f))
    l2 = math.sqrt(f.grid.integrate(f.values ** 2))
    lp = _power_integral(f, params.p) ** (1 / params.p)
    if params.is_supercritical:
        theta = params.theta
        return gradient ** theta * l2 ** (1 - theta) / lp
    eta = params.eta
    return gradient ** eta * lp ** (1 - eta) / l2


def _check_m(m: float) -> None:
    if not 0 < m < 1:
        raise DomainError(f'The fast diffusion exponent must be in (0, 1). Got {m}.')


def entropy_f1(G: GridFunction, m: float) -> FunctionalValue:
    """Generalized entropy int G^m / (m - 1) + 1/2 int G |y|^2."""
    _check_m(m)
    power = _power_integral(G, m)
    moment = G.grid.integrate(G.values * G.grid.nodes ** 2)
    value = power / (m - 1) + 0.5 * moment
    return FunctionalValue(
        FunctionalName.Entropy1, value, {'power': power, 'second_moment': moment})


def f1_optimal_scale(G: GridFunction, m: float) -> float:
    """The lambda that minimizes F1 over the dilations lambda G(lambda y)."""
    parts = entropy_f1(G, m).breakdown
    return (parts['second_moment'] / parts['power']) ** (1 / (1 + m))


def f1_scaling_optimum(G: GridFunction, m: float) -> float:
    """Lower bound of F1 obtained by optimizing over the dilations of G.

    (1/2 - 1/(1-m)) (int G^m)^(2/(1+m)) (int G |y|^2)^(-(1-m)/(1+m)).
    """
    parts = entropy_f1(G, m).breakdown
    power, moment = parts['power'], parts['second_moment']
    return (0.5 - 1 / (1 - m)) * power ** (2 / (1 + m)) \
        * moment ** (-(1 - m) / (1 + m))


def action(rho: GridFunction, w: GridFunction, alpha: float) -> FunctionalValue:
    """Action int |w|^2 / rho^alpha of a density rho and a flux w."""
    if rho.grid is not w.grid:
        raise DomainError('rho and w must live on the same grid.')
    if not np.all(rho.values > 0):
        raise DomainError('The action needs a strictly positive density.')
    kinetic = rho.grid.integrate(w.values ** 2 * rho.values ** (-alpha))
    return FunctionalValue(FunctionalName.Action, kinetic, {'kinetic': kinetic})


class ConvexityCheck(NamedTuple):
    """Outcome of a sampled convexity check of (rho, w) -> w^2 rho^-alpha."""
    alpha: float
    convex: bool
    checked: int
    witness: Union[dict, None]


def _action_density(rho, w, alpha):
    return w ** 2 * rho ** (-alpha)


def convexity_check(alpha: float, seed: int = 0, samples: int = 2000,
                    tolerance: float = 1e-10) -> ConvexityCheck:
    """Look for a violation of convexity of the action density.

    The action is convex exactly when the integrand phi(rho, w) = w^2 rho^-alpha is
    convex on (0, inf) x R. Candidate pairs are a negative curvature direction of the
    Hessian at (1, 1), pairs on a ray, pairs with the same w, and seeded random pairs.

    Returns:
        A ConvexityCheck. ``witness`` holds the first violating pair.
    """
    pairs = []
    hessian = np.array([
        [alpha * (alpha + 1), -2 * alpha],
        [-2 * alpha, 2.0]])
    eigvals, eigvecs = np.linalg.eigh(hessian)
    if eigvals[0] < 0:
        direction = 0.1 * eigvecs[:, 0]
        pairs.append(((1 + direction[0], 1 + direction[1]),
                      (1 - direction[0], 1 - direction[1]), 0.5))
    pairs.append(((1.0, 1.0), (2.0, 2.0), 0.5))
    pairs.append(((1.0, 1.0), (2.0, 1.0), 0.5))
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        rho = rng.uniform(0.1, 3.0, 2)
        w = rng.uniform(-3.0, 3.0, 2)
        pairs.append(((rho[0], w[0]), (rho[1], w[1]), rng.uniform(0.05, 0.95)))
    for first, second, t in pairs:
        rho = t * first[0] + (1 - t) * second[0]
        w = t * first[1] + (1 - t) * second[1]
        lhs = _action_density(rho, w, alpha)
        rhs = t * _action_density(*first, alpha) + (1 - t) * _action_density(*second,
                                                                             alpha)
        if lhs > rhs + tolerance * max(abs(rhs), 1.0):
            witness = {'first': list(first), 'second': list(second), 't': t,
                       'lhs': lhs, 'rhs': rhs}
            return ConvexityCheck(alpha, False, len(pairs), witness)
    return ConvexityCheck(alpha, True, len(pairs), None)


def g_constant(params: GNParams) -> float:
    """Constant that makes min G[f] = 0 for 1 < p < 2."""
    if params.is_supercritical:
        raise DomainError('The functional G is attached to 1 < p < 2.')
    p = params.p
    l2 = math.exp(log_optimizer_l2(params))
    gradient = 4 * l2 / ((2 - p) * (2 + p))
    lp = 4 * l2 / (p + 2)
    mu = (2 - p) / 2
    r = (p + 2) / (6 - p)
    return (mu * gradient + lp / mu) / (l2 / mu) ** r


def g_functional(f: GridFunction, params: GNParams) -> FunctionalValue:
    """int |f'|^2 + int |f|^p - C (int f^2)^((p+2)/(6-p)) for 1 < p < 2.

    The minimum is 0 and it is reached at f_*((2 - p) x / 2).
    """
    constant = g_constant(params)
    p = params.p
    gradient = _gradient_integral(f)
    lp = _power_integral(f, p)
    mass_term = constant * f.grid.integrate(f.values ** 2) ** ((p + 2) / (6 - p))
    value = gradient + lp - mass_term
    return FunctionalValue(
        FunctionalName.GFunctional, value,
        {'gradient': gradient, 'lp': lp, 'mass_term': mass_term})
