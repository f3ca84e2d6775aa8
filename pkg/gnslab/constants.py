"""Exponents, Gamma ratios and the closed-form constants of the GNS inequalities."""

import enum
import math
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import gammaln

from ._helper import as_float
from .errors import DomainError

LOG_PI = math.log(math.pi)


class Regime(enum.Enum):
    """Which of the two inequality families an exponent belongs to."""
    Supercritical = 'supercritical'  # p > 2
    Subcritical = 'subcritical'  # 1 < p < 2


class GNParams:
    """Exponent p of a one dimensional Gagliardo-Nirenberg-Sobolev inequality.

    All derived exponents are recomputed from p on access.

    Args:
        p: A real number with p > 1 and p != 2.
    """

    def __init__(self, p: float) -> None:
        p = as_float(p, 'p')
        if not math.isfinite(p) or p <= 1:
            raise DomainError(f'The exponent p must be larger than 1. Got {p}.')
        if p == 2:
            raise DomainError(
                'p = 2 is the logarithmic Sobolev limit and has no GNParams. '
                'Use log_sobolev_limits instead.')
        self._p = p

    @property
    def p(self) -> float:
        return self._p

    @property
    def regime(self) -> Regime:
        return Regime.Supercritical if self._p > 2 else Regime.Subcritical

    @property
    def is_supercritical(self) -> bool:
        return self._p > 2

    @property
    def theta(self) -> float:
        """Interpolation exponent (p - 2) / (2p)."""
        return (self._p - 2) / (2 * self._p)

    @property
    def eta(self) -> float:
        """Interpolation exponent (2 - p) / (2 + p)."""
        return (2 - self._p) / (2 + self._p)

    @property
    def d(self) -> Union[float, None]:
        """The dimension 2p / (p - 2) attached to the ultraspherical operator.

        None for 1 < p < 2.
        """
        return 2 * self._p / (self._p - 2) if self.is_supercritical else None

    @property
    def beta(self) -> Union[float, None]:
        """4 / (6 - p). None at p = 6."""
        return None if self._p == 6 else 4 / (6 - self._p)

    @property
    def kappa(self) -> Union[float, None]:
        """beta (p - 2) + 1. None at p = 6."""
        beta = self.beta
        return None if beta is None else beta * (self._p - 2) + 1

    @property
    def q_dual(self) -> float:
        """Exponent q of the dual optimizer (1 + y^2)^-q."""
        p = self._p
        return (3 * p - 2) / (2 * (p - 2)) if p > 2 else (4 - p) / (2 - p)

    @property
    def m_fd(self) -> float:
        """Exponent m of the dual quotient and of the fast diffusion equation."""
        p = self._p
        return (p + 2) / (3 * p - 2) if p > 2 else 2 / (4 - p)

    @property
    def weight_exponent(self) -> float:
        """Power of the weight in the probability measure of the ultraspherical frame.

        2 / (p - 2) on (-1, 1) for p > 2 and -2 / (2 - p) on the line for p < 2.
        """
        return 2 / (self._p - 2)

    @property
    def el_coefficient(self) -> float:
        """The factor 2p / (p - 2)^2 that appears in the flows and rigidity threshold."""
        return 2 * self._p / (self._p - 2) ** 2

    @property
    def drift_coefficient(self) -> float:
        """2p / |p - 2|, the drift coefficient of the ultraspherical operator."""
        return 2 * self._p / abs(self._p - 2)

    def to_dict(self) -> dict:
        """Get a dictionary of the exponent and its derived quantities."""
        return {
            'p': self.p, 'regime': self.regime.value, 'theta': self.theta,
            'eta': self.eta, 'd': self.d, 'beta': self.beta, 'kappa': self.kappa,
            'q_dual': self.q_dual, 'm_fd': self.m_fd
        }

    def __eq__(self, other) -> bool:
        return isinstance(other, GNParams) and other.p == self.p

    def __hash__(self) -> int:
        return hash(('GNParams', self._p))

    def __repr__(self) -> str:
        return f'GNParams(p={self._p!r})'


class ConstantsTable(BaseModel):
    """Closed-form constants for one exponent."""
    p: float = Field(..., description='The exponent.')
    c_p: float = Field(..., description='Transport constant relating sup and inf.')
    i2_or_j2: float = Field(
        ..., description='Squared L2 norm of the primal optimizer.')
    c1_or_c2: float = Field(
        ..., description='Common value of c_p times the primal inf and of the dual sup.')
    c_gn: float = Field(..., description='Best constant of the GNS inequality.')
    zeta_p: float = Field(
        ..., description='Normalization of the ultraspherical probability measure.')


def log_gamma(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Natural logarithm of the Gamma function for positive arguments."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError(f'log_gamma is only defined for x > 0. Got {x}.')
    value = gammaln(arr)
    return float(value) if np.ndim(value) == 0 else value


def log_h_of_q(q: float) -> float:
    q = as_float(q, 'q')
    if not q > 0.5:
        raise DomainError(
            f'h(q) = integral of (1 + y^2)^-q diverges for q <= 1/2. Got {q}.')
    return 0.5 * LOG_PI + log_gamma(q - 0.5) - log_gamma(q)


def h_of_q(q: float) -> float:
    """Integral of (1 + y^2)^-q over the real line, sqrt(pi) Gamma(q - 1/2) / Gamma(q).

    Args:
        q: A real number larger than 1/2.
    """
    return math.exp(log_h_of_q(q))


def log_c_p(params: GNParams) -> float:
    p = params.p
    if params.is_supercritical:
        return 2 * (p - 2) / (3 * p - 2) * math.log((p + 2) / 2)
    return (2 - p) / (4 - p) * math.log(2)


def log_zeta_p(params: GNParams) -> float:
    """Log of the mass of the weight that defines the ultraspherical measure."""
    p = params.p
    if params.is_supercritical:
        return 0.5 * LOG_PI + log_gamma(p / (p - 2)) \
            - log_gamma((3 * p - 2) / (2 * (p - 2)))
    return log_h_of_q(2 / (2 - p))


def log_optimizer_l2(params: GNParams) -> float:
    """Log of I2 (p > 2) or J2 (p < 2), the squared L2 norm of the primal optimizer."""
    p = params.p
    if params.is_supercritical:
        return 0.5 * LOG_PI + log_gamma(2 / (p - 2)) \
            - log_gamma((p + 2) / (2 * (p - 2)))
    return log_h_of_q((4 - p) / (2 - p))


def log_c1_or_c2(params: GNParams) -> float:
    p = params.p
    log_norm = log_optimizer_l2(params)
    if params.is_supercritical:
        den = 3 * p - 2
        return (p + 2) / den * math.log(p + 2) - 4 / den * math.log(4) \
            - (p - 2) / den * math.log(p - 2) + 2 * (p - 2) / den * log_norm
    den = 4 - p
    return math.log(4) - (6 - p) / (2 * den) * math.log(2 + p) \
        - (2 - p) / (2 * den) * math.log(2 - p) + (2 - p) / den * log_norm


def log_c_gn(params: GNParams) -> float:
    p = params.p
    ratio = log_c1_or_c2(params) - log_c_p(params)
    if params.is_supercritical:
        return (3 * p - 2) / (4 * p) * ratio
    return (4 - p) / (2 + p) * ratio


def constants_for(params: GNParams) -> ConstantsTable:
    """Evaluate the closed-form constants of an exponent.

    Every entry is composed in the log domain from log_gamma.
    """
    return ConstantsTable(
        p=params.p,
        c_p=math.exp(log_c_p(params)),
        i2_or_j2=math.exp(log_optimizer_l2(params)),
        c1_or_c2=math.exp(log_c1_or_c2(params)),
        c_gn=math.exp(log_c_gn(params)),
        zeta_p=math.exp(log_zeta_p(params))
    )


def lyapunov_constant(params: GNParams) -> float:
    """The constant that makes the Lyapunov functionals vanish at the optimizer.

    Equals (2p / (p - 2)^2) zeta_p^(1 - 2/p) in both regimes.
    """
    p = params.p
    return params.el_coefficient * math.exp((1 - 2 / p) * log_zeta_p(params))


def log_sobolev_limits() -> Tuple[float, float]:
    """Analytic limit of C1 and C2 at p = 2 and the slope 4 dC1/dp at p = 2."""
    return 1.0, 1 + math.log(2 * math.pi)


def log_sobolev_estimates(h: float) -> dict:
    """Finite difference estimates of the log-Sobolev limits at p = 2 +- h.

    Args:
        h: Offset from p = 2. It must lie in (0, 1).

    Returns:
        A dictionary with the constants on both sides and the slope estimates
        4 (C1(2 + h) - 1) / h and 4 (C2(2 - h) - 1) / h. Both constants approach 1
        from above.
    """
    h = as_float(h, 'h')
    if not 0 < h < 1:
        raise DomainError(f'h must be in (0, 1). Got {h}.')
    c1 = math.exp(log_c1_or_c2(GNParams(2 + h)))
    c2 = math.exp(log_c1_or_c2(GNParams(2 - h)))
    return {
        'h': h,
        'c1': c1,
        'c2': c2,
        'slope_above': 4 * (c1 - 1) / h,
        'slope_below': 4 * (c2 - 1) / h,
        'c_p_above': math.exp(log_c_p(GNParams(2 + h))),
        'c_p_below': math.exp(log_c_p(GNParams(2 - h)))
    }
