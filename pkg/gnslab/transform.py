"""Changes of variables between the line, the interval and the radial half line."""

import enum
import math
from typing import Callable, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .constants import GNParams, log_zeta_p
from .errors import DomainError
from .grid import GridFunction, Measure, WeightedGrid


class TransformKind(enum.Enum):
    """Available changes of variables.

    TanhMap: z = tanh x and v = v_star f(z) for p > 2.
    TanMap: y = tan x and v = v_star f(y) for 1 < p < 2.
    Stereographic: z = 1 - 2 / (1 + r^2) and f(z) = (1 - z)^(1 - d/2) u(r).
    EmdenFowler: u(r) = r^(1 - d/2) v(log r).
    """
    TanhMap = 'tanh'
    TanMap = 'tan'
    Stereographic = 'stereographic'
    EmdenFowler = 'emden-fowler'


class Direction(enum.Enum):
    Forward = 'forward'
    Inverse = 'inverse'


def log_v_star(x: np.ndarray, params: GNParams) -> np.ndarray:
    """Log of the line optimizer cosh(x)^(-2/(p-2)) or cos(x)^(2/(2-p))."""
    x = np.asarray(x, dtype=float)
    if params.is_supercritical:
        ax = np.abs(x)
        log_cosh = ax + np.log1p(np.exp(-2 * ax)) - math.log(2)
        return -params.weight_exponent * log_cosh
    with np.errstate(divide='ignore'):
        return -params.weight_exponent * np.log(np.cos(x))


class TransformSpec:
    """A change of variables together with its direction.

    Args:
        kind: A TransformKind.
        params: GNParams of the exponent the change of variables is attached to.
        direction: A Direction. Default: Forward.
    """

    def __init__(self, kind: TransformKind, params: GNParams,
                 direction: Direction = Direction.Forward) -> None:
        if kind is TransformKind.TanMap and params.is_supercritical:
            raise DomainError('TanMap is attached to 1 < p < 2.')
        if kind is not TransformKind.TanMap and not params.is_supercritical:
            raise DomainError(f'{kind.name} is attached to p > 2.')
        self._kind = kind
        self._params = params
        self._direction = direction

    @property
    def kind(self) -> TransformKind:
        return self._kind

    @property
    def params(self) -> GNParams:
        return self._params

    @property
    def direction(self) -> Direction:
        return self._direction

    @property
    def half_exponent(self) -> float:
        """d/2 - 1 = 2 / (p - 2) for the radial transforms."""
        return self._params.weight_exponent

    def inverse(self) -> 'TransformSpec':
        """The same change of variables in the other direction."""
        other = Direction.Inverse if self._direction is Direction.Forward \
            else Direction.Forward
        return TransformSpec(self._kind, self._params, other)

    def map_nodes(self, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Map source coordinates to target coordinates.

        Returns:
            Target coordinates and the Jacobian d(target)/d(source).
        """
        t = np.asarray(nodes, dtype=float)
        kind, forward = self._kind, self._direction is Direction.Forward
        if kind is TransformKind.TanhMap:
            if forward:  # z -> x
                return np.arctanh(t), 1 / (1 - t ** 2)
            return np.tanh(t), 1 / np.cosh(t) ** 2
        if kind is TransformKind.TanMap:
            if forward:  # y -> x
                return np.arctan(t), 1 / (1 + t ** 2)
            return np.tan(t), 1 / np.cos(t) ** 2
        if kind is TransformKind.Stereographic:
            if forward:  # z -> r
                r = np.sqrt((1 + t) / (1 - t))
                return r, 1 / (r * (1 - t) ** 2)
            return 1 - 2 / (1 + t ** 2), 4 * t / (1 + t ** 2) ** 2
        if forward:  # Emden-Fowler, x -> r
            r = np.exp(t)
            return r, r
        return np.log(t), 1 / t

    def factor(self, source: np.ndarray) -> np.ndarray:
        """Multiplier applied to source values at source coordinates."""
        t = np.asarray(source, dtype=float)
        kind, forward = self._kind, self._direction is Direction.Forward
        s = self.half_exponent
        if kind is TransformKind.TanhMap:
            x = np.arctanh(t) if forward else t
            log_fac = log_v_star(x, self._params)
            return np.exp(log_fac if forward else -log_fac)
        if kind is TransformKind.TanMap:
            x = np.arctan(t) if forward else t
            log_fac = log_v_star(x, self._params)
            return np.exp(log_fac if forward else -log_fac)
        if kind is TransformKind.Stereographic:
            if forward:  # u(r) = (1 - z)^s f(z)
                return (1 - t) ** s
            return (2 / (1 + t ** 2)) ** (-s)
        if forward:  # u(r) = e^(-s x) v(x)
            return np.exp(-s * t)
        return t ** s  # v(x) = r^s u(r)

    def _check_source(self, grid: WeightedGrid) -> None:
        nodes = grid.nodes
        kind, forward = self._kind, self._direction is Direction.Forward
        if kind is TransformKind.TanhMap and forward or \
                kind is TransformKind.Stereographic and forward:
            ok = nodes[0] > -1 and nodes[-1] < 1
        elif kind is TransformKind.TanMap and not forward:
            ok = nodes[0] > -math.pi / 2 and nodes[-1] < math.pi / 2
        elif kind is TransformKind.Stereographic and not forward or \
                kind is TransformKind.EmdenFowler and not forward:
            ok = nodes[0] > 0
        else:
            ok = True
        if not ok:
            raise DomainError(
                f'Grid on [{nodes[0]}, {nodes[-1]}] is not in the domain of the '
                f'{self._direction.value} {kind.value} transform.')

    def __repr__(self) -> str:
        return f'TransformSpec: {self._kind.value} | {self._direction.value}'


def transform(f: GridFunction, spec: TransformSpec,
              target: WeightedGrid = None) -> GridFunction:
    """Apply a change of variables to a GridFunction.

    Without a target grid, the source nodes are carried over to the new variable and
    the Lebesgue weights are multiplied by the Jacobian. With a target grid, the
    source is interpolated by a cubic spline at the preimages of the target nodes.

    Args:
        f: Source GridFunction.
        spec: A TransformSpec.
        target: Optional WeightedGrid in the target variable.

    Returns:
        A GridFunction in the target variable.
    """
    spec._check_source(f.grid)
    if target is None:
        nodes, jacobian = spec.map_nodes(f.grid.nodes)
        weights = f.grid.lebesgue_weights * np.abs(jacobian)
        if nodes[0] > nodes[-1]:
            nodes, weights = nodes[::-1], weights[::-1]
            values = (f.values * spec.factor(f.grid.nodes))[::-1]
        else:
            values = f.values * spec.factor(f.grid.nodes)
        grid = WeightedGrid(nodes, weights, Measure.Lebesgue, f.grid.family,
                            params=spec.params)
        positive = f.strictly_positive and bool(np.all(values > 0))
        return GridFunction(grid, values, positive)
    source_nodes, _ = spec.inverse().map_nodes(target.nodes)
    lo, hi = f.grid.nodes[0], f.grid.nodes[-1]
    if np.any(source_nodes < lo - 1e-12 * (1 + abs(lo))) or \
            np.any(source_nodes > hi + 1e-12 * (1 + abs(hi))):
        raise DomainError('Target grid reaches outside the source grid after mapping.')
    spline = CubicSpline(f.grid.nodes, f.values)
    values = spline(np.clip(source_nodes, lo, hi)) * spec.factor(source_nodes)
    return GridFunction(target, values)


def stereographic_inequality_check(
        u: Callable, du: Callable, params: GNParams) -> Tuple[float, float, float]:
    """Both sides of the radial inequality reached after the stereographic projection.

    int |u'|^2 r^(d-1) dr >= d (d - 2) / 4 zeta_p^(1 - 2/p) (int |u|^p r^(d-1) dr)^(2/p)

    Args:
        u: Vectorized callable for u on (0, inf).
        du: Its derivative.
        params: GNParams with p > 2.

    Returns:
        A tuple of (lhs, rhs, lhs - rhs).
    """
    if not params.is_supercritical:
        raise DomainError('The radial inequality is attached to p > 2.')
    d, p = params.d, params.p
    opts = dict(limit=400, epsabs=0, epsrel=1e-12)
    lhs = quad(lambda r: du(r) ** 2 * r ** (d - 1), 0, 1, **opts)[0] \
        + quad(lambda r: du(r) ** 2 * r ** (d - 1), 1, np.inf, **opts)[0]
    mass = quad(lambda r: abs(u(r)) ** p * r ** (d - 1), 0, 1, **opts)[0] \
        + quad(lambda r: abs(u(r)) ** p * r ** (d - 1), 1, np.inf, **opts)[0]
    rhs = 0.25 * d * (d - 2) * math.exp((1 - 2 / p) * log_zeta_p(params)) \
        * mass ** (2 / p)
    return lhs, rhs, lhs - rhs
