"""Weighted collocation grids, quadrature and finite differences."""

import enum
import math
import threading
from typing import Callable, Union

import numpy as np
from scipy import sparse

from .constants import GNParams, log_zeta_p
from .errors import DomainError

STENCIL = 5


class Measure(enum.Enum):
    """Measure attached to the quadrature weights of a grid."""
    Lebesgue = 'lebesgue'
    NuP = 'nu_p'  # (1 - z^2)^(2/(p-2)) dz / zeta_p on (-1, 1)
    XiP = 'xi_p'  # (1 + y^2)^(-2/(2-p)) dy / zeta_p on the line


class GridFamily(enum.Enum):
    """How the nodes are laid out."""
    Uniform = 'uniform'
    Cosine = 'cosine'
    Tangent = 'tangent'


def fornberg_weights(z: float, x: np.ndarray, order: int) -> np.ndarray:
    """Finite difference weights for derivatives 0..order at z from the nodes x.

    Returns:
        An array of shape (len(x), order + 1). Column k holds the weights of the
        k-th derivative.
    """
    n = len(x)
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _trapezoid_weights(spacing: np.ndarray) -> np.ndarray:
    weights = np.zeros(len(spacing) + 1)
    weights[:-1] += 0.5 * spacing
    weights[1:] += 0.5 * spacing
    return weights


class WeightedGrid:
    """A one dimensional grid with quadrature weights for a measure.

    Use the class methods to build grids. The constructor does not check that the
    weights approximate the density, it only checks ordering and positivity.

    Args:
        nodes: Strictly increasing node coordinates.
        weights: Strictly positive quadrature weights.
        measure: A Measure. Default: Lebesgue.
        family: A GridFamily. Default: Uniform.
        params: GNParams for the NuP and XiP measures.
        radius: Truncation radius for grids on the whole line.
        density: Callable that evaluates the density of the measure with respect to
            the Lebesgue measure in the node variable. Defaults to 1.
        diffusivity: Callable for the weight nu = 1 - z^2 or xi = 1 + y^2 that multiplies
            the second derivative in the attached operator. Defaults to 1.
        raw_mass: Sum of the unnormalized weights divided by the exact mass of the
            density. Only recorded for probability measures.
    """

    def __init__(
            self, nodes: np.ndarray, weights: np.ndarray,
            measure: Measure = Measure.Lebesgue, family: GridFamily = GridFamily.Uniform,
            params: GNParams = None, radius: float = None, density: Callable = None,
            diffusivity: Callable = None, raw_mass: float = None) -> None:
        nodes = np.array(nodes, dtype=float)
        weights = np.array(weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise DomainError('Nodes and weights must be 1D arrays of the same length.')
        if len(nodes) < STENCIL:
            raise DomainError(f'A grid needs at least {STENCIL} nodes. Got {len(nodes)}.')
        if np.any(np.diff(nodes) <= 0):
            raise DomainError('Grid nodes must be strictly increasing.')
        if np.any(~(weights > 0)):
            raise DomainError('Quadrature weights must be strictly positive.')
        nodes.flags.writeable = False
        weights.flags.writeable = False
        self._nodes = nodes
        self._weights = weights
        self._measure = measure
        self._family = family
        self._params = params
        self._radius = radius
        self._density_fn = density or (lambda x: np.ones_like(x))
        self._diffusivity_fn = diffusivity or (lambda x: np.ones_like(x))
        self._raw_mass = raw_mass
        self._diff_cache = {}
        self._stiffness = None
        # caches are filled lazily from worker threads
        self._cache_lock = threading.Lock()

    @classmethod
    def uniform(cls, start: float, end: float, size: int) -> 'WeightedGrid':
        """Uniform Lebesgue grid on [start, end] with trapezoid weights."""
        if not end > start:
            raise DomainError(f'Empty interval [{start}, {end}].')
        nodes = np.linspace(start, end, size)
        weights = _trapezoid_weights(np.diff(nodes))
        radius = max(abs(start), abs(end))
        return cls(nodes, weights, Measure.Lebesgue, GridFamily.Uniform, radius=radius)

    @classmethod
    def tangent(cls, radius: float, size: int, scale: float = 1.0) -> 'WeightedGrid':
        """Lebesgue grid on [-radius, radius] with nodes y = scale * tan(s), s uniform.

        The trapezoid rule in s resolves slowly decaying tails with few nodes.
        """
        s_max = math.atan(radius / scale)
        s = np.linspace(-s_max, s_max, size)
        ds = s[1] - s[0]
        nodes = scale * np.tan(s)
        jacobian = scale / np.cos(s) ** 2
        weights = ds * jacobian
        weights[0] *= 0.5
        weights[-1] *= 0.5
        return cls(nodes, weights, Measure.Lebesgue, GridFamily.Tangent, radius=radius)

    @classmethod
    def cosine(cls, size: int) -> 'WeightedGrid':
        """Lebesgue grid on (-1, 1) with nodes clustered at the end points.

        Nodes are z = -cos(pi (j + 1/2) / n) and weights are the midpoint rule in the
        angle.
        """
        theta = math.pi * (np.arange(size) + 0.5) / size
        nodes = -np.cos(theta)
        weights = (math.pi / size) * np.sin(theta)
        return cls(nodes, weights, Measure.Lebesgue, GridFamily.Cosine, radius=1.0,
                   diffusivity=lambda z: 1 - z ** 2)

    @classmethod
    def nu_p(cls, params: GNParams, size: int) -> 'WeightedGrid':
        """Probability grid for (1 - z^2)^(2/(p-2)) dz / zeta_p on (-1, 1), p > 2."""
        if not params.is_supercritical:
            raise DomainError(f'The NuP measure needs p > 2. Got p = {params.p}.')
        a = params.weight_exponent
        theta = math.pi * (np.arange(size) + 0.5) / size
        nodes = -np.cos(theta)
        raw = (math.pi / size) * np.sin(theta) ** (2 * a + 1)
        total = raw.sum()
        raw_mass = total / math.exp(log_zeta_p(params))
        return cls(
            nodes, raw / total, Measure.NuP, GridFamily.Cosine, params=params,
            radius=1.0, density=lambda z: np.maximum(1 - z ** 2, 0.0) ** a / total,
            diffusivity=lambda z: 1 - z ** 2, raw_mass=raw_mass
        )

    @classmethod
    def xi_p(cls, params: GNParams, size: int, tail: float = 1e-10) -> 'WeightedGrid':
        """Probability grid for (1 + y^2)^(-2/(2-p)) dy / zeta_p on the line, p < 2.

        The line is truncated at the radius where the tail mass of the density drops
        below ``tail``. Nodes are y = tan(x) with x uniform.
        """
        if params.is_supercritical:
            raise DomainError(f'The XiP measure needs 1 < p < 2. Got p = {params.p}.')
        k = -params.weight_exponent
        zeta = math.exp(log_zeta_p(params))
        radius = (2 / ((2 * k - 1) * zeta * tail)) ** (1 / (2 * k - 1))
        x_max = math.atan(radius)
        x = np.linspace(-x_max, x_max, size)
        dx = x[1] - x[0]
        raw = dx * np.cos(x) ** (2 * k - 2)
        raw[0] *= 0.5
        raw[-1] *= 0.5
        total = raw.sum()
        return cls(
            np.tan(x), raw / total, Measure.XiP, GridFamily.Tangent, params=params,
            radius=radius, density=lambda y: (1 + y ** 2) ** (-k) / total,
            diffusivity=lambda y: 1 + y ** 2, raw_mass=total / zeta
        )

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def size(self) -> int:
        return len(self._nodes)

    @property
    def measure(self) -> Measure:
        return self._measure

    @property
    def family(self) -> GridFamily:
        return self._family

    @property
    def params(self) -> Union[GNParams, None]:
        return self._params

    @property
    def radius(self) -> Union[float, None]:
        """Truncation radius for grids standing in for the whole line."""
        return self._radius

    @property
    def raw_mass(self) -> Union[float, None]:
        """Unnormalized weight sum over the exact mass for probability grids."""
        return self._raw_mass

    @property
    def density(self) -> np.ndarray:
        """Density of the measure with respect to dx at the nodes."""
        return self._density_fn(self._nodes)

    @property
    def diffusivity(self) -> np.ndarray:
        """The weight nu or xi at the nodes. Ones on plain Lebesgue grids."""
        return self._diffusivity_fn(self._nodes)

    @property
    def lebesgue_weights(self) -> np.ndarray:
        """Weights for plain dx integrals on this grid."""
        return self._weights / self.density

    @property
    def faces(self) -> np.ndarray:
        """Midpoints between consecutive nodes."""
        return 0.5 * (self._nodes[1:] + self._nodes[:-1])

    @property
    def face_coefficients(self) -> np.ndarray:
        """density * diffusivity at the faces, the conductivity of the flux form."""
        faces = self.faces
        return self._density_fn(faces) * self._diffusivity_fn(faces)

    def integrate(self, values: np.ndarray) -> float:
        """Weighted sum of values."""
        return float(np.dot(self._weights, values))

    def diff_matrix(self, order: int) -> sparse.csr_matrix:
        """Sparse five point finite difference matrix for the first or second derivative.

        Stencils are centered in the interior and one-sided at the two outermost nodes
        on each side.
        """
        if order not in (1, 2):
            raise DomainError(f'Derivative order must be 1 or 2. Got {order}.')
        with self._cache_lock:
            if order not in self._diff_cache:
                self._diff_cache[order] = self._stencil_matrix(order)
            return self._diff_cache[order]

    def _stencil_matrix(self, order: int) -> sparse.csr_matrix:
        n = self.size
        x = self._nodes
        rows, cols, vals = [], [], []
        half = STENCIL // 2
        for i in range(n):
            start = min(max(i - half, 0), n - STENCIL)
            idx = np.arange(start, start + STENCIL)
            w = fornberg_weights(x[i], x[idx], order)[:, order]
            rows.extend([i] * STENCIL)
            cols.extend(idx)
            vals.extend(w)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def differentiate(self, values: np.ndarray, order: int = 1) -> np.ndarray:
        return self.diff_matrix(order) @ values

    def face_gradient_matrix(self) -> sparse.csr_matrix:
        """Sparse (n - 1, n) matrix of derivatives at the faces.

        Four node stencils around each face, fourth order on uniform grids, and two
        node differences at the outermost faces.
        """
        with self._cache_lock:
            if 'faces' not in self._diff_cache:
                n = self.size
                x = self._nodes
                faces = self.faces
                rows, cols, vals = [], [], []
                for j in range(n - 1):
                    idx = np.arange(j - 1, j + 3) if 0 < j < n - 2 \
                        else np.arange(j, j + 2)
                    w = fornberg_weights(faces[j], x[idx], 1)[:, 1]
                    rows.extend([j] * len(idx))
                    cols.extend(idx)
                    vals.extend(w)
                self._diff_cache['faces'] = sparse.csr_matrix(
                    (vals, (rows, cols)), shape=(n - 1, n))
            return self._diff_cache['faces']

    def flux_divergence(self, values: np.ndarray, mobility: np.ndarray = None,
                        coefficients: np.ndarray = None,
                        high_order: bool = False) -> np.ndarray:
        """Conservative divergence (1/W_j) (F_{j+1/2} - F_{j-1/2}) with zero end fluxes.

        F = coefficients * mobility * u' at the faces. The face derivative is the two
        node difference, or the four node stencil of face_gradient_matrix when
        high_order is True. The weighted sum of the result vanishes identically.

        Args:
            values: Node values u.
            mobility: Face values multiplying the flux. Defaults to 1.
            coefficients: Face conductivities. Defaults to face_coefficients.
            high_order: Use four node face derivatives. Default: False.
        """
        k = self.face_coefficients if coefficients is None else coefficients
        if high_order:
            slope = self.face_gradient_matrix() @ values
        else:
            slope = np.diff(values) / np.diff(self._nodes)
        flux = k * slope
        if mobility is not None:
            flux = flux * mobility
        div = np.zeros(self.size)
        div[:-1] += flux
        div[1:] -= flux
        return div / self._weights

    def stiffness_matrix(self) -> sparse.csr_matrix:
        """Symmetric matrix S with u.S.u = sum_faces k (du)^2 / dx."""
        with self._cache_lock:
            if self._stiffness is None:
                n = self.size
                diff = sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1],
                                    shape=(n - 1, n))
                k = self.face_coefficients / np.diff(self._nodes)
                self._stiffness = (diff.T @ sparse.diags(k) @ diff).tocsr()
            return self._stiffness

    def weighted_operator(self) -> sparse.csr_matrix:
        """The operator -W^-1 S, self-adjoint for the quadrature inner product."""
        return (-sparse.diags(1 / self._weights) @ self.stiffness_matrix()).tocsr()

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return (
            f'WeightedGrid: {self._measure.value} |'
            f' {self._family.value} | size: {self.size} | radius: {self._radius}'
        )


class GridFunction:
    """Values of a real function at the nodes of a WeightedGrid.

    Args:
        grid: A WeightedGrid.
        values: Node values.
        strictly_positive: Set to True to require min(values) > 0.
    """

    def __init__(self, grid: WeightedGrid, values: np.ndarray,
                 strictly_positive: bool = False) -> None:
        if not isinstance(grid, WeightedGrid):
            raise TypeError(
                f'grid must be a WeightedGrid. Instead got {type(grid).__name__}.')
        values = np.array(values, dtype=float)
        if values.shape != grid.nodes.shape:
            raise DomainError(
                f'Got {values.size} values for a grid with {grid.size} nodes.')
        if strictly_positive and not np.all(values > 0):
            raise DomainError('A strictly positive GridFunction has a value <= 0.')
        values.flags.writeable = False
        self._grid = grid
        self._values = values
        self._strictly_positive = strictly_positive

    @classmethod
    def from_callable(cls, grid: WeightedGrid, function: Callable,
                      strictly_positive: bool = False) -> 'GridFunction':
        """Sample a vectorized callable at the grid nodes."""
        return cls(grid, function(grid.nodes), strictly_positive)

    @property
    def grid(self) -> WeightedGrid:
        return self._grid

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def strictly_positive(self) -> bool:
        return self._strictly_positive

    def with_values(self, values: np.ndarray, strictly_positive: bool = None
                    ) -> 'GridFunction':
        """A new GridFunction on the same grid."""
        flag = self._strictly_positive if strictly_positive is None else strictly_positive
        return GridFunction(self._grid, values, flag)

    def __repr__(self) -> str:
        return f'GridFunction: {self._grid.size} nodes | positive: {self._strictly_positive}'


def integrate(f: GridFunction) -> float:
    """Quadrature of f against the measure of its grid."""
    return f.grid.integrate(f.values)


def derivative(f: GridFunction, order: int = 1) -> GridFunction:
    """First or second derivative of f by five point finite differences."""
    return GridFunction(f.grid, f.grid.differentiate(f.values, order))
