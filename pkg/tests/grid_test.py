"""testing functions in grid module."""
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from gnslab.constants import GNParams
from gnslab.errors import DomainError
from gnslab.grid import GridFamily, GridFunction, Measure, WeightedGrid, derivative, \
    integrate


def test_nu_p_probability(nu_grid):
    """Test NuP weights form an even probability measure."""
    assert nu_grid.measure is Measure.NuP
    assert nu_grid.family is GridFamily.Cosine
    assert integrate(GridFunction(nu_grid, np.ones(nu_grid.size))) == \
        pytest.approx(1, abs=1e-14)
    assert integrate(GridFunction(nu_grid, nu_grid.nodes)) == pytest.approx(0, abs=1e-14)
    assert nu_grid.raw_mass == pytest.approx(1, rel=1e-10)


def test_xi_p_probability(xi_grid):
    """Test XiP weights form an even probability measure."""
    assert xi_grid.measure is Measure.XiP
    assert xi_grid.integrate(np.ones(xi_grid.size)) == pytest.approx(1, abs=1e-14)
    assert xi_grid.integrate(xi_grid.nodes) == pytest.approx(0, abs=1e-10)


def test_measure_regimes():
    """Test the weighted grids reject the other regime."""
    with pytest.raises(DomainError):
        WeightedGrid.nu_p(GNParams(1.5), 64)
    with pytest.raises(DomainError):
        WeightedGrid.xi_p(GNParams(4), 64)


def test_tangent_quadrature():
    """Test the tangent grid integrates (1 + y^2)^-1 to pi."""
    grid = WeightedGrid.tangent(1e7, 201)
    assert grid.integrate(1 / (1 + grid.nodes ** 2)) == pytest.approx(math.pi, abs=1e-6)


def test_derivative_polynomial():
    """Test five point stencils are exact for quadratics."""
    grid = WeightedGrid.uniform(-1, 1, 41)
    f = GridFunction(grid, grid.nodes ** 2)
    assert np.allclose(derivative(f).values, 2 * grid.nodes, atol=1e-10)
    assert np.allclose(derivative(f, 2).values, 2, atol=1e-8)


def test_derivative_sine():
    """Test the second derivative of sin."""
    grid = WeightedGrid.uniform(0, 2 * math.pi, 401)
    f = GridFunction(grid, np.sin(grid.nodes))
    assert np.max(np.abs(derivative(f, 2).values + np.sin(grid.nodes))) < 1e-4


def test_derivative_constant():
    """Test constants have zero derivatives."""
    grid = WeightedGrid.cosine(64)
    f = GridFunction(grid, np.full(grid.size, 3.0))
    assert np.allclose(derivative(f).values, 0, atol=1e-9)
    with pytest.raises(DomainError):
        derivative(f, 3)


def test_integration_by_parts():
    """Test discrete integration by parts on compactly supported functions."""
    grid = WeightedGrid.uniform(-1, 1, 401)
    bump = np.clip(1 - grid.nodes ** 2, 0, None) ** 4
    f = GridFunction(grid, bump * np.cos(3 * grid.nodes))
    g = GridFunction(grid, bump * (1 + grid.nodes))
    total = integrate(GridFunction(grid, derivative(f).values * g.values)) + \
        integrate(GridFunction(grid, f.values * derivative(g).values))
    assert abs(total) < 1e-6


def test_flux_divergence_conservative(nu_grid):
    """Test the flux divergence has zero weighted sum."""
    values = np.exp(nu_grid.nodes)
    assert nu_grid.integrate(nu_grid.flux_divergence(values)) == pytest.approx(0, abs=1e-12)


def test_weighted_operator_constant(nu_grid):
    """Test the weighted operator annihilates constants."""
    out = nu_grid.weighted_operator() @ np.ones(nu_grid.size)
    assert np.allclose(out, 0, atol=1e-10)


def test_grid_validation():
    """Test invalid grids."""
    with pytest.raises(DomainError):
        WeightedGrid(np.array([0, 1, 2, 3]), np.ones(4))
    with pytest.raises(DomainError):
        WeightedGrid(np.array([0, 2, 1, 3, 4]), np.ones(5))
    with pytest.raises(DomainError):
        WeightedGrid(np.arange(5), np.array([1, 1, 0, 1, 1]))
    with pytest.raises(DomainError):
        WeightedGrid.uniform(1, 1, 10)


def test_grid_function_validation(nu_grid):
    """Test GridFunction checks its input."""
    with pytest.raises(DomainError):
        GridFunction(nu_grid, np.ones(3))
    with pytest.raises(DomainError):
        GridFunction(nu_grid, np.zeros(nu_grid.size), strictly_positive=True)
    with pytest.raises(TypeError):
        GridFunction(nu_grid.nodes, np.ones(nu_grid.size))
    f = GridFunction.from_callable(nu_grid, lambda z: 2 + z, True)
    assert f.strictly_positive
    assert not f.values.flags.writeable


def test_flux_divergence_high_order():
    """Test the four node face derivatives keep conservation and improve accuracy."""
    grid = WeightedGrid.uniform(-math.pi, math.pi, 201)
    x = grid.nodes
    values = np.cos(x)
    ones = np.ones(grid.size - 1)
    fine = grid.flux_divergence(values, coefficients=ones, high_order=True)
    coarse = grid.flux_divergence(values, coefficients=ones)
    assert grid.integrate(fine) == pytest.approx(0, abs=1e-12)
    inner = slice(3, -3)
    assert np.max(np.abs(fine[inner] + values[inner])) < \
        np.max(np.abs(coarse[inner] + values[inner]))
    assert grid.face_gradient_matrix().shape == (grid.size - 1, grid.size)


def test_diff_matrix_threads():
    """Test concurrent callers share one cached derivative matrix."""
    grid = WeightedGrid.uniform(-1, 1, 401)
    with ThreadPoolExecutor(max_workers=8) as pool:
        matrices = list(pool.map(lambda _: grid.diff_matrix(2), range(32)))
    assert all(m is matrices[0] for m in matrices)
    with ThreadPoolExecutor(max_workers=8) as pool:
        faces = list(pool.map(lambda _: grid.face_gradient_matrix(), range(32)))
    assert all(f is faces[0] for f in faces)
