"""testing functions in closed_forms module."""
import math

import numpy as np
import pytest

from gnslab.closed_forms import Optimizer, OptimizerKind, ShootingOutcome, \
    barenblatt_mass_constant, el_residual, el_residual_norm, energy_invariant, \
    eval_optimizer, fit_symmetries, shooting_solve
from gnslab.constants import GNParams, constants_for
from gnslab.errors import DomainError
from gnslab.grid import GridFunction, WeightedGrid


def test_optimizer_values():
    """Test closed-form optimizers at reference points."""
    assert Optimizer(OptimizerKind.FStarLine, 4)(0.0) == pytest.approx(1)
    compact = Optimizer(OptimizerKind.FStarCompact, 1.5)
    assert np.allclose(compact(np.array([-math.pi / 2, math.pi / 2, 2.0])), 0)
    assert not compact.is_positive
    dual = Optimizer(OptimizerKind.GBarenblattDual, 4, scale=2, dilation=3)
    assert dual(1 / 3) == pytest.approx(2 * 2 ** -2.5)


def test_optimizer_validation():
    """Test optimizers reject the wrong regime and bad symmetries."""
    with pytest.raises(DomainError):
        Optimizer(OptimizerKind.FStarLine, 1.5)
    with pytest.raises(DomainError):
        Optimizer(OptimizerKind.FStarCompact, 4)
    with pytest.raises(DomainError):
        Optimizer(OptimizerKind.FStarLine, 4, scale=-1)
    with pytest.raises(DomainError):
        eval_optimizer(Optimizer(OptimizerKind.FStarLine, 4),
                       WeightedGrid.nu_p(GNParams(4), 64))


def test_optimizer_ratios(p4, wide_grid):
    """Test the quadrature ratios of the line optimizer."""
    f = eval_optimizer(Optimizer(OptimizerKind.FStarLine, 4), wide_grid)
    l2 = wide_grid.integrate(f.values ** 2)
    assert l2 == pytest.approx(constants_for(p4).i2_or_j2, rel=1e-7)
    assert wide_grid.integrate(f.values ** 4) / l2 == pytest.approx(2 / 3, rel=1e-7)


def test_el_residual(p4, wide_grid):
    """Test the Euler-Lagrange residual at the optimizer and at a constant."""
    f = eval_optimizer(Optimizer(OptimizerKind.FStarLine, 4), wide_grid)
    assert el_residual_norm(f, p4) < 1e-5
    one = GridFunction(wide_grid, np.ones(wide_grid.size))
    assert np.allclose(el_residual(one, p4).values, -4, atol=1e-8)


def test_el_residual_compact(p15):
    """Test the subcritical residual away from the support ends."""
    grid = WeightedGrid.uniform(-math.pi / 2 + 0.05, math.pi / 2 - 0.05, 2001)
    f = eval_optimizer(Optimizer(OptimizerKind.FStarCompact, 1.5), grid)
    assert el_residual_norm(f, p15) < 1e-6


def test_energy_invariant(p4, wide_grid):
    """Test the first integral vanishes along the optimizer and at zero."""
    f = eval_optimizer(Optimizer(OptimizerKind.FStarLine, 4), wide_grid)
    assert np.max(np.abs(energy_invariant(f, p4).values)) < 1e-6
    zero = GridFunction(wide_grid, np.zeros(wide_grid.size))
    assert np.array_equal(energy_invariant(zero, p4).values, np.zeros(wide_grid.size))


def test_shooting_optimizer(p4):
    """Test shooting from f(0) = 1 reproduces sech at p = 4."""
    result = shooting_solve(p4, 1.0, x_max=10.0)
    assert result.outcome is ShootingOutcome.Decaying
    x = result.solution.grid.nodes
    inner = np.abs(x) <= 10
    assert np.allclose(result.solution.values[inner], 1 / np.cosh(x[inner]), atol=1e-6)
    assert result.energy_drift < 1e-8


def test_shooting_non_decaying(p4):
    """Test shooting from f(0) = 1.1 does not decay."""
    assert shooting_solve(p4, 1.1).outcome is ShootingOutcome.NonDecaying
    with pytest.raises(DomainError):
        shooting_solve(p4, 0)


def test_fit_symmetries(p4, wide_grid):
    """Test the symmetry fit recovers amplitude, dilation and center."""
    optimizer = Optimizer(OptimizerKind.FStarLine, 4, scale=1.5, dilation=0.8,
                          center=0.7)
    fit = fit_symmetries(eval_optimizer(optimizer, wide_grid), p4)
    assert fit.scale == pytest.approx(1.5, rel=1e-6)
    assert fit.dilation == pytest.approx(0.8, rel=1e-6)
    assert fit.center == pytest.approx(0.7, abs=1e-6)
    assert fit.relative_l2 < 1e-8


def test_barenblatt_mass():
    """Test the Barenblatt constant on the line and on a truncated grid."""
    m = 0.6
    grid = WeightedGrid.tangent(1e4, 4097)
    profile = Optimizer(OptimizerKind.BarenblattFD, m, mass=2.0)
    assert grid.integrate(profile(grid.nodes)) == pytest.approx(2.0, rel=1e-6)
    small = WeightedGrid.uniform(-5, 5, 501)
    constant = barenblatt_mass_constant(m, 1.0, small)
    values = (constant + (1 - m) / (2 * m) * small.nodes ** 2) ** (1 / (m - 1))
    assert small.integrate(values) == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(DomainError):
        barenblatt_mass_constant(1.2, 1.0)
