"""testing functions in functionals module."""
import math

import numpy as np
import pytest

from gnslab.closed_forms import Optimizer, OptimizerKind, eval_optimizer
from gnslab.constants import GNParams, constants_for
from gnslab.errors import DomainError
from gnslab.functionals import action, convexity_check, dual_quotient, entropy_f1, \
    f1_optimal_scale, f1_scaling_optimum, g_constant, g_functional, gns_quotient, \
    lyapunov_line, lyapunov_ultra, primal_quotient
from gnslab.grid import GridFunction, WeightedGrid


def test_lyapunov_line_optimizer(p4, wide_grid):
    """Test the line functional vanishes at the optimizer and its translates."""
    v = GridFunction(wide_grid, 1 / np.cosh(wide_grid.nodes))
    assert lyapunov_line(v, p4).value == pytest.approx(0, abs=1e-6)
    shifted = GridFunction(wide_grid, 1 / np.cosh(wide_grid.nodes - 3))
    assert lyapunov_line(shifted, p4).value == pytest.approx(0, abs=1e-6)
    bent = GridFunction(wide_grid, (1 + 0.3 * np.tanh(wide_grid.nodes)) /
                        np.cosh(wide_grid.nodes))
    assert lyapunov_line(bent, p4).value > 1e-4


def test_lyapunov_line_grid(p4, nu_grid):
    """Test the line functional rejects weighted grids."""
    with pytest.raises(DomainError):
        lyapunov_line(GridFunction(nu_grid, np.ones(nu_grid.size)), p4)


def test_lyapunov_ultra(p4):
    """Test the ultraspherical functional on the constant, the manifold and a tilt."""
    grid = WeightedGrid.nu_p(p4, 512)
    z = grid.nodes
    assert lyapunov_ultra(GridFunction(grid, np.ones(grid.size)), p4).value == \
        pytest.approx(0, abs=1e-13)
    manifold = GridFunction(grid, 1 / (1.25 + 0.75 * z))
    assert lyapunov_ultra(manifold, p4).value == pytest.approx(0, abs=1e-6)
    assert lyapunov_ultra(GridFunction(grid, 1 + 0.1 * z), p4).value > 1e-4


def test_lyapunov_ultra_subcritical(p15, xi_grid):
    """Test the subcritical functional vanishes at constants."""
    f = GridFunction(xi_grid, np.full(xi_grid.size, 2.0))
    assert lyapunov_ultra(f, p15).value == pytest.approx(0, abs=1e-12)


def test_primal_quotient_optimizer(p4, wide_grid):
    """Test c_p times the primal quotient of the optimizer is C1."""
    table = constants_for(p4)
    f = eval_optimizer(Optimizer(OptimizerKind.FStarLine, 4), wide_grid)
    value = primal_quotient(f, p4).value
    assert table.c_p * value == pytest.approx(table.c1_or_c2, rel=1e-6)
    assert gns_quotient(f, p4) == pytest.approx(table.c_gn, rel=1e-6)


def test_primal_quotient_invariance(p4, wide_grid):
    """Test the primal quotient is invariant under amplitude and dilation."""
    f = GridFunction(wide_grid, np.exp(-wide_grid.nodes ** 2))
    scaled = GridFunction(wide_grid, 3 * np.exp(-(2 * wide_grid.nodes) ** 2))
    base = primal_quotient(f, p4).value
    assert primal_quotient(f.with_values(5 * f.values), p4).value == \
        pytest.approx(base, rel=1e-12)
    assert primal_quotient(scaled, p4).value == pytest.approx(base, rel=1e-6)
    assert base * constants_for(p4).c_p > constants_for(p4).c1_or_c2


def test_dual_quotient_optimizer(p4):
    """Test the dual quotient of the dual optimizer is C1."""
    grid = WeightedGrid.tangent(1e4, 4097)
    G = GridFunction(grid, (1 + grid.nodes ** 2) ** -p4.q_dual)
    assert dual_quotient(G, p4).value == pytest.approx(constants_for(p4).c1_or_c2,
                                                       rel=1e-6)
    with pytest.raises(DomainError):
        dual_quotient(G.with_values(-G.values), p4)


def test_entropy_barenblatt():
    """Test the Barenblatt profile reaches the scaling optimum of F1."""
    m = 0.6
    grid = WeightedGrid.tangent(1e4, 4097)
    G = GridFunction(grid, Optimizer(OptimizerKind.BarenblattFD, m)(grid.nodes))
    assert entropy_f1(G, m).value == pytest.approx(f1_scaling_optimum(G, m), rel=1e-6)
    assert f1_optimal_scale(G, m) == pytest.approx(1, rel=1e-5)


def test_entropy_bound(wide_grid):
    """Test F1 stays above its scaling optimum for a Gaussian."""
    G = GridFunction(wide_grid, np.exp(-wide_grid.nodes ** 2 / 2))
    for m in (0.4, 0.6, 0.9):
        assert entropy_f1(G, m).value - f1_scaling_optimum(G, m) >= -1e-8
    with pytest.raises(DomainError):
        entropy_f1(G, 1.2)


def test_action(wide_grid):
    """Test the action against the Fisher information of a Gaussian."""
    x = wide_grid.nodes
    rho = GridFunction(wide_grid, np.exp(-x ** 2 / 2) / math.sqrt(2 * math.pi))
    zero = GridFunction(wide_grid, np.zeros(wide_grid.size))
    assert action(rho, zero, 1).value == 0
    flux = GridFunction(wide_grid, x * rho.values)
    assert action(rho, flux, 1).value == pytest.approx(1, rel=1e-8)


def test_convexity_check():
    """Test convexity of the action density for alpha in [0, 1] only."""
    for alpha in (0, 0.5, 1):
        sampled = convexity_check(alpha)
        assert sampled.convex
        assert sampled.witness is None
    for alpha in (-0.5, 1.5):
        sampled = convexity_check(alpha)
        assert not sampled.convex
        assert sampled.witness['lhs'] > sampled.witness['rhs']


def test_g_functional(p15):
    """Test G vanishes at the rescaled optimizer and is positive nearby."""
    radius = math.pi / (2 - p15.p)
    grid = WeightedGrid.uniform(-radius, radius, 8001)
    optimizer = Optimizer(OptimizerKind.FStarCompact, 1.5, dilation=(2 - 1.5) / 2)
    f = GridFunction(grid, optimizer(grid.nodes))
    value = g_functional(f, p15)
    assert abs(value.value) < 1e-6 * value.breakdown['lp']
    assert g_functional(f.with_values(1.2 * f.values), p15).value > 0
    assert g_functional(f.with_values(0.8 * f.values), p15).value > 0
    with pytest.raises(DomainError):
        g_constant(GNParams(4))
