"""testing functions in dual_flows module."""
import math

import numpy as np
import pytest

from gnslab.closed_forms import barenblatt_coefficient, barenblatt_mass_constant
from gnslab.constants import GNParams
from gnslab.dual_flows import FD_COLUMNS, FDConfig, FDMode, fd_rhs, gaussian_heat_entropy, \
    gn_exponent_link, gradient_flow_action, heat_decay_bound, heat_entropy_production, \
    moment_freezing_sigma, rho_flow_check, run_fd, run_rho_flow, sigma_of
from gnslab.errors import DomainError
from gnslab.grid import GridFunction, WeightedGrid

M = 0.75  # fast diffusion exponent of p = 2.8


@pytest.fixture(scope='module')
def fd_grid():
    return WeightedGrid.uniform(-10, 10, 121)


def barenblatt(grid, shift=0.0):
    constant = barenblatt_mass_constant(M, 1.0, grid)
    y = grid.nodes - shift
    values = (constant + barenblatt_coefficient(M) * y ** 2) ** (1 / (M - 1))
    return GridFunction(grid, values / grid.integrate(values), True)


def gaussian(grid):
    return GridFunction(grid, np.exp(-grid.nodes ** 2 / 2) / math.sqrt(2 * math.pi),
                        True)


def test_gn_exponent_link():
    """Test the exponents attached to the growth of the dual quotient."""
    assert gn_exponent_link(0.75) == pytest.approx((2.0, 4.0))
    with pytest.raises(DomainError):
        gn_exponent_link(0.4)


def test_barenblatt_equilibrium(fd_grid):
    """Test the Barenblatt profile is a discrete equilibrium with sigma = 1."""
    constant = barenblatt_mass_constant(M, 1.0, fd_grid)
    values = (constant + barenblatt_coefficient(M) * fd_grid.nodes ** 2) ** (1 / (M - 1))
    G = GridFunction(fd_grid, values, True)
    assert np.max(np.abs(fd_rhs(G, M))) < 1e-9
    assert moment_freezing_sigma(G, M) == pytest.approx(1, abs=1e-6)
    assert sigma_of(G, M) == pytest.approx(1, rel=2e-2)


def test_fd_config(fd_grid):
    """Test the fast diffusion settings are validated."""
    with pytest.raises(DomainError):
        FDConfig(0.4, FDMode.SigmaConstrained, fd_grid, 1.0, 1.0)
    with pytest.raises(DomainError):
        FDConfig(M, FDMode.SelfSimilar, fd_grid, 1.0, 1.0, params=GNParams(4))
    with pytest.raises(DomainError):
        FDConfig(M, FDMode.SelfSimilar, fd_grid, 1.0, 0.0)
    with pytest.raises(DomainError):
        FDConfig(1.5, FDMode.SelfSimilar, fd_grid, 1.0, 1.0)


def test_run_fd_offcenter(fd_grid):
    """Test a shifted Barenblatt profile relaxes with decreasing entropy."""
    cfg = FDConfig(M, FDMode.SelfSimilar, fd_grid, 1.0, 1.5, params=GNParams(2.8))
    trace = run_fd(cfg, barenblatt(fd_grid, shift=1.0))
    assert trace.columns == FD_COLUMNS
    assert trace.monotone_violations == 0
    l1 = trace.column('l1_distance')
    assert l1[-1] < 0.5 * l1[0]
    mass = trace.column('mass')
    assert np.max(np.abs(mass - 1)) < 1e-8
    gap = trace.column('entropy') - trace.column('scaling_optimum')
    assert np.min(gap) > -1e-8
    assert np.all(np.isfinite(trace.column('dual_quotient')))


def test_run_fd_constrained(fd_grid):
    """Test the constrained flow freezes the second moment."""
    cfg = FDConfig(M, FDMode.SigmaConstrained, fd_grid, 1.0, 0.5)
    trace = run_fd(cfg, barenblatt(fd_grid, shift=1.0))
    moment = trace.column('second_moment')
    assert np.max(np.abs(moment - moment[0])) / moment[0] < 1e-6
    assert np.all(trace.column('sigma') > 0)


def test_run_fd_mass_check(fd_grid):
    """Test the initial mass must match the configured mass."""
    cfg = FDConfig(M, FDMode.SelfSimilar, fd_grid, 2.0, 1.0)
    with pytest.raises(DomainError):
        run_fd(cfg, barenblatt(fd_grid))


def test_gaussian_heat_entropy():
    """Test int rho^2 of the unit Gaussian."""
    assert gaussian_heat_entropy(0.0, 2.0) == pytest.approx(1 / (2 * math.sqrt(math.pi)))
    assert gaussian_heat_entropy(1.0, 1.0 + 1e-12) == pytest.approx(1.0)


def test_gradient_flow_action():
    """Test the action form of the heat flow entropy production."""
    grid = WeightedGrid.uniform(-30, 30, 481)
    rho = gaussian(grid)
    q = 1.5
    half = grid.differentiate(rho.values ** (q / 2), 1)
    production = 4 * (q - 1) / q * grid.integrate(half ** 2)
    assert gradient_flow_action(rho, q) == pytest.approx(production, rel=1e-4)


def test_heat_entropy_production():
    """Test the heat flow from a Gaussian against the closed form entropy."""
    grid = WeightedGrid.uniform(-30, 30, 481)
    q = 1.5
    trace = heat_entropy_production(gaussian(grid), q, 0.5)
    t = trace.column('t')
    analytic = gaussian_heat_entropy(t, q)
    assert np.max(np.abs(trace.column('entropy') - analytic) / analytic) < 1e-4
    assert np.all(trace.column('production') >= trace.column('bound'))
    assert np.max(np.abs(trace.column('mass') - 1)) < 1e-8
    with pytest.raises(DomainError):
        heat_entropy_production(gaussian(grid), 2.5, 0.5)


def test_heat_decay_bound():
    """Test the bound is positive and grows with the entropy."""
    low = heat_decay_bound(0.5, 1.0, 1.5)
    assert 0 < low < heat_decay_bound(0.6, 1.0, 1.5)


def test_rho_flow_check():
    """Test the exponents of the gradient flow of int rho^(p/2)."""
    check = rho_flow_check(GNParams(2.5))
    assert check.exponent == pytest.approx(0.75)
    assert check.alpha == pytest.approx(0.5)
    assert check.mass_condition
    with pytest.raises(DomainError):
        rho_flow_check(GNParams(4))


def test_run_rho_flow():
    """Test mass conservation and entropy decay of the gradient flow."""
    params = GNParams(2.5)
    grid = WeightedGrid.uniform(-30, 30, 241)
    rho0 = GridFunction(grid, 1 / (math.pi * (1 + grid.nodes ** 2)), True)
    trace = run_rho_flow(params, rho0, 0.2)
    mass = trace.column('mass')
    assert np.max(np.abs(mass - mass[0])) / mass[0] < 1e-8
    entropy = trace.column('entropy')
    assert np.all(np.diff(entropy) <= 1e-12)
    with pytest.raises(DomainError):
        run_rho_flow(params, GridFunction(grid, grid.nodes), 0.2)


def test_heat_heavy_tail_mass():
    """Test the heat flow conserves mass and reports the tail leakage of a Cauchy start."""
    grid = WeightedGrid.uniform(-30, 30, 481)
    rho0 = GridFunction(grid, 1 / (math.pi * (1 + grid.nodes ** 2)), True)
    trace = heat_entropy_production(rho0, 1.5, 2.0)
    mass = trace.column('mass')
    assert np.max(np.abs(mass - mass[0])) <= 1e-6
    assert np.max(np.abs(mass - mass[0])) / mass[0] < 1e-10
    assert trace.metadata['leakage'] > 0
    assert trace.metadata['leakage_rel'] == \
        pytest.approx(trace.metadata['leakage'] / mass[0])
    # the Cauchy flux at |x| = R is about 2 / (pi R^3) per end
    assert trace.metadata['leakage_rel'] < 1e-2


def test_heat_refinement():
    """Test the Gaussian entropy error drops when the heat grid is refined."""
    q = 1.5
    errors = []
    for size in (161, 321):
        grid = WeightedGrid.uniform(-20, 20, size)
        trace = heat_entropy_production(gaussian(grid), q, 0.5)
        analytic = gaussian_heat_entropy(trace.column('t'), q)
        errors.append(np.max(np.abs(trace.column('entropy') - analytic) / analytic))
    assert errors[0] / errors[1] >= 3.5 or errors[1] <= 1e-8


def test_rho_flow_monotone():
    """Test no step of the gradient flow from a Cauchy start raises the entropy."""
    params = GNParams(2.5)
    grid = WeightedGrid.uniform(-30, 30, 241)
    rho0 = GridFunction(grid, 1 / (math.pi * (1 + grid.nodes ** 2)), True)
    trace = run_rho_flow(params, rho0, 0.2)
    assert trace.monotone_violations == 0
    assert trace.max_increase <= 1e-10 * (1 + trace.column('entropy')[0])
