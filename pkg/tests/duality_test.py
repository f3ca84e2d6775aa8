"""testing functions in duality module."""
import math

import numpy as np
import pytest

from gnslab.closed_forms import Optimizer, OptimizerKind
from gnslab.constants import GNParams, log_c1_or_c2
from gnslab.duality import build_transport, chain_exponents, dual_grid, \
    dual_parametric, logsob_inf_side, logsob_limit_check, logsob_sup_side, \
    optimizer_pair, perturbed_gaussians, primal_grid, primal_starts, random_pair, \
    run_duality, solve_primal, stationarity_map, verify_chain
from gnslab.errors import DomainError
from gnslab.grid import GridFunction, WeightedGrid


def gaussian(grid, variance=1.0):
    x = grid.nodes
    return GridFunction(grid, np.exp(-x ** 2 / (2 * variance))
                        / math.sqrt(2 * math.pi * variance))


def test_build_transport_gaussians():
    """Test the monotone map between two Gaussians is a dilation."""
    source_grid = WeightedGrid.uniform(-10, 10, 2001)
    target_grid = WeightedGrid.uniform(-20, 20, 2001)
    plan = build_transport(gaussian(source_grid), gaussian(target_grid, 4.0))
    x = source_grid.nodes
    inner = np.abs(x) < 3
    assert np.allclose(plan.map_derivative.values[inner], 2 * x[inner], atol=1e-3)
    assert np.all(np.diff(plan.map_derivative.values) >= 0)
    assert plan.pushforward_check(1e-3)


def test_build_transport_validation(nu_grid, wide_grid):
    """Test densities must be non-negative on Lebesgue grids."""
    with pytest.raises(DomainError):
        build_transport(GridFunction(nu_grid, np.ones(nu_grid.size)),
                        gaussian(wide_grid))
    with pytest.raises(DomainError):
        build_transport(GridFunction(wide_grid, wide_grid.nodes), gaussian(wide_grid))


def test_chain_exponents():
    """Test the chain exponents in both regimes."""
    e = chain_exponents(GNParams(4))
    assert (e.theta, e.k, e.r, e.holder) == pytest.approx((0.6, 0.25, 0.75, 0.5))
    assert e.alpha == pytest.approx(0.3)
    e = chain_exponents(GNParams(1.5))
    assert (e.theta, e.alpha, e.k, e.r) == pytest.approx((0.8, 0.2, 0.5, 1.0))
    assert e.holder == pytest.approx(0.75)


@pytest.mark.parametrize('p', [4.0, 1.5])
def test_chain_optimizer_pair(p):
    """Test the chain holds and nearly closes on the optimizer pair."""
    params = GNParams(p)
    F, G = optimizer_pair(params, size=2049, dual_size=4097)
    plan = build_transport(F, G)
    assert plan.pushforward_check(1e-3)
    report = verify_chain(plan, params)
    assert report.holds(1e-7, 1e-3)
    assert report.step('final_bound').slack < 1e-2


def test_chain_random_pairs():
    """Test the discrete Holder and Cauchy-Schwarz steps on random pairs."""
    rng = np.random.default_rng(7)
    for p in (3.0, 1.5):
        F, G = random_pair(rng)
        report = verify_chain(build_transport(F, G), GNParams(p))
        assert report.step('holder').slack > -1e-10
        assert report.step('cauchy_schwarz').slack > -1e-10


def test_solve_primal_validation(p4, nu_grid):
    """Test the primal solver input checks."""
    with pytest.raises(DomainError):
        solve_primal(p4, GridFunction(nu_grid, np.ones(nu_grid.size)))
    grid = primal_grid(p4, 128)
    with pytest.raises(DomainError):
        solve_primal(p4, GridFunction(grid, np.zeros(grid.size)))
    assert len(primal_starts(grid)) == 3


def test_stationarity_map(p4):
    """Test the dual optimizer is a fixed point of the stationarity map."""
    grid = dual_grid(2049)
    G = GridFunction(grid, Optimizer(OptimizerKind.GBarenblattDual, 4.0)(grid.nodes))
    mapped = stationarity_map(G, p4)
    inner = np.abs(grid.nodes) < 10
    ratio = mapped[inner] / G.values[inner]
    assert np.max(np.abs(ratio - 1)) < 1e-3


def test_dual_parametric(p4):
    """Test the two parameter ascent reaches the closed form."""
    ascent = dual_parametric(p4, dual_grid(2049))
    closed = math.exp(log_c1_or_c2(p4))
    assert ascent.value == pytest.approx(closed, rel=1e-3)
    assert ascent.q == pytest.approx(p4.q_dual, rel=1e-2)


def test_run_duality(p4):
    """Test the numerical inf and sup close the gap at p = 4."""
    report = run_duality(p4, grid_size=256, dual_size=1025)
    assert report.gap < 1e-2
    assert report.gap_primal < 1e-2
    assert report.gap_dual < 1e-2
    assert report.start_spread == 0
    with pytest.raises(DomainError):
        run_duality(p4, starts=4)


def test_logsob_sides():
    """Test both log-Sobolev expressions vanish at Gaussians."""
    grid = WeightedGrid.uniform(-20, 20, 2001)
    G = gaussian(grid, 2.0)
    assert logsob_sup_side(G) == pytest.approx(0, abs=1e-6)
    f = G.with_values(np.sqrt(G.values))
    assert logsob_inf_side(f) == pytest.approx(0, abs=1e-6)


def test_logsob_limit_check():
    """Test the log-Sobolev brackets and the slope of C1 at p = 2."""
    check = logsob_limit_check(samples=5, seed=2)
    assert abs(check.gaussian_inf) < 1e-6
    assert abs(check.gaussian_sup) < 1e-6
    assert check.max_sup < 1e-7
    assert check.min_inf > -1e-7
    assert check.slope_above == pytest.approx(1 + math.log(2 * math.pi), abs=5e-3)
    assert check.samples == 5


def test_perturbed_gaussians():
    """Test the perturbed densities are seeded and positive."""
    grid = WeightedGrid.uniform(-20, 20, 401)
    first = perturbed_gaussians(grid, 3, seed=1)
    second = perturbed_gaussians(grid, 3, seed=1)
    assert all(np.array_equal(a.values, b.values) for a, b in zip(first, second))
    assert all(np.all(d.values > 0) for d in first)
