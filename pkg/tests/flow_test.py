"""testing functions in flow module."""
import math

import numpy as np
import pytest

from gnslab.constants import GNParams
from gnslab.errors import DomainError, StepFailure
from gnslab.flow import FLOW_COLUMNS, FlowConfig, Frame, generalized_flow_u, \
    line_dissipation, line_grid, line_initial, manifold_closed_form, manifold_ode, \
    manifold_profile, normalize_lp, optimizer_norm, rhs_line, rhs_ultra, run_flow, \
    ultra_dissipation
from gnslab.functionals import lyapunov_line, lyapunov_ultra
from gnslab.grid import GridFunction, Measure, WeightedGrid


def test_rhs_ultra_constant(p4, nu_grid):
    """Test constants are fixed points of the flow."""
    f = GridFunction(nu_grid, np.ones(nu_grid.size), True)
    assert np.array_equal(rhs_ultra(f, p4).values, np.zeros(nu_grid.size))
    assert ultra_dissipation(f, p4) == pytest.approx(0, abs=1e-10)


def test_rhs_ultra_linearization(p4, nu_grid):
    """Test the flow near 1 acts on z as the ultraspherical operator."""
    eps = 1e-6
    z = nu_grid.nodes
    rate = rhs_ultra(GridFunction(nu_grid, 1 + eps * z), p4).values / eps
    error = math.sqrt(nu_grid.integrate((rate + 4 * z) ** 2))
    assert error < 1e-2


def test_rhs_ultra_grid(p4, xi_grid):
    """Test the flow rejects the grid of the other regime."""
    with pytest.raises(DomainError):
        rhs_ultra(GridFunction(xi_grid, np.ones(xi_grid.size)), p4)


def test_rhs_line_optimizer(p4, wide_grid):
    """Test the line optimizer is stationary away from the truncation."""
    x = wide_grid.nodes
    v = GridFunction(wide_grid, 1 / np.cosh(x))
    rate = rhs_line(v, p4).values
    assert np.max(np.abs(rate[np.abs(x) < 3])) < 1e-5
    assert rate[0] == 0 and rate[-1] == 0


def test_line_dissipation(p4):
    """Test the line dissipation is nearly zero at the optimizer and positive off it."""
    grid = WeightedGrid.uniform(-3, 3, 1201)
    x = grid.nodes
    optimal = line_dissipation(GridFunction(grid, 1 / np.cosh(x)), p4)
    bumped = line_dissipation(
        GridFunction(grid, (1 + 0.2 * np.exp(-x ** 2)) / np.cosh(x)), p4)
    assert optimal >= 0
    assert bumped > 0
    assert optimal < 1e-2 * bumped



def test_normalize_lp(p4, nu_grid):
    """Test the p-norm normalization."""
    f = normalize_lp(GridFunction(nu_grid, 2 + nu_grid.nodes), 1.0, 4)
    assert nu_grid.integrate(f.values ** 4) == pytest.approx(1, rel=1e-12)
    assert optimizer_norm(p4, Frame.UltraF) == 1
    assert optimizer_norm(p4, Frame.LineV) == pytest.approx((4 / 3) ** 0.25)


def test_run_flow_constant(p4, nu_grid):
    """Test the flow started at 1 stays at the minimum."""
    cfg = FlowConfig(p4, Frame.UltraF, nu_grid, 0.5, norm_target=1.0)
    trace = run_flow(cfg, GridFunction(nu_grid, np.ones(nu_grid.size)))
    assert trace.columns == FLOW_COLUMNS
    assert np.max(np.abs(trace.column('lyapunov'))) < 1e-12
    assert np.max(np.abs(trace.column('dissipation_rhs'))) < 1e-12


def test_run_flow_decay(p4):
    """Test the Lyapunov functional decreases along the flow."""
    grid = WeightedGrid.nu_p(p4, 64)
    z = grid.nodes
    initial = normalize_lp(GridFunction(grid, 1 + 0.2 * (3 * z ** 2 - 1)), 1.0, 4)
    cfg = FlowConfig(p4, Frame.UltraF, grid, 0.5, output_stride=5, norm_target=1.0)
    trace = run_flow(cfg, initial)
    lyapunov = trace.column('lyapunov')
    assert trace.monotone_violations == 0
    assert lyapunov[-1] < 0.5 * lyapunov[0]
    norm = trace.column('conserved_norm')
    assert np.max(np.abs(norm - 1)) < 1e-5


def test_run_flow_validation(p4, nu_grid):
    """Test initial data checks."""
    cfg = FlowConfig(p4, Frame.UltraF, nu_grid, 1.0, norm_target=1.0)
    with pytest.raises(DomainError):
        run_flow(cfg, GridFunction(nu_grid, np.full(nu_grid.size, 2.0)))
    other = WeightedGrid.nu_p(p4, 64)
    with pytest.raises(DomainError):
        run_flow(cfg, GridFunction(other, np.ones(64)))
    with pytest.raises(DomainError):
        FlowConfig(p4, Frame.UltraF, nu_grid, 0.0)
    with pytest.raises(DomainError):
        FlowConfig(p4, Frame.LineV, nu_grid, 1.0)


def test_manifold(p4, nu_grid):
    """Test the manifold profiles are zeros of the functional and the (a, b) ODE."""
    profile = manifold_profile(math.cosh(1), math.sinh(1), nu_grid, p4)
    assert lyapunov_ultra(profile, p4).value == pytest.approx(0, abs=1e-5)
    t = np.linspace(0, 1, 11)
    path = manifold_ode(math.cosh(1), math.sinh(1), p4, 1.0, t)
    assert np.allclose(path.a ** 2 - path.b ** 2, 1, atol=1e-10)
    assert np.all(np.diff(np.abs(path.b)) < 0)
    a, b = manifold_closed_form(math.cosh(1), math.sinh(1), p4, t)
    assert np.allclose(path.a, a, atol=1e-9)
    assert np.allclose(path.b, b, atol=1e-9)
    still = manifold_ode(2.0, 0.0, p4, 1.0)
    assert np.allclose(still.a, 2.0) and np.allclose(still.b, 0.0)
    with pytest.raises(DomainError):
        manifold_profile(1.0, 1.0, nu_grid, p4)


def test_u_flow_conservation():
    """Test u_bar is conserved with kappa = beta (p - 2) + 1 at p = 3."""
    params = GNParams(3)
    grid = WeightedGrid.nu_p(params, 64)
    z = grid.nodes
    u = GridFunction(grid, 1 + 0.1 * z + 0.05 * z ** 2, True)
    trace = generalized_flow_u(params, u, 0.2)
    u_bar = trace.column('u_bar')
    assert np.max(np.abs(u_bar - u_bar[0])) / u_bar[0] < 1e-6
    assert trace.metadata['beta'] == pytest.approx(4 / 3)
    with pytest.raises(DomainError):
        generalized_flow_u(GNParams(6), GridFunction(WeightedGrid.nu_p(GNParams(6), 64),
                                                     np.ones(64)), 0.1)


def test_line_grid(p4, p15):
    """Test the line grid radius from the tail mass of the optimizer."""
    grid = line_grid(p4, 1201)
    assert grid.measure is Measure.Lebesgue
    assert grid.nodes[-1] == pytest.approx(7.35, abs=0.05)
    assert line_grid(GNParams(3), 401).nodes[-1] == pytest.approx(5.1, abs=0.05)
    xi = WeightedGrid.xi_p(p15, 257)
    assert np.allclose(np.tan(line_grid(p15, 257).nodes), xi.nodes, rtol=1e-9)


def test_lyapunov_frames(p4):
    """Test both frames give the same Lyapunov functional for matching data."""
    grid = WeightedGrid.nu_p(p4, 256)
    line = line_grid(p4, 1201)

    def profile(z):
        return 1 + 0.2 * (3 * z ** 2 - 1) / 2

    f = normalize_lp(GridFunction(grid, profile(grid.nodes)), 1.0, 4)
    v = line_initial(profile, p4, line)
    assert line.integrate(v.values ** 4) ** 0.25 == \
        pytest.approx(optimizer_norm(p4, Frame.LineV), rel=1e-12)
    assert lyapunov_line(v, p4).value == \
        pytest.approx(lyapunov_ultra(f, p4).value, abs=1e-6)


def test_run_flow_line_optimizer(p4):
    """Test the line flow started at the optimizer stays at the minimum."""
    line = line_grid(p4, 1201)
    v_star = line_initial(lambda s: np.ones_like(s), p4, line)
    cfg = FlowConfig(p4, Frame.LineV, line, 0.5,
                     norm_target=optimizer_norm(p4, Frame.LineV))
    assert cfg.implicit
    trace = run_flow(cfg, v_star)
    assert len(trace) == cfg.output_points
    assert trace.column('t')[-1] == pytest.approx(0.5)
    assert np.max(np.abs(trace.column('lyapunov'))) <= 1e-6


def test_run_flow_frame_consistency(p4):
    """Test the ultraspherical and line flows agree at matched times."""
    grid = WeightedGrid.nu_p(p4, 256)
    line = line_grid(p4, 1201)

    def profile(z):
        return 1 + 0.2 * (3 * z ** 2 - 1) / 2

    f = normalize_lp(GridFunction(grid, profile(grid.nodes)), 1.0, 4)
    ultra = run_flow(FlowConfig(p4, Frame.UltraF, grid, 0.05, output_stride=1,
                                norm_target=1.0), f)
    line_trace = run_flow(
        FlowConfig(p4, Frame.LineV, line, 0.05,
                   norm_target=optimizer_norm(p4, Frame.LineV)),
        line_initial(profile, p4, line))
    assert line_trace.monotone_violations == 0
    matched = np.interp(line_trace.column('t'), ultra.column('t'),
                        ultra.column('lyapunov'))
    assert np.max(np.abs(matched - line_trace.column('lyapunov'))) <= 1e-4


def test_run_flow_line_step_failure(p4):
    """Test the explicit stepper breaks down on the stiff line frame with a trace."""
    grid = WeightedGrid.uniform(-12, 12, 1201)
    x = grid.nodes
    v = GridFunction(grid, (1 + 0.1 * np.exp(-x ** 2)) / np.cosh(x), True)
    cfg = FlowConfig(p4, Frame.LineV, grid, 1.0, implicit=False)
    with pytest.raises(StepFailure) as info:
        run_flow(cfg, v)
    assert info.value.trace is not None


def test_dissipation_refinement(p4):
    """Test the dissipation identity mismatch drops when the grid is doubled."""
    mismatch = []
    for size in (64, 128):
        grid = WeightedGrid.nu_p(p4, size)
        z = grid.nodes
        f = normalize_lp(GridFunction(grid, 1 + 0.15 * (3 * z ** 2 - 1)), 1.0, 4)
        trace = run_flow(FlowConfig(p4, Frame.UltraF, grid, 0.1, output_stride=1,
                                    norm_target=1.0), f)
        lhs = trace.column('dissipation_lhs')[1:-1]
        rhs = trace.column('dissipation_rhs')[1:-1]
        mismatch.append(np.max(np.abs(lhs - rhs)))
    assert mismatch[0] / mismatch[1] >= 3 or mismatch[1] <= 5e-6
