"""Pipelines behind the command line. Each one runs a battery for a single exponent
and returns its results together with the failed acceptance checks."""

import logging
import math
import pathlib
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, NamedTuple

import numpy as np

from ._helper import relative_gap
from .closed_forms import (Optimizer, OptimizerKind,
                           barenblatt_coefficient, barenblatt_mass_constant,
                           eval_optimizer, shooting_solve)
from .constants import (GNParams, constants_for, log_optimizer_l2, lyapunov_constant)
from .dual_flows import (FD_COLUMNS, FDConfig, FDMode, gaussian_heat_entropy,
                         heat_entropy_production, run_fd, run_rho_flow)
from .duality import (build_transport, logsob_limit_check, optimizer_pair, random_pair,
                      run_duality, verify_chain)
from .errors import DomainError, StepFailure
from .flow import (FLOW_COLUMNS, U_FLOW_COLUMNS, FlowConfig, Frame, generalized_flow_u,
                   line_grid, line_initial, manifold_profile, normalize_lp,
                   optimizer_norm, run_flow)
from .functionals import (convexity_check, g_functional, gns_quotient, primal_quotient)
from .grid import GridFunction, WeightedGrid
from .identities import (AbOperatorSpec, Classification, NuKind, lambda_scan,
                         perturbed_starts, rigidity_identity_check, rigidity_solve,
                         rigidity_threshold, tapered, ultraspherical_spec,
                         verify_identity_1, verify_identity_2)
from .schema import Command, Report, RunConfig, Violation
from .trace import FlowTrace
from .transform import stereographic_inequality_check
from .writer import merge_reports, read_reports, write_report, write_table, write_trace

logger = logging.getLogger(__name__)

RANDOM_PAIRS = 20
IDENTITY_SAMPLES = 20
FLOW_INITS = ('legendre2', 'constant', 'random')
RANDOM_FLOWS = 5
LINE_SIZE = 1201


class Outcome(NamedTuple):
    results: Dict[str, Any]
    violations: List[Violation]
    files: List[str]


def tag(p: float) -> str:
    """File name tag of an exponent, such as p4 or p2.5."""
    return f'p{p:g}'


class _Checks:
    """Collects failed checks of one pipeline run."""

    def __init__(self) -> None:
        self.violations: List[Violation] = []

    def at_most(self, name: str, got: float, tolerance: float,
                expected: float = 0.0) -> None:
        if not got <= tolerance:
            self.violations.append(Violation(
                check=name, expected=expected, got=float(got), tolerance=tolerance))

    def at_least(self, name: str, got: float, bound: float) -> None:
        if not got >= bound:
            self.violations.append(Violation(
                check=name, expected=bound, got=float(got), tolerance=0.0))

    def converges(self, name: str, coarse: float, fine: float, ratio: float,
                  floor: float) -> None:
        """Require coarse / fine >= ratio unless the fine error is below floor."""
        if fine <= floor:
            return
        self.at_least(name, coarse / fine, ratio)


def _drift(values: np.ndarray, relative: bool = False) -> float:
    change = float(np.max(np.abs(values - values[0])))
    return change / abs(values[0]) if relative else change


# constants


def run_constants(params: GNParams, cfg: RunConfig) -> Outcome:
    tol = cfg.tolerances
    checks = _Checks()
    p = params.p
    table = constants_for(params)
    size = 8 * cfg.grid_size + 1
    if params.is_supercritical:
        half = 20.0 * max(1.0, p - 2)
        grid = WeightedGrid.uniform(-half, half, size)
        kind = OptimizerKind.FStarLine
    else:
        grid = WeightedGrid.uniform(-math.pi / 2, math.pi / 2, size)
        kind = OptimizerKind.FStarCompact
    f = eval_optimizer(Optimizer(kind, p), grid)
    parts = primal_quotient(f, params).breakdown
    l2 = math.exp(log_optimizer_l2(params))
    expected = {
        'l2': l2,
        'lp': 4 * l2 / (p + 2),
        'gradient': 4 * l2 / ((p + 2) * abs(p - 2))
    }
    errors = {name: relative_gap(parts[name], value) for name, value in expected.items()}
    for name, error in errors.items():
        checks.at_most(f'quadrature_{name}', error, tol.constants_rel)
    quotient = table.c_p * primal_quotient(f, params).value
    checks.at_most('c_p_times_primal', relative_gap(quotient, table.c1_or_c2),
                   tol.quotient_rel)
    gns = gns_quotient(f, params)
    checks.at_most('c_gn_quotient', relative_gap(gns, table.c_gn), tol.quotient_rel)
    shooting = shooting_solve(params, 1.0)
    results = {
        'table': table.dict(),
        'params': params.to_dict(),
        'quadrature': parts,
        'quadrature_errors': errors,
        'gns_quotient': gns,
        'lyapunov_constant': lyapunov_constant(params),
        'shooting_outcome': shooting.outcome.value,
        'shooting_energy_drift': shooting.energy_drift
    }
    if params.is_supercritical:
        k = (params.d - 2) / 2
        lhs, rhs, _ = stereographic_inequality_check(
            lambda r: (2 / (1 + r ** 2)) ** k,
            lambda r: -2 * k * r / (1 + r ** 2) * (2 / (1 + r ** 2)) ** k, params)
        checks.at_most('stereographic_equality', relative_gap(lhs, rhs), tol.quotient_rel)
        results['stereographic'] = {'lhs': lhs, 'rhs': rhs}
    else:
        wide = WeightedGrid.uniform(-math.pi / (2 - p), math.pi / (2 - p), size)
        scaled = GridFunction(wide, Optimizer(kind, p, dilation=(2 - p) / 2)(wide.nodes))
        results['g_functional_at_optimizer'] = g_functional(scaled, params).value
    return Outcome(results, checks.violations, [])


# duality


def run_duality_battery(params: GNParams, cfg: RunConfig) -> Outcome:
    tol = cfg.tolerances
    checks = _Checks()
    report = run_duality(params, cfg.grid_size, starts=3)
    checks.violations.extend(report.violations(tol))
    checks.at_most('start_spread', report.start_spread, tol.closed_form_rel)
    checks.at_most('primal_fit', report.primal_fit_error, 1e-3)

    plan = build_transport(*optimizer_pair(params))
    pushforward = max(plan.pushforward_errors())
    checks.at_most('pushforward', pushforward, tol.closed_form_rel)
    chain = verify_chain(plan, params)
    checks.at_least('optimizer_chain_slack', chain.min_inequality_slack, -tol.chain_slack)
    near_equality = max(abs(s.slack) for s in chain.steps)
    checks.at_most('optimizer_chain_near_equality', near_equality, 1e-3)

    rng = np.random.default_rng(cfg.seed)
    random_slack = math.inf
    for _ in range(RANDOM_PAIRS):
        random_chain = verify_chain(build_transport(*random_pair(rng)), params)
        random_slack = min(random_slack, random_chain.step('holder').slack,
                           random_chain.step('cauchy_schwarz').slack)
    checks.at_least('random_chain_slack', random_slack, -tol.chain_slack)

    logsob = logsob_limit_check(seed=cfg.seed)
    checks.at_most('logsob_gaussian_inf', abs(logsob.gaussian_inf), tol.logsob_bracket)
    checks.at_most('logsob_gaussian_sup', abs(logsob.gaussian_sup), tol.logsob_bracket)
    checks.at_most('logsob_sup_side', logsob.max_sup, 1e-7)
    checks.at_least('logsob_inf_side', logsob.min_inf, -1e-7)
    checks.at_most('logsob_slope', abs(logsob.slope_above - logsob.slope_reference),
                   tol.logsob_slope, expected=logsob.slope_reference)

    data = report.dict()
    header = sorted(data)
    csv = write_table(header, [[data[name] if data[name] is not None else math.nan
                                for name in header]],
                      cfg.output_dir, f'duality_{tag(params.p)}')
    results = {
        'duality': data,
        'pushforward_error': pushforward,
        'optimizer_chain': {s.name: s.slack for s in chain.steps},
        'random_chain_min_slack': random_slack,
        'logsob': logsob._asdict()
    }
    return Outcome(results, checks.violations, [csv])


# flows


def flow_grid(params: GNParams, size: int) -> WeightedGrid:
    if params.is_supercritical:
        return WeightedGrid.nu_p(params, size)
    return WeightedGrid.xi_p(params, size)


def flow_profile(params: GNParams, init: str) -> Callable[[np.ndarray], np.ndarray]:
    """Closed form initial profile in the ultraspherical variable."""
    def bounded(s):
        return s if params.is_supercritical else 2 / math.pi * np.arctan(s)

    if init == 'legendre2':
        return lambda s: 1 + 0.3 * (3 * bounded(s) ** 2 - 1) / 2
    if init == 'constant':
        return lambda s: np.ones_like(s)
    raise DomainError(
        f'Unknown initial datum "{init}". Choose from {", ".join(FLOW_INITS)}.')


def flow_initial(params: GNParams, grid: WeightedGrid, init: str,
                 seed: int = 0) -> GridFunction:
    """Positive initial datum with |f|_p = 1 in the ultraspherical variables."""
    if init == 'random':
        values = perturbed_starts(params, 1.0, grid, 1, seed)[0].values
    else:
        values = flow_profile(params, init)(grid.nodes)
    return normalize_lp(GridFunction(grid, values), 1.0, params.p)


def _dissipation_excess(trace: FlowTrace, relative: float, absolute: float) -> float:
    """Largest |lhs - rhs| beyond max(relative |rhs|, absolute) over interior rows."""
    if len(trace) < 3:
        return 0.0
    lhs = trace.column('dissipation_lhs')[1:-1]
    rhs = trace.column('dissipation_rhs')[1:-1]
    excess = np.abs(lhs - rhs) - np.maximum(relative * np.abs(rhs), absolute)
    return float(np.max(excess))


def dissipation_mismatch(trace: FlowTrace) -> float:
    """Largest |lhs - rhs| of the dissipation identity over interior rows."""
    if len(trace) < 3:
        return 0.0
    lhs = trace.column('dissipation_lhs')[1:-1]
    rhs = trace.column('dissipation_rhs')[1:-1]
    return float(np.max(np.abs(lhs - rhs)))


def frame_gap(ultra: FlowTrace, line: FlowTrace) -> float:
    """Largest gap between the Lyapunov traces of both frames at the line times."""
    matched = np.interp(line.column('t'), ultra.column('t'), ultra.column('lyapunov'))
    return float(np.max(np.abs(matched - line.column('lyapunov'))))


def _flow(params: GNParams, frame: Frame, initial: GridFunction, t_end: float,
          **kwargs) -> FlowTrace:
    cfg = FlowConfig(params, frame, initial.grid, t_end,
                     norm_target=optimizer_norm(params, frame), **kwargs)
    return run_flow(cfg, initial)


def run_flow_battery(params: GNParams, cfg: RunConfig) -> Outcome:
    """Ultraspherical flow from the configured datum and from seeded random data,
    flows from fixed points in both frames, a frame consistency run and a grid
    refinement of the dissipation identity."""
    tol = cfg.tolerances
    checks = _Checks()
    grid = flow_grid(params, cfg.grid_size)
    initial = flow_initial(params, grid, cfg.init, cfg.seed)
    trace = _flow(params, Frame.UltraF, initial, cfg.t_end)
    name = f'flow_{tag(params.p)}_{cfg.init}'
    files = [write_trace(trace, cfg.output_dir, name, FLOW_COLUMNS)]
    lyapunov = trace.column('lyapunov')
    checks.at_most('lyapunov_monotone', trace.monotone_violations, 0)
    checks.at_most('lyapunov_final', abs(lyapunov[-1]), tol.lyapunov_final)
    norm_drift = _drift(trace.column('conserved_norm'), relative=True)
    checks.at_most('norm_conservation', norm_drift, tol.conservation)
    excess = _dissipation_excess(trace, tol.dissipation_rel, tol.dissipation_abs)
    checks.at_most('dissipation_identity', excess, 0.0)
    results = {
        'lyapunov_initial': float(lyapunov[0]),
        'lyapunov_final': float(lyapunov[-1]),
        'max_increase': trace.max_increase,
        'norm_drift': norm_drift,
        'dissipation_excess': excess,
        'steps': trace.metadata.get('steps')
    }

    random_violations, random_final = 0, 0.0
    for k in range(RANDOM_FLOWS):
        start = flow_initial(params, grid, 'random', cfg.seed + k)
        random_trace = _flow(params, Frame.UltraF, start, cfg.t_end)
        random_violations += random_trace.monotone_violations
        random_final = max(random_final, abs(random_trace.column('lyapunov')[-1]))
    checks.at_most('random_lyapunov_monotone', random_violations, 0)
    checks.at_most('random_lyapunov_final', random_final, tol.lyapunov_final)
    results.update({'random_runs': RANDOM_FLOWS, 'random_lyapunov_final': random_final})

    # flows started at zeros of the Lyapunov functional stay there
    short = min(cfg.t_end, 1.0)
    fixed = {'constant': flow_initial(params, grid, 'constant')}
    if params.is_supercritical:
        fixed['manifold'] = normalize_lp(
            manifold_profile(1.0, 0.2, grid, params), 1.0, params.p)
    fixed_lyapunov = {
        label: float(np.max(np.abs(_flow(params, Frame.UltraF, f0,
                                         short).column('lyapunov'))))
        for label, f0 in fixed.items()
    }
    line = line_grid(params, LINE_SIZE)
    v_star = line_initial(flow_profile(params, 'constant'), params, line)
    fixed_lyapunov['v_star'] = float(np.max(np.abs(
        _flow(params, Frame.LineV, v_star, short).column('lyapunov'))))
    for label, value in fixed_lyapunov.items():
        checks.at_most(f'fixed_point_{label}', value, tol.fixed_point)
    results['fixed_point_lyapunov'] = fixed_lyapunov

    profile = flow_profile(params, 'legendre2')
    ultra = _flow(params, Frame.UltraF, flow_initial(params, grid, 'legendre2'), short,
                  output_stride=1)
    line_trace = _flow(params, Frame.LineV, line_initial(profile, params, line), short)
    files.append(write_trace(line_trace, cfg.output_dir, f'{name}_line', FLOW_COLUMNS))
    gap = frame_gap(ultra, line_trace)
    checks.at_most('frame_consistency', gap, tol.frame_consistency)
    results.update({'frame_gap': gap, 'line_radius': line_trace.metadata['radius']})

    refine = min(cfg.t_end, 0.5)
    mismatch = []
    for size in (cfg.grid_size, 2 * cfg.grid_size):
        fine = flow_grid(params, size)
        mismatch.append(dissipation_mismatch(_flow(
            params, Frame.UltraF, flow_initial(params, fine, 'legendre2'), refine,
            output_stride=1)))
    checks.converges('dissipation_refinement', *mismatch, tol.dissipation_refinement,
                     tol.dissipation_abs)
    results['dissipation_mismatch'] = {'coarse': mismatch[0], 'fine': mismatch[1]}

    if params.p != 6:
        u0 = initial.with_values(initial.values ** (1 / params.beta))
        u_trace = generalized_flow_u(params, u0, cfg.t_end)
        files.append(write_trace(u_trace, cfg.output_dir, f'{name}_u', U_FLOW_COLUMNS))
        u_drift = _drift(u_trace.column('u_bar'), relative=True)
        checks.at_most('u_bar_conservation', u_drift, tol.conservation)
        results['u_bar_drift'] = u_drift
    return Outcome(results, checks.violations, files)


# fast diffusion


def fd_grid(size: int, radius: float = 10.0) -> WeightedGrid:
    return WeightedGrid.uniform(-radius, radius, size)


def barenblatt_initial(m: float, grid: WeightedGrid, shift: float = 0.0,
                       mass: float = 1.0) -> GridFunction:
    """Barenblatt profile of the given grid mass, optionally shifted and renormalized."""
    constant = barenblatt_mass_constant(m, mass, grid)
    y = grid.nodes - shift
    values = (constant + barenblatt_coefficient(m) * y ** 2) ** (1 / (m - 1))
    values = values * (mass / grid.integrate(values))
    return GridFunction(grid, values, True)


def run_fastdiff_battery(params: GNParams, cfg: RunConfig) -> Outcome:
    tol = cfg.tolerances
    checks = _Checks()
    m = params.m_fd
    grid = fd_grid(cfg.grid_size)
    files = []
    traces = {}
    runs = [('stationary', FDMode.SelfSimilar, 0.0), ('offcenter', FDMode.SelfSimilar, 1.0)]
    # the second moment constraint needs m > 1/2
    if m > 0.5:
        runs.append(('constrained', FDMode.SigmaConstrained, 1.0))
    for label, mode, shift in runs:
        fd_cfg = FDConfig(m, mode, grid, 1.0, cfg.t_end, params=params)
        trace = run_fd(fd_cfg, barenblatt_initial(m, grid, shift))
        traces[label] = trace
        files.append(write_trace(
            trace, cfg.output_dir, f'fastdiff_{tag(params.p)}_{label}', FD_COLUMNS))

    stationary = traces['stationary']
    drift = max(_drift(stationary.column(name))
                for name in ('entropy', 'mass', 'second_moment', 'l1_distance'))
    checks.at_most('barenblatt_stationary', drift, tol.fd_stationary)
    offcenter = traces['offcenter']
    l1 = float(offcenter.column('l1_distance')[-1])
    checks.at_most('l1_to_barenblatt', l1, tol.fd_l1)
    checks.at_most('entropy_monotone', offcenter.monotone_violations, 0)
    gap = float(np.min(offcenter.column('entropy') - offcenter.column('scaling_optimum')))
    checks.at_least('entropy_scaling_bound', gap, -tol.fd_f1_slack)
    mass_drift = _drift(offcenter.column('mass'), relative=True)
    checks.at_most('mass_conservation', mass_drift, tol.conservation)
    moment_drift = None
    if 'constrained' in traces:
        moment_drift = _drift(traces['constrained'].column('second_moment'), relative=True)
        checks.at_most('moment_conservation', moment_drift, tol.conservation)
    results = {
        'm': m,
        'stationary_drift': drift,
        'final_l1_distance': l1,
        'entropy_gap_min': gap,
        'mass_drift': mass_drift,
        'moment_drift': moment_drift,
        'dual_quotient_final': float(offcenter.column('dual_quotient')[-1])
    }
    return Outcome(results, checks.violations, files)


# gradient flows


def heat_grid(size: int, radius: float = 30.0) -> WeightedGrid:
    return WeightedGrid.uniform(-radius, radius, size)


def gaussian_entropy_error(trace: FlowTrace, q: float) -> float:
    """Largest relative gap of int rho^q to the Gaussian heat trajectory."""
    analytic = gaussian_heat_entropy(trace.column('t'), q)
    return float(np.max(np.abs(trace.column('entropy') - analytic) / analytic))


def run_gradflow_battery(params: GNParams, cfg: RunConfig) -> Outcome:
    """Heat flow entropy production with q = 2/p for 1 < p < 2, the gradient flow of
    int rho^(p/2) for 2 < p < 3, and the convexity check of the action."""
    tol = cfg.tolerances
    checks = _Checks()
    p = params.p
    grid = heat_grid(cfg.grid_size)
    gaussian = Optimizer(OptimizerKind.Gaussian)
    rho0 = GridFunction(grid, gaussian(grid.nodes), True)
    results: Dict[str, Any] = {}
    if params.is_supercritical:
        # rho^(1-p/2) blows up on Gaussian tails, start from an algebraic tail
        cauchy = GridFunction(grid, 1 / (math.pi * (1 + grid.nodes ** 2)), True)
        trace = run_rho_flow(params, cauchy, cfg.t_end)
        files = [write_trace(trace, cfg.output_dir, f'gradflow_{tag(p)}')]
        excess = _dissipation_excess(trace, tol.dissipation_rel, tol.dissipation_abs)
        checks.at_most('dissipation_identity', excess, 0.0)
        mass_drift = _drift(trace.column('mass'), relative=True)
        checks.at_most('mass_conservation', mass_drift, tol.conservation)
        checks.at_most('entropy_monotone', trace.monotone_violations, 0)
        results.update({'dissipation_excess': excess, 'mass_drift': mass_drift,
                        'max_increase': trace.max_increase})
    else:
        q = 2 / p
        trace = heat_entropy_production(rho0, q, cfg.t_end)
        files = [write_trace(trace, cfg.output_dir, f'gradflow_{tag(p)}',
                             ('t', 'entropy', 'production', 'bound', 'mass',
                              'boundary_flux'))]
        t = trace.column('t')
        entropy_error = gaussian_entropy_error(trace, q)
        fine = heat_grid(2 * cfg.grid_size - 1)
        fine_error = gaussian_entropy_error(heat_entropy_production(
            GridFunction(fine, gaussian(fine.nodes), True), q, cfg.t_end), q)
        checks.converges('heat_refinement', entropy_error, fine_error,
                         tol.refinement_ratio, tol.refinement_floor)
        analytic = gaussian_heat_entropy(t, q)
        checks.at_most('gaussian_entropy', entropy_error, tol.heat_rel)
        rate = (q - 1) / (1 + 2 * t) * analytic
        production = trace.column('production')
        production_error = float(np.max(np.abs(production - rate) / rate))
        checks.at_most('entropy_production', production_error, tol.heat_rel)
        bound_gap = float(np.min(production - trace.column('bound')))
        checks.at_least('decay_bound', bound_gap, 0.0)
        action_error = float(np.max(np.abs(trace.column('action_rate') - production)
                                    / production))
        results.update({
            'q': q, 'entropy_error': entropy_error, 'production_error': production_error,
            'bound_gap_min': bound_gap, 'action_error': action_error,
            'fine_entropy_error': fine_error,
            'mass_drift': _drift(trace.column('mass'), relative=True),
            'leakage': trace.metadata['leakage'],
            'leakage_rel': trace.metadata['leakage_rel']
        })
    convexity = {}
    for alpha in (0.0, 0.5, 1.0, -0.5, 1.5):
        sampled = convexity_check(alpha, seed=cfg.seed)
        convexity[f'{alpha:g}'] = {'convex': bool(sampled.convex),
                                    'witness': sampled.witness}
        if sampled.convex != (0 <= alpha <= 1):
            checks.violations.append(Violation(
                check=f'convexity_alpha_{alpha:g}', expected=float(0 <= alpha <= 1),
                got=float(sampled.convex), tolerance=0.0))
    results['convexity'] = convexity
    return Outcome(results, checks.violations, files)


# identities


def identity_battery(spec: AbOperatorSpec, seed: int, count: int = IDENTITY_SAMPLES):
    """Largest mismatches of both identities over seeded tapered test functions."""
    rng = np.random.default_rng(seed)
    radius = spec.grid.nodes[-1]
    worst_1 = worst_2 = 0.0
    for _ in range(count):
        c = rng.uniform(-1, 1, 4)
        s = rng.uniform(-0.5, 0.5, 3)

        def signed(x):
            t = x / radius
            return c[0] + c[1] * t + c[2] * t ** 2 + c[3] * np.sin(3 * t)

        def positive(x):
            t = x / radius
            return np.exp(s[0] * t + s[1] * t ** 2 + s[2] * np.cos(2 * t))

        worst_1 = max(worst_1, verify_identity_1(tapered(spec.grid, signed), spec).mismatch)
        worst_2 = max(worst_2, verify_identity_2(tapered(spec.grid, positive),
                                                 spec).mismatch)
    return worst_1, worst_2


def run_identities_battery(params: GNParams, cfg: RunConfig) -> Outcome:
    tol = cfg.tolerances
    checks = _Checks()
    own = ultraspherical_spec(params, cfg.grid_size)
    other_nu = NuKind.OnePlusY2 if own.nu is NuKind.OneMinusZ2 else NuKind.OneMinusZ2
    specs = {
        own.nu.value: own,
        other_nu.value: AbOperatorSpec.build(1.0, abs(params.weight_exponent), other_nu,
                                             cfg.grid_size)
    }
    results = {}
    for label, spec in specs.items():
        worst_1, worst_2 = identity_battery(spec, cfg.seed)
        fine = AbOperatorSpec.build(spec.a, spec.b, spec.nu, 2 * cfg.grid_size - 1,
                                    float(spec.grid.nodes[-1]))
        fine_1, fine_2 = identity_battery(fine, cfg.seed, 3)
        coarse_1, coarse_2 = identity_battery(spec, cfg.seed, 3)
        checks.at_most(f'identity_1_{label}', worst_1, tol.identity_rel)
        checks.at_most(f'identity_2_{label}', worst_2, tol.identity_rel)
        checks.converges(f'identity_1_refinement_{label}', coarse_1, fine_1,
                         tol.refinement_ratio, tol.refinement_floor)
        checks.converges(f'identity_2_refinement_{label}', coarse_2, fine_2,
                         tol.refinement_ratio, tol.refinement_floor)
        results[label] = {
            'a': spec.a, 'b': spec.b,
            'identity_1_mismatch': worst_1, 'identity_2_mismatch': worst_2,
            'identity_1_refinement': coarse_1 / max(fine_1, 1e-300),
            'identity_2_refinement': coarse_2 / max(fine_2, 1e-300)
        }
    return Outcome(results, checks.violations, [])


# rigidity


def run_rigidity_battery(params: GNParams, cfg: RunConfig) -> Outcome:
    tol = cfg.tolerances
    checks = _Checks()
    grid = flow_grid(params, cfg.grid_size)
    threshold = rigidity_threshold(params)
    rows = lambda_scan(params, grid, seed=cfg.seed, workers=cfg.workers)
    csv = write_table(
        ('lambda', 'classification', 'max_deviation'),
        [(row.lam, row.classification.value, row.max_deviation) for row in rows],
        cfg.output_dir, f'rigidity_{tag(params.p)}', ('%.17g', '%s', '%.17g'))
    below = [row for row in rows if row.lam < threshold]
    nonconstant = sum(row.classification is Classification.Nonconstant for row in below)
    checks.at_most('nonconstant_below_threshold', nonconstant, 0)
    worst_sum, worst_term, solved = 0.0, 0.0, 0
    for fraction in (0.25, 0.5, 0.75):
        lam = fraction * threshold
        for start in perturbed_starts(params, lam, grid, 20, cfg.seed):
            result = rigidity_solve(params, lam, start)
            if result.classification is Classification.Diverged:
                continue
            solved += 1
            identity = rigidity_identity_check(result.solution, params, lam)
            worst_sum = max(worst_sum, abs(identity.total))
            worst_term = min(worst_term, identity.term1, identity.term2)
    checks.at_most('rigidity_identity_sum', worst_sum, tol.rigidity_sum)
    checks.at_least('rigidity_identity_terms', worst_term, -tol.rigidity_term)
    first_nonconstant = next(
        (row.lam for row in rows if row.classification is Classification.Nonconstant),
        None)
    results = {
        'threshold': threshold,
        'first_nonconstant_lambda': first_nonconstant,
        'nonconstant_below_threshold': nonconstant,
        'solved': solved,
        'identity_sum_max': worst_sum,
        'identity_term_min': worst_term
    }
    return Outcome(results, checks.violations, [csv])


def _step_failure(cfg: RunConfig, p: float, err: StepFailure) -> Outcome:
    """Failed outcome of a run whose time stepping broke down, with its partial trace."""
    logger.error('%s for p=%g stopped: %s', cfg.command.value, p, err)
    files, reached = [], 0.0
    if err.trace is not None and len(err.trace):
        reached = float(err.trace.column('t')[-1])
        files.append(write_trace(err.trace, cfg.output_dir,
                                 f'{cfg.command.value}_{tag(p)}_failed'))
    violation = Violation(check='step_failure', expected=cfg.t_end, got=reached,
                          tolerance=0.0)
    return Outcome({'step_failure': str(err), 'reached_t': reached}, [violation], files)


PIPELINES: Dict[Command, Callable[[GNParams, RunConfig], Outcome]] = {
    Command.Constants: run_constants,
    Command.Duality: run_duality_battery,
    Command.Flow: run_flow_battery,
    Command.FastDiffusion: run_fastdiff_battery,
    Command.GradientFlow: run_gradflow_battery,
    Command.Identities: run_identities_battery,
    Command.Rigidity: run_rigidity_battery,
}


def _run_one(cfg: RunConfig, p: float) -> Report:
    pipeline = PIPELINES[cfg.command]
    logger.info('Running %s for p=%g.', cfg.command.value, p)
    try:
        outcome = pipeline(GNParams(p), cfg)
    except StepFailure as err:
        outcome = _step_failure(cfg, p, err)
    params = dict(cfg.echo(), p=p)
    report = Report(command=cfg.command.value, params=params,
                    results=dict(outcome.results, files=sorted(
                        pathlib.Path(f).name for f in outcome.files)),
                    violations=outcome.violations)
    write_report(report, cfg.output_dir, f'{cfg.command.value}_{tag(p)}')
    return report


def run_command(cfg: RunConfig) -> Report:
    """Run a command for every exponent of the configuration.

    Exponents are spread over a thread pool. Each worker writes its own report file
    and the merged report is written once all workers are done.
    """
    if cfg.command is Command.Report:
        return merge_folder(cfg)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        reports = list(pool.map(lambda p: _run_one(cfg, p), cfg.p))
    merged = merge_reports(reports, cfg.command.value, cfg.echo(),
                           [tag(p) for p in cfg.p])
    write_report(merged, cfg.output_dir, cfg.command.value)
    logger.info('%s finished with %d violations.', cfg.command.value,
                len(merged.violations))
    return merged


def merge_folder(cfg: RunConfig) -> Report:
    """Merge every per-exponent report of the output folder into report.json."""
    folder = pathlib.Path(cfg.output_dir)
    files = sorted(f for f in folder.glob('*_p*.json'))
    if not files:
        raise DomainError(f'No per-exponent reports found in {folder.as_posix()}.')
    reports = read_reports(files)
    params = {'command': Command.Report.value, 'files': [f.name for f in files]}
    merged = merge_reports(reports, Command.Report.value, params,
                           [f.stem for f in files])
    write_report(merged, cfg.output_dir, Command.Report.value)
    return merged
