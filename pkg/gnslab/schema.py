"""Schema for run configurations, tolerances and reports."""
import enum
import json
import pathlib
from typing import Any, Dict, Iterable, List, Tuple, Union

from pydantic import BaseModel, Field, validator

from .errors import DomainError


class Command(enum.Enum):
    """Pipelines the command line can run."""
    Constants = 'constants'
    Duality = 'duality'
    Flow = 'flow'
    FastDiffusion = 'fastdiff'
    GradientFlow = 'gradflow'
    Identities = 'identities'
    Rigidity = 'rigidity'
    Report = 'report'  # merge per-worker files


class Tolerances(BaseModel):
    """Acceptance tolerances. Every check of a pipeline compares against one of these."""
    constants_rel: float = Field(
        1e-7, description='Quadrature against Gamma-ratio formulas, relative.')
    quotient_rel: float = Field(
        1e-6, description='Quotients at the closed-form optimizer against the constants.')
    duality_gap: float = Field(
        2e-4, description='|sup - c_p inf| / sup.')
    closed_form_rel: float = Field(
        1e-4, description='Numerical inf and sup against C1 or C2, relative.')
    logsob_slope: float = Field(
        5e-3, description='Finite difference slope of C1 at p = 2 against 1 + log(2 pi).')
    logsob_bracket: float = Field(
        1e-6, description='Log-Sobolev brackets at the standard Gaussian.')
    monotone_slack: float = Field(
        1e-7, description='Allowed increase of a Lyapunov functional per step, '
        'scaled by 1 + |F|.')
    lyapunov_final: float = Field(
        1e-4, description='|F| at the end of a flow run.')
    dissipation_rel: float = Field(
        1e-3, description='Finite difference -dF/dt against quadrature, relative.')
    dissipation_abs: float = Field(
        5e-6, description='Finite difference -dF/dt against quadrature, absolute.')
    conservation: float = Field(
        1e-5, description='Relative drift of conserved quantities.')
    identity_rel: float = Field(
        1e-5, description='Integration by parts identities, relative.')
    rigidity_sum: float = Field(
        1e-5, description='Sum of the rigidity identity at a converged solution.')
    rigidity_term: float = Field(
        1e-9, description='Allowed negative part of each rigidity term.')
    fd_stationary: float = Field(
        1e-6, description='Drift of trace columns from Barenblatt initial data.')
    fd_l1: float = Field(
        1e-3, description='L1 distance to the Barenblatt profile at the end of a run.')
    fd_f1_slack: float = Field(
        1e-8, description='Allowed amount of F1 below its scaling optimum.')
    heat_rel: float = Field(
        1e-4, description='Heat flow entropy against the Gaussian trajectory, relative.')
    chain_slack: float = Field(
        1e-7, description='Allowed negative slack of a transport chain inequality.')
    frame_consistency: float = Field(
        1e-4, description='Lyapunov traces of the two flow frames at matched times.')
    fixed_point: float = Field(
        1e-6, description='|F| along a flow started at a fixed point.')
    dissipation_refinement: float = Field(
        3.0, description='Minimal drop of the dissipation identity mismatch when the '
        'grid is doubled.')
    refinement_ratio: float = Field(
        3.5, description='Minimal error ratio between a grid and its refinement, '
        'about second order.')
    refinement_floor: float = Field(
        1e-8, description='Errors below this value pass a refinement check.')

    def override(self, pairs: Iterable[str]) -> 'Tolerances':
        """Get a copy with ``name=value`` entries applied."""
        values = self.dict()
        for pair in pairs:
            name, sep, value = pair.partition('=')
            name = name.strip()
            if not sep or name not in values:
                raise DomainError(
                    f'Invalid tolerance override "{pair}". Valid names are: '
                    f'{", ".join(sorted(values))}')
            try:
                values[name] = float(value)
            except ValueError:
                raise DomainError(
                    f'Tolerance {name} must be a number. Got "{value}".') from None
        return Tolerances(**values)


class RunConfig(BaseModel):
    """Configuration of one command line run."""
    command: Command = Field(..., description='Pipeline to run.')
    p: List[float] = Field(
        [4.0], description='Exponent or list of exponents of a sweep.')
    grid_size: int = Field(1024, description='Number of grid nodes.')
    t_end: float = Field(10.0, description='Final time of flow runs.')
    seed: int = Field(0, description='Seed for randomized batteries.')
    init: str = Field('legendre2', description='Initial datum of flow runs.')
    output_dir: str = Field('.', description='Folder for result files.')
    workers: int = Field(None, description='Worker threads for sweeps.')
    tolerances: Tolerances = Field(Tolerances())

    @validator('grid_size')
    def check_grid_size(cls, v):
        if v < 64:
            raise ValueError(f'grid_size must be at least 64. Got {v}.')
        return v

    @validator('p', pre=True)
    def check_p(cls, v):
        values = [v] if isinstance(v, (int, float)) else list(v)
        if not values:
            raise ValueError('At least one exponent p is required.')
        for value in values:
            if value <= 1 or value == 2:
                raise ValueError(f'p must be larger than 1 and different from 2. Got {value}.')
        return values

    def echo(self) -> Dict[str, Any]:
        """Parameters echoed in reports. The output folder is left out."""
        data = self.dict(exclude={'output_dir', 'workers'})
        data['command'] = self.command.value
        return data


class Violation(BaseModel):
    """A failed acceptance check."""
    check: str = Field(..., description='Name of the check.')
    expected: float = Field(..., description='Reference value.')
    got: float = Field(..., description='Computed value.')
    tolerance: float = Field(..., description='Tolerance of the check.')


class DualityReport(BaseModel):
    """Numerical inf and sup of the duality theorem against the closed forms."""
    p: float
    primal_inf_numeric: float = Field(
        ..., description='Minimum of the primal quotient without the factor c_p.')
    dual_sup_numeric: float = Field(..., description='Maximum of the dual quotient.')
    closed_form: float = Field(..., description='C1 for p > 2 and C2 for p < 2.')
    c_p: float
    gap_primal: float = Field(
        ..., description='|c_p primal - closed_form| / closed_form.')
    gap_dual: float = Field(..., description='|dual - closed_form| / closed_form.')
    gap: float = Field(..., description='|dual - c_p primal| / dual.')
    primal_fit_error: float = Field(
        ..., description='Relative L2 distance of the primal minimizer to the fitted '
        'closed-form optimizer.')
    dual_fit_error: float = Field(
        ..., description='Relative L2 distance of the dual maximizer to the Barenblatt '
        'profile with the same mass and second moment.')
    parametric_sup: float = Field(
        None, description='Sup over the two parameter family (a + b y^2)^-q.')
    start_spread: float = Field(
        0.0, description='Relative spread of the primal values over the starting points.')
    primal_iterations: int = Field(0)
    dual_iterations: int = Field(0)

    def violations(self, tolerances: Tolerances) -> List[Violation]:
        """Acceptance checks of a duality run."""
        out = []
        checks: List[Tuple[str, float, float, float]] = [
            ('duality_gap', 0.0, self.gap, tolerances.duality_gap),
            ('primal_closed_form', 0.0, self.gap_primal, tolerances.closed_form_rel),
            ('dual_closed_form', 0.0, self.gap_dual, tolerances.closed_form_rel)
        ]
        upper = self.c_p * self.primal_inf_numeric + 1e-6
        if self.dual_sup_numeric > upper:
            out.append(Violation(
                check='weak_duality', expected=upper, got=self.dual_sup_numeric,
                tolerance=1e-6))
        for name, expected, got, tol in checks:
            if not got <= tol:
                out.append(Violation(check=name, expected=expected, got=got, tolerance=tol))
        return out


class Report(BaseModel):
    """JSON report written by every command."""
    command: str = Field(..., description='Command name.')
    params: Dict[str, Any] = Field(..., description='Echo of the run configuration.')
    results: Dict[str, Any] = Field(
        None, description='Command specific results keyed by name.')
    violations: List[Violation] = Field(
        None, description='Failed acceptance checks.')

    @validator('results', always=True)
    def empty_dict(cls, v):
        return {} if v is None else v

    @validator('violations', always=True)
    def empty_list(cls, v):
        return [] if v is None else v

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self, folder: Union[str, pathlib.Path], name: str = 'report') -> str:
        """Write the report as <name>.json inside folder."""
        target_folder = pathlib.Path(folder)
        target_folder.mkdir(parents=True, exist_ok=True)
        report_file = pathlib.Path(target_folder, f'{name}.json')
        report_file.write_text(json.dumps(self.dict(), indent=2, sort_keys=True))
        return report_file.as_posix()

    @classmethod
    def from_json(cls, path: Union[str, pathlib.Path]) -> 'Report':
        return cls.parse_obj(json.loads(pathlib.Path(path).read_text()))
