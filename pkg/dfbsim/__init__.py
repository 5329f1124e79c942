"""
Darcy-Forchheimer-Brinkman flow coupled to convection-diffusion-reaction transport.

This package provides a staggered-grid solver for the coupled system plus an
analysis toolkit that checks runs against the maximum principle, the Lp decay
rates and the blow-up bounds of the logistic reaction.
"""

from .core import SimConfig, StaggeredGrid, State, StepProfile, build_grid, init_state
from .config import load_config, parse_config
from .exceptions import (
    DFBSimException,
    BlowUpDetected,
    ConfigException,
    CsvIOException,
    HypothesisViolation,
    InstabilityException,
    LinearSolverException,
    NoBlowupGuarantee,
    SolverConvergenceException,
    VerificationFailure,
)
from .linsolve import LinearOperator, cg_solve, neumann_laplacian, poisson_neumann
from .momentum import MomentumParams, momentum_step, predictor, project, viscosity
from .transport import TransportParams, advect, diffuse, react, stable_dt, transport_step
from .analysis import (
    BoundsReport,
    NormRecord,
    NormSeries,
    Verdict,
    blowup_lower_bound,
    blowup_time,
    check_bounds,
    interpolation_constant,
    lp_norm,
    numerical_decay_rate,
    ode_integrate,
    theoretical_decay_rate,
)
from .csvio import read_csv, write_csv
from .runner import (
    BlowUpEvent,
    ExperimentSpec,
    blowup_study,
    decay_study,
    mms_convergence,
    perturbation_study,
    run_simulation,
)

__all__ = [
    # Configuration and grid
    'SimConfig',
    'StepProfile',
    'StaggeredGrid',
    'State',
    'build_grid',
    'init_state',
    'load_config',
    'parse_config',

    # Exceptions
    'DFBSimException',
    'BlowUpDetected',
    'ConfigException',
    'CsvIOException',
    'HypothesisViolation',
    'InstabilityException',
    'LinearSolverException',
    'NoBlowupGuarantee',
    'SolverConvergenceException',
    'VerificationFailure',

    # Solvers
    'LinearOperator',
    'cg_solve',
    'neumann_laplacian',
    'poisson_neumann',
    'MomentumParams',
    'momentum_step',
    'predictor',
    'project',
    'viscosity',
    'TransportParams',
    'advect',
    'diffuse',
    'react',
    'stable_dt',
    'transport_step',

    # Analysis
    'BoundsReport',
    'NormRecord',
    'NormSeries',
    'Verdict',
    'blowup_lower_bound',
    'blowup_time',
    'check_bounds',
    'interpolation_constant',
    'lp_norm',
    'numerical_decay_rate',
    'ode_integrate',
    'theoretical_decay_rate',
    'read_csv',
    'write_csv',

    # Experiments
    'BlowUpEvent',
    'ExperimentSpec',
    'blowup_study',
    'decay_study',
    'mms_convergence',
    'perturbation_study',
    'run_simulation',
]
