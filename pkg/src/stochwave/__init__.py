"""Energy-preserving Padé time integrators for the stochastic wave equation.

Spatial discretizations: fourth-order compact finite differences
(:class:`CfdOperator`) and symmetric interior penalty DG (:class:`DgSpace`).
"""

from .cfd import CfdOperator
from .dg import DgFunction, DgSpace, average, jump
from .domain import Boundary, ConfigurationError, Grid, make_uniform_grid
from .energy import (
    EnergyRecord,
    cfd_energy,
    dg_energy,
    discrete_energy,
    expected_step_increment,
    expected_step_increment_cfd,
    expected_step_increment_dg,
    pathwise_residual,
    pathwise_residual_cfd,
    pathwise_residual_dg,
)
from .kernels import BACKEND
from .montecarlo import (
    ConvergenceReport,
    EnsembleFailure,
    EnsembleStats,
    RunConfig,
    estimate_order,
    run_ensemble,
)
from .noise import IncrementBlock, NoiseModel, default_spectrum, path_rng, sample_increments
from .nonlinearity import Diffusion, Nonlinearity, discrete_gradient
from .schemes import (
    PadeCoefficients,
    SchemeConfig,
    SchemeState,
    StepFailure,
    make_stepper,
    pade_coefficients,
    step_bem,
    step_cnm,
    step_pade_dg_cfd,
    step_pade_dg_galerkin,
)

__version__ = "0.1.0"
