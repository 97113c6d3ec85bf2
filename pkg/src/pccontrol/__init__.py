"""Controls for linear systems under exact linear projection constraints.

The library discretizes y' = A y + B u exactly for piecewise-constant
inputs, minimizes convex dual functionals to produce controls achieving
approximate, exact, or null final-state targets while matching prescribed
projections of the control and of the trajectory, and certifies the
uniqueness/observability hypotheses those constructions require through
singular-value computations on assembled linear maps.
"""

from .core import (
    LinearSystem,
    StepOperator,
    TimeGrid,
    Trajectory,
    adjoint_solve,
    build_propagator,
    control_observation,
    duality_residual,
    forward_solve,
    signal_inner,
    signal_norm,
)
from .subspaces import SignalAmbient, Subspace, VectorAmbient, orthonormalize
from .functionals import (
    APPROX_KINDS,
    KINDS,
    QUADRATIC_KINDS,
    ControlSolution,
    DualVariable,
    ProblemData,
    ProxTerm,
    SolutionResiduals,
    apply_quadratic,
    dual_dot,
    dual_norm,
    eval_J,
    eval_smooth,
    grad_smooth,
    nonsmooth_value,
    recover_primal,
)
from .solvers import SolveDiagnostics, SolverOptions, certify_infeasibility, minimize
from .certificates import (
    ModalUCReport,
    ObservabilityReport,
    SpectralClassification,
    TwoTimeReport,
    UCReport,
    assemble_uc_map,
    kernel_N,
    modal_uc_check,
    observability_constant,
    restriction_kernel_check,
    spectral_uc_classify,
    two_time_check,
    uc_check,
)
from .models import (
    ModelDescriptor,
    OmegaRestriction,
    exponential_profile_signal,
    make_heat1d,
    make_ode,
    make_wave1d,
)
from .config import BuildResult, RunConfig, parse_config
from . import errors

__version__ = "0.1.0"

__all__ = [
    "TimeGrid", "LinearSystem", "StepOperator", "Trajectory",
    "build_propagator", "forward_solve", "adjoint_solve", "duality_residual",
    "control_observation", "signal_inner", "signal_norm",
    "VectorAmbient", "SignalAmbient", "Subspace", "orthonormalize",
    "KINDS", "APPROX_KINDS", "QUADRATIC_KINDS",
    "DualVariable", "ProblemData", "ControlSolution", "SolutionResiduals", "ProxTerm",
    "eval_J", "eval_smooth", "nonsmooth_value", "grad_smooth", "apply_quadratic",
    "recover_primal", "dual_dot", "dual_norm",
    "SolverOptions", "SolveDiagnostics", "minimize", "certify_infeasibility",
    "UCReport", "ObservabilityReport", "TwoTimeReport", "ModalUCReport",
    "SpectralClassification", "assemble_uc_map", "uc_check", "observability_constant",
    "kernel_N", "two_time_check", "restriction_kernel_check", "spectral_uc_classify",
    "modal_uc_check",
    "ModelDescriptor", "OmegaRestriction", "make_heat1d", "make_wave1d", "make_ode",
    "exponential_profile_signal",
    "RunConfig", "BuildResult", "parse_config",
    "errors",
]
