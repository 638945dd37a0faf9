# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
from .config import RunConfig, load_config, parse_config
from .discretization import (
    Field,
    Grid,
    JetField,
    build_grid,
    differentiate,
    eigen_sym,
    lagrangian_phase,
    linearized_metric,
)
from .errors import (
    BoundaryProjectionError,
    ConfigError,
    ConvexityLossError,
    FlowDivergedError,
    GridMismatchError,
    InvalidInputError,
    LagflowError,
    OutputError,
    StepRejectedError,
)
from .flow import FlowState, RunResult, enforce_boundary, init_state, run, step
from .geometry import (
    BoundaryPoint,
    ConvexDomain,
    eval_defining,
    inner_normal,
    make_domain,
    pushforward_quadratic,
)
from .legendre import (
    DualField,
    dual_boundary_residual,
    dual_flow_residual,
    hessian_inverse_check,
    legendre_transform,
)
from .models import (
    PerturbedGenerator,
    QuadraticGenerator,
    SteadyControl,
    StepControl,
)
from .monitors import (
    EstimateReport,
    MonitorRow,
    StepAudit,
    boundary_tangential_check,
    estimate_report,
    obliqueness,
    row_flags,
)
from .steady import (
    SteadySolution,
    compare_flow_vs_steady,
    solve_steady,
    steady_1d_closed_form,
)

try:
    from ._version import __version__ as version  # noqa
except ImportError:  # pragma: no cover
    version = "0.0.0"

__all__ = [
    "BoundaryPoint",
    "BoundaryProjectionError",
    "ConfigError",
    "ConvexDomain",
    "ConvexityLossError",
    "DualField",
    "EstimateReport",
    "Field",
    "FlowDivergedError",
    "FlowState",
    "Grid",
    "GridMismatchError",
    "InvalidInputError",
    "JetField",
    "LagflowError",
    "MonitorRow",
    "OutputError",
    "PerturbedGenerator",
    "QuadraticGenerator",
    "RunConfig",
    "RunResult",
    "SteadyControl",
    "SteadySolution",
    "StepAudit",
    "StepControl",
    "StepRejectedError",
    "boundary_tangential_check",
    "build_grid",
    "compare_flow_vs_steady",
    "differentiate",
    "dual_boundary_residual",
    "dual_flow_residual",
    "eigen_sym",
    "enforce_boundary",
    "estimate_report",
    "eval_defining",
    "hessian_inverse_check",
    "init_state",
    "inner_normal",
    "lagrangian_phase",
    "legendre_transform",
    "linearized_metric",
    "load_config",
    "make_domain",
    "obliqueness",
    "parse_config",
    "pushforward_quadratic",
    "row_flags",
    "run",
    "solve_steady",
    "steady_1d_closed_form",
    "step",
    "version",
]
