"""Monte Carlo solvers and a-priori certificates for mean-field quadratic
backward stochastic differential equations.

The package is organised in layers:

* :mod:`mfbsde.core` — time grids, Brownian ensembles, process containers.
* :mod:`mfbsde.dsl` — the small expression language for driver generators
  and terminal conditions.
* :mod:`mfbsde.scenario` — validated problem descriptions plus the built-in
  example families.
* :mod:`mfbsde.certificates` — the constant chain (window width, fixed-point
  ball radius, growth envelope) computed in log space.
* :mod:`mfbsde.regression`/:mod:`mfbsde.solver` — the least-squares backward
  solver for a single BSDE sweep.
* :mod:`mfbsde.meanfield` — frozen-mean fixed points, window stitching,
  global Picard iteration, split and vector-valued solvers.
* :mod:`mfbsde.oracle` — closed forms and a lattice reference solver used
  for validation.
* :mod:`mfbsde.diagnostics` — norms, envelope checks, ball tracking.
"""

__version__ = "0.1.0"

import os as _os

# Thread budget for the BLAS backends.  This has to land in the environment
# before numpy is imported for the first time, which is why it lives at the
# top of the package rather than in the command line module.
_threads = _os.environ.get("MFBSDE_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)
del _os

from .core import (
    MeanCurve,
    PathEnsemble,
    ProcessGrid,
    TimeGrid,
    Window,
    build_grid,
    ensemble_mean,
    simulate_brownian,
)
from .dsl import GeneratorExpr, builtin, evaluate, evaluate_terminal, parse, to_text
from .errors import (
    CertificateOverflow,
    DimensionError,
    EvalDomainError,
    FixedPointError,
    FixtureMissing,
    InfeasibleCertificate,
    InvalidInput,
    MaxIterations,
    MFBSDEError,
    NonContraction,
    ParseError,
    RegressionError,
    StepDivergence,
    WindowTooWide,
)
from .scenario import (
    FORM_GLOBAL_ODE,
    FORM_QUAD_GROWTH,
    FORM_SPLIT_LIPSCHITZ,
    FORM_SPLIT_QUADRATIC,
    ScenarioSpec,
    example_21,
    example_22,
    example_31,
    example_41,
    linear_scenario,
)
from .certificates import Certificate, ConstantChain, build_chain, certify, ode_bound
from .solver import BackwardSolver, SolverConfig, backward_step
from .meanfield import (
    FixedPointTrace,
    SolveResult,
    gamma_map,
    global_solve,
    local_solve,
    multidim_solve,
    picard_global,
    shift_fixed_point,
    shift_solve_simple,
)
from .config import load_config

__all__ = [
    "__version__",
    # core
    "TimeGrid", "Window", "PathEnsemble", "ProcessGrid", "MeanCurve",
    "build_grid", "simulate_brownian", "ensemble_mean",
    # dsl
    "GeneratorExpr", "parse", "to_text", "evaluate", "evaluate_terminal", "builtin",
    # scenarios
    "ScenarioSpec", "example_21", "example_22", "example_31", "example_41",
    "linear_scenario", "FORM_QUAD_GROWTH", "FORM_GLOBAL_ODE",
    "FORM_SPLIT_QUADRATIC", "FORM_SPLIT_LIPSCHITZ",
    # certificates
    "ConstantChain", "Certificate", "build_chain", "certify", "ode_bound",
    # solvers
    "SolverConfig", "BackwardSolver", "backward_step",
    "FixedPointTrace", "SolveResult", "gamma_map", "local_solve",
    "global_solve", "picard_global", "shift_solve_simple",
    "shift_fixed_point", "multidim_solve",
    # config
    "load_config",
    # errors
    "MFBSDEError", "InvalidInput", "ParseError", "DimensionError",
    "WindowTooWide", "EvalDomainError", "RegressionError", "StepDivergence",
    "FixedPointError", "NonContraction", "MaxIterations",
    "CertificateOverflow", "InfeasibleCertificate", "FixtureMissing",
]
