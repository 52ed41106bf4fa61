"""Convex constrained minimization via sequences of feasibility problems.

The toolkit turns ``min f(x) s.t. g_i(x) <= 0`` into repeated convex
feasibility solves over the constraint set intersected with shrinking
objective level sets, driven either by a level-set scheme or by bisection on
the optimal value, with cyclic subgradient projections, POCS or ART3+ as the
feasibility engine and optional superiorization perturbations.
"""

from ._kernels import active_backend, available_backends, set_backend
from .feasibility import (
    FeasibilityOutcome,
    SolverSpec,
    art3plus_solve,
    cfp_with_level,
    cspm_solve,
    pocs_solve,
)
from .harness import (
    VARIANTS,
    HarnessConfig,
    RunReport,
    StatsSummary,
    VariantSpec,
    aggregate,
    aggregate_by_variant,
    builtin_problems,
    emit_report,
    quality_score,
    run_variant,
    speedup_factor,
)
from .model import (
    AffineConstraint,
    Bounds,
    ConvexFunction,
    Counters,
    CustomFunction,
    DoseModel,
    PNormFunction,
    Problem,
    QuadraticFunction,
    UnderdoseFunction,
    make_pnorm,
    make_underdose,
    max_violation,
)
from .projections import (
    Relaxation,
    ZeroSubgradientError,
    project_box,
    project_halfspace,
    project_hyperplane,
    relax_step,
    subgradient_project,
)
from .qps import ParseDiagnostic, QpsDocument, QpsParseError, load_qps, parse_qps, write_qps
from .schemes import (
    CASE1,
    CASE2_OR_3,
    ITERATION_CAP,
    AccelerationConfig,
    BisectionConfig,
    EpsilonRule,
    SchemeResult,
    accelerated_level_set_solve,
    bisection_solve,
    classify_termination,
    counterexample_run,
    epsilon_update,
    level_set_solve,
)
from .superiorize import (
    PerturbationTrace,
    SuperiorizationConfig,
    nonascending_direction,
    superiorized_solve,
)

__version__ = "0.1.0"
