"""Optimal transport via extragradient methods on the box-simplex saddle form.

The penalised transport objective is solved as a bilinear game between a
simplex of edge masses and a box of vertex potentials; the near-feasible
answer is then rounded onto the transportation polytope with a certified l1
bound.  A log-domain Sinkhorn baseline and an exact small-instance oracle are
included for benchmarking and verification.
"""

from .baselines import (
    ORACLE_MAX_N,
    SINKHORN_PRESETS,
    OracleResult,
    SinkhornConfig,
    exact_oracle,
    sinkhorn,
    solve_sinkhorn,
)
from .instances import (
    cost_euclidean,
    cost_manhattan,
    gen_random_instance,
    image_to_distribution,
    load_matrix_csv,
    load_vector_csv,
    parse_pgm,
    save_matrix_csv,
    save_vector_csv,
)
from .problem import (
    MatvecCounter,
    PrimalDualPoint,
    Problem,
    TransportPlan,
    apply_adjoint,
    apply_incidence,
    build_problem,
    dual_value,
    duality_gap,
    primal_value,
    transport_objective,
)
from .prox import (
    AltMinConfig,
    DualState,
    approx_prox,
    inner_iteration_budget,
    x_step,
    y_step,
)
from .regularizer import (
    GradientPair,
    RegularizerConfig,
    area_convexity_quadratic_form,
    area_convexity_residual,
    gradient_operator,
    prox_objective,
    regularizer_gradient,
    regularizer_range_bound,
    regularizer_value,
)
from .rounding import RoundingReport, round_to_feasible
from .serialize import emit_plan, emit_solution, emit_trace, load_plan_csv
from .solver import (
    DUAL_EXTRAPOLATION,
    MIRROR_PROX,
    ConvergenceTrace,
    IterationLimitError,
    NumericalError,
    Solution,
    SolverConfig,
    TraceRow,
    averaged_iterate,
    preset,
    solve,
    solve_dual_extrapolation,
    solve_mirror_prox,
    termination_check,
)

__version__ = "0.1.0"

__all__ = [
    "AltMinConfig",
    "ConvergenceTrace",
    "DUAL_EXTRAPOLATION",
    "DualState",
    "GradientPair",
    "IterationLimitError",
    "MIRROR_PROX",
    "MatvecCounter",
    "NumericalError",
    "ORACLE_MAX_N",
    "OracleResult",
    "PrimalDualPoint",
    "Problem",
    "RegularizerConfig",
    "RoundingReport",
    "SINKHORN_PRESETS",
    "SinkhornConfig",
    "Solution",
    "SolverConfig",
    "TraceRow",
    "TransportPlan",
    "apply_adjoint",
    "apply_incidence",
    "approx_prox",
    "area_convexity_quadratic_form",
    "area_convexity_residual",
    "averaged_iterate",
    "build_problem",
    "cost_euclidean",
    "cost_manhattan",
    "dual_value",
    "duality_gap",
    "emit_plan",
    "emit_solution",
    "emit_trace",
    "exact_oracle",
    "gen_random_instance",
    "gradient_operator",
    "image_to_distribution",
    "inner_iteration_budget",
    "load_matrix_csv",
    "load_plan_csv",
    "load_vector_csv",
    "parse_pgm",
    "preset",
    "primal_value",
    "prox_objective",
    "regularizer_gradient",
    "regularizer_range_bound",
    "regularizer_value",
    "round_to_feasible",
    "save_matrix_csv",
    "save_vector_csv",
    "sinkhorn",
    "solve",
    "solve_dual_extrapolation",
    "solve_mirror_prox",
    "solve_sinkhorn",
    "termination_check",
    "transport_objective",
    "x_step",
    "y_step",
]
