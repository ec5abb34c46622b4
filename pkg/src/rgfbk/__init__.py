"""Random greedy fast block Kaczmarz (RGFBK) solvers for nonlinear systems F(x) = 0."""

from .analysis import (
    RateBoundInputs,
    SgcnEstimate,
    empirical_rate,
    estimate_sgcn,
    optimal_gamma,
    rate_bound,
    reference_solution,
    submatrix_condition,
)
from .problems import (
    BroydenTridiagonal,
    Chandrasekhar,
    LinearSystem,
    NonlinearSystem,
    build_problem,
    evaluate,
    fd_jacobian,
    jacobian_block,
    make_linear,
    random_linear,
)
from .selection import (
    capped_set,
    greedy_top_beta,
    max_distance_from_sample,
    max_residual_from_sample,
    sample_control,
)
from .solvers import (
    IterationRecord,
    SolveReport,
    SolverConfig,
    block_pinv_step,
    gaussian_weight,
    nk_step,
    residual_weight,
    rgfbk_step,
    solve,
    stopping_threshold,
)

__version__ = "0.1.0"
