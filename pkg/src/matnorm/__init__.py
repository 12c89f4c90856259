"""Kronecker-structured covariance and sparse precision estimation for
matrix-variate normal data: reproducible samplers, a graphical-lasso
flip-flop fitter, closed-form heuristic estimators, proof-level
diagnostics, and a Monte-Carlo harness for convergence-rate experiments.
"""

from . import errors
from .errors import (
    ConfigError,
    DegenerateData,
    DimensionCap,
    DomainError,
    IllPosed,
    InfeasibleDesign,
    InsufficientData,
    MatnormError,
    NoConvergence,
    NotPositiveDefinite,
    ShapeMismatch,
)
from .glasso import (
    GlassoProblem,
    GlassoSolution,
    glasso_objective,
    glasso_solve,
    kkt_residual,
    soft_threshold,
)
from .heuristic import (
    HeuristicEstimates,
    OracleDiagnostics,
    heuristic_inverses,
    heuristic_psi,
    heuristic_sigma,
    oracle_diagnostics,
)
from .linalg import (
    SpdMatrix,
    SymMatrix,
    cholesky,
    frobenius_norm,
    kron,
    log_det,
    max_abs_entry_diff,
    spectral_norm,
    sym_eigen,
)
from .rates import (
    AssumptionPoint,
    AssumptionReport,
    ModelSpec,
    RateCell,
    RateReport,
    SlopeFit,
    check_assumptions,
    fit_rate_slope,
    rate_predictors,
    run_cell,
)
from .rng import derive_seed, standard_normal_stream
from .sampling import (
    Banded,
    Dataset,
    RandomSupport,
    TrueModel,
    make_true_model,
    read_dataset,
    sample_matrix_normal,
    write_dataset,
)
from .smgm import (
    DecompositionTerms,
    FitResult,
    PenaltyConfig,
    decompose_objective_difference,
    half_step_col,
    half_step_row,
    lambda_schedule,
    likelihood_part,
    objective,
    smgm_fit,
)

__version__ = "0.1.0"
