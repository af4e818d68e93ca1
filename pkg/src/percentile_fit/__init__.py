"""Outlier-robust model fitting with percentile (least-quantile) losses."""

from .baselines import BaselineEstimate, huber_fit, l1_fit, least_squares_fit
from .core import (
    BudgetExceededError,
    DataPoint,
    Dataset,
    DegenerateProblemError,
    PercentileFitError,
    PercentileProblem,
    PreconditionError,
    max_loss,
    percentile_loss,
    percentile_loss_by_subsets,
    quad_loss,
)
from .minimax import (
    SubsetFit,
    chebyshev_fit,
    enclosing_ball_fit,
    grid_minimax_fit,
    verify_sfit,
)
from .residuals import (
    ResidualFamily,
    blackbox,
    eval_residual,
    eval_residual_vector,
    linear_abs,
    sq_distance,
)
from .solvers import (
    FitReport,
    grid_oracle,
    solve_randomized,
    solve_theorem1,
    solve_theorem2,
)

__version__ = "0.1.0"
