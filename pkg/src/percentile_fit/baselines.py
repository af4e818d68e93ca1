"""Non-robust and classical robust estimators used as comparison points.

* least squares -- minimizes the sum of squared residuals,
* L1            -- coordinate-wise median for centroids,
* Huber         -- Huber loss on Euclidean distances, solved by IRLS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PercentileProblem, PreconditionError
from .residuals import LINEAR_ABS, SQ_DISTANCE

LEAST_SQUARES = "least_squares"
L1 = "l1"
HUBER = "huber"

HUBER_THRESHOLD = 1.34


@dataclass
class BaselineEstimate:
    method: str
    theta: np.ndarray
    iterations: int = 0
    converged: bool = True


def _require_centroid(problem: PercentileProblem, name: str) -> np.ndarray:
    if problem.family.kind != SQ_DISTANCE:
        raise PreconditionError(f"{name} is implemented for the centroid (sq_distance) family only")
    return problem.dataset.features


def least_squares_fit(problem: PercentileProblem) -> BaselineEstimate:
    """Minimize the sum of squared residuals over all points.

    Centroids: the arithmetic mean. Linear residuals: the least-squares
    solution, which must be unique.
    """
    fam = problem.family
    X = problem.dataset.features
    if fam.kind == SQ_DISTANCE:
        return BaselineEstimate(LEAST_SQUARES, X.mean(axis=0))
    if fam.kind == LINEAR_ABS:
        theta, _, rank, _ = np.linalg.lstsq(X, problem.dataset.labels, rcond=None)
        if rank < fam.d:
            raise PreconditionError("singular normal equations: design matrix is rank deficient")
        return BaselineEstimate(LEAST_SQUARES, theta)
    raise PreconditionError("least squares is not defined for blackbox residuals")


def l1_fit(problem: PercentileProblem) -> BaselineEstimate:
    """Minimize ``sum_m ||x_m - theta||_1``: the coordinate-wise median."""
    X = _require_centroid(problem, "the L1 fit")
    return BaselineEstimate(L1, np.median(X, axis=0))


def huber_loss(t, R: float = HUBER_THRESHOLD):
    """``t^2/2`` for ``|t| <= R`` and ``R|t| - R^2/2`` beyond."""
    t = np.abs(np.asarray(t, dtype=float))
    return np.where(t <= R, 0.5 * t * t, R * t - 0.5 * R * R)


def huber_objective(theta, points: np.ndarray, R: float = HUBER_THRESHOLD) -> float:
    dist = np.linalg.norm(points - np.asarray(theta, dtype=float), axis=1)
    return float(huber_loss(dist, R).sum())


def huber_fit(problem: PercentileProblem, R: float = HUBER_THRESHOLD, tol: float = 1e-10,
              max_iter: int = 500, trace: list | None = None) -> BaselineEstimate:
    """Minimize ``sum_m h_R(||x_m - theta||_2)`` by iteratively reweighted least squares.

    Each step is a weighted mean with weights ``min(1, R / ||x_m - theta||)``.
    Starts from the mean and stops once the step is shorter than ``tol``;
    hitting ``max_iter`` is reported through ``converged=False``.
    If ``trace`` is a list, the objective after every iterate is appended.
    """
    if R <= 0:
        raise PreconditionError("Huber threshold R must be positive")
    X = _require_centroid(problem, "the Huber fit")
    theta = X.mean(axis=0)
    if trace is not None:
        trace.append(huber_objective(theta, X, R))
    for it in range(1, max_iter + 1):
        dist = np.linalg.norm(X - theta, axis=1)
        w = np.ones_like(dist)
        far = dist > 1e-12
        w[far] = np.minimum(1.0, R / dist[far])
        new = (w[:, None] * X).sum(axis=0) / w.sum()
        step = float(np.linalg.norm(new - theta))
        theta = new
        if trace is not None:
            trace.append(huber_objective(theta, X, R))
        if step < tol:
            return BaselineEstimate(HUBER, theta, it, True)
    return BaselineEstimate(HUBER, theta, max_iter, False)
