"""Residual families: how a parameter vector scores each data point.

A family binds the parameter space R^d to per-point residuals f_m(theta):

``linear_abs``
    ``|y_m - x_m . theta|`` for labelled data (least quantile of squares).
``sq_distance``
    ``||x_m - theta||^2`` for unlabelled data (robust centroid).
``blackbox``
    A user callable ``(theta, DataPoint) -> float``. Only d <= 2 is
    supported, since its subset fits are solved by grid search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DataPoint, Dataset, PreconditionError

LINEAR_ABS = "linear_abs"
SQ_DISTANCE = "sq_distance"
BLACKBOX = "blackbox"

Evaluator = Callable[[np.ndarray, DataPoint], float]


@dataclass(frozen=True)
class ResidualFamily:
    kind: str
    d: int
    convex: bool
    evaluator: Optional[Evaluator] = None
    # grid used by the blackbox subset solver: ((lo, hi), ...) per coordinate
    box: Optional[tuple] = None
    resolution: Optional[int] = None

    def __post_init__(self):
        if self.kind not in (LINEAR_ABS, SQ_DISTANCE, BLACKBOX):
            raise PreconditionError(f"unknown residual family {self.kind!r}")
        if self.d < 1:
            raise PreconditionError("parameter dimension must be at least 1")
        if self.kind == BLACKBOX:
            if self.evaluator is None:
                raise PreconditionError("blackbox family needs an evaluator")
            if self.d > 2:
                raise PreconditionError("blackbox families support d <= 2 only")
            if self.box is None or self.resolution is None:
                raise PreconditionError("blackbox family needs a search box and resolution")

    def check_dataset(self, dataset: Dataset) -> None:
        if self.kind == LINEAR_ABS:
            if not dataset.has_labels:
                raise PreconditionError("linear_abs residuals need labelled data")
            if dataset.p != self.d:
                raise PreconditionError(f"feature length {dataset.p} != d={self.d}")
        elif self.kind == SQ_DISTANCE:
            if dataset.has_labels:
                raise PreconditionError("sq_distance residuals take unlabelled data")
            if dataset.p != self.d:
                raise PreconditionError(f"feature length {dataset.p} != d={self.d}")

    def evaluate(self, theta, point: DataPoint) -> float:
        theta = self._theta(theta)
        if self.kind == LINEAR_ABS:
            if point.label is None:
                raise PreconditionError("linear_abs residual needs a label")
            return abs(point.label - float(np.dot(point.feature, theta)))
        if self.kind == SQ_DISTANCE:
            diff = np.asarray(point.feature, dtype=float) - theta
            return float(np.dot(diff, diff))
        value = float(self.evaluator(theta, point))
        if not np.isfinite(value):
            raise PreconditionError(f"blackbox evaluator returned {value}")
        return value

    def residual_matrix(self, thetas, dataset: Dataset, subset=None) -> np.ndarray:
        """Residuals of several parameter vectors at once.

        Parameters
        ----------
        thetas : ndarray, shape (n, d)
        dataset : Dataset
        subset : sequence of int or ndarray of shape (n, k), optional
            Point indices. A 2-D array gives a different subset per row of
            ``thetas``. Defaults to all points.

        Returns
        -------
        ndarray, shape (n, k)
        """
        thetas = np.asarray(thetas, dtype=float)
        if thetas.ndim != 2 or thetas.shape[1] != self.d:
            raise PreconditionError(f"thetas must have shape (n, {self.d})")
        if subset is None:
            idx = np.arange(dataset.M)
        else:
            idx = _check_indices(subset, dataset.M)
        X = dataset.features[idx]
        if self.kind == LINEAR_ABS:
            y = dataset.labels[idx]
            if idx.ndim == 1:
                return np.abs(y[None, :] - thetas @ X.T)
            return np.abs(y - np.einsum("nkd,nd->nk", X, thetas))
        if self.kind == SQ_DISTANCE:
            if idx.ndim == 1:
                diff = X[None, :, :] - thetas[:, None, :]
            else:
                diff = X - thetas[:, None, :]
            return np.einsum("nkd,nkd->nk", diff, diff)
        rows = idx if idx.ndim == 2 else np.broadcast_to(idx, (thetas.shape[0], idx.size))
        out = np.empty(rows.shape)
        for i, theta in enumerate(thetas):
            for j, m in enumerate(rows[i]):
                out[i, j] = self.evaluate(theta, dataset[int(m)])
        return out

    def _theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.d:
            raise PreconditionError(f"theta has length {theta.size}, expected d={self.d}")
        return theta


def _check_indices(subset, M: int) -> np.ndarray:
    idx = np.asarray(subset, dtype=np.intp)
    if idx.size == 0:
        raise PreconditionError("subset must be non-empty")
    if idx.min() < 0 or idx.max() >= M:
        raise PreconditionError(f"subset index out of range 0..{M - 1}")
    return idx


def linear_abs(d: int) -> ResidualFamily:
    return ResidualFamily(LINEAR_ABS, d, convex=True)


def sq_distance(d: int) -> ResidualFamily:
    return ResidualFamily(SQ_DISTANCE, d, convex=True)


def blackbox(
    evaluator: Evaluator,
    d: int,
    box: Sequence[Sequence[float]],
    resolution: int,
    convex: bool = False,
) -> ResidualFamily:
    """Wrap a user residual function.

    ``evaluator`` must be safe to call concurrently from several threads.
    """
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    return ResidualFamily(BLACKBOX, d, convex, evaluator, box, int(resolution))


def eval_residual(family: ResidualFamily, theta, point: DataPoint) -> float:
    return family.evaluate(theta, point)


def eval_residual_vector(family: ResidualFamily, theta, dataset: Dataset, subset=None) -> np.ndarray:
    """Residuals at ``theta`` for the points in ``subset``, in subset order."""
    theta = family._theta(theta)
    if subset is not None:
        subset = np.asarray(subset, dtype=np.intp).reshape(-1)
    return family.residual_matrix(theta[None, :], dataset, subset)[0]
