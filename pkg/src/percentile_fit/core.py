"""Domain types and the loss aggregators shared by every solver.

Three losses act on a vector of residuals ``z``:

* ``quad_loss``       -- sum of squares (the non-robust least-squares loss),
* ``max_loss``        -- the largest entry (worst-case loss of a subset fit),
* ``percentile_loss`` -- the largest entry left after discarding the ``O``
  largest ones, i.e. the ``(O+1)``-th largest entry.

Point indices are 0-based inside the library. The CLI converts to the
1-based convention on output.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np


class PercentileFitError(ValueError):
    """Base class for all errors raised by this package."""


class PreconditionError(PercentileFitError):
    """An operation was called outside its domain of validity."""


class BudgetExceededError(PercentileFitError):
    """The number of subsets to enumerate exceeds the configured cap."""


class DegenerateProblemError(PercentileFitError):
    """Every candidate subset fit was degenerate and had to be skipped."""


@dataclass(frozen=True)
class DataPoint:
    feature: np.ndarray
    label: Optional[float] = None


class Dataset:
    """An ordered, immutable collection of data points.

    Parameters
    ----------
    features : array_like, shape (M, p)
        One row per data point.
    labels : array_like, shape (M,), optional
        Regression targets. ``None`` for unlabelled data (e.g. centroids).
    """

    def __init__(self, features, labels=None):
        X = np.array(features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise PreconditionError("features must be a non-empty (M, p) array")
        if not np.all(np.isfinite(X)):
            raise PreconditionError("features must be finite")
        y = None
        if labels is not None:
            y = np.array(labels, dtype=float).reshape(-1)
            if y.shape[0] != X.shape[0]:
                raise PreconditionError(
                    f"got {y.shape[0]} labels for {X.shape[0]} feature rows"
                )
            if not np.all(np.isfinite(y)):
                raise PreconditionError("labels must be finite")
            y.setflags(write=False)
        X.setflags(write=False)
        self._X = X
        self._y = y

    @classmethod
    def from_points(cls, points: Sequence[DataPoint]) -> "Dataset":
        if not points:
            raise PreconditionError("dataset needs at least one point")
        labelled = [p.label is not None for p in points]
        if any(labelled) and not all(labelled):
            raise PreconditionError("either all points carry a label or none does")
        X = [np.atleast_1d(np.asarray(p.feature, dtype=float)) for p in points]
        if len({x.shape for x in X}) != 1:
            raise PreconditionError("all feature vectors must share one length")
        y = [p.label for p in points] if all(labelled) else None
        return cls(np.stack(X), y)

    @property
    def features(self) -> np.ndarray:
        return self._X

    @property
    def labels(self) -> Optional[np.ndarray]:
        return self._y

    @property
    def M(self) -> int:
        return self._X.shape[0]

    @property
    def p(self) -> int:
        return self._X.shape[1]

    @property
    def has_labels(self) -> bool:
        return self._y is not None

    def __len__(self) -> int:
        return self.M

    def __getitem__(self, m: int) -> DataPoint:
        label = None if self._y is None else float(self._y[m])
        return DataPoint(self._X[m], label)

    def __iter__(self) -> Iterator[DataPoint]:
        return (self[m] for m in range(self.M))

    @property
    def points(self) -> list[DataPoint]:
        return list(self)

    def __repr__(self) -> str:
        kind = "labelled" if self.has_labels else "unlabelled"
        return f"Dataset(M={self.M}, p={self.p}, {kind})"


@dataclass(frozen=True)
class PercentileProblem:
    """Minimize the ``(O+1)``-th largest residual over the model parameter.

    ``family`` is a :class:`percentile_fit.residuals.ResidualFamily`.
    """

    dataset: Dataset
    family: "ResidualFamily"  # noqa: F821
    outliers: int

    def __post_init__(self):
        if not 0 <= self.outliers < self.dataset.M:
            raise PreconditionError(
                f"outlier count O={self.outliers} must satisfy 0 <= O < M={self.dataset.M}"
            )
        self.family.check_dataset(self.dataset)

    @property
    def M(self) -> int:
        return self.dataset.M

    @property
    def d(self) -> int:
        return self.family.d

    @property
    def inliers(self) -> int:
        return self.dataset.M - self.outliers


def _as_residuals(z) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(-1)
    if not np.all(np.isfinite(z)):
        raise PreconditionError("residual vector must be finite")
    return z


def quad_loss(z) -> float:
    z = _as_residuals(z)
    return float(np.dot(z, z))


def max_loss(z) -> float:
    z = _as_residuals(z)
    if z.size == 0:
        raise PreconditionError("max_loss of an empty vector")
    return float(z.max())


def _check_order(n: int, O: int) -> None:
    if not 0 <= O < n:
        raise PreconditionError(f"outlier count O={O} must satisfy 0 <= O < {n}")


def percentile_loss(z, O: int) -> float:
    """Return the ``(O+1)``-th largest entry of ``z``.

    Uses a partial selection (``np.partition``), so the cost is linear in
    ``len(z)``. The result does not depend on how ties are ordered.
    """
    z = _as_residuals(z)
    _check_order(z.size, O)
    k = z.size - O - 1
    return float(np.partition(z, k)[k])


def percentile_loss_rows(Z: np.ndarray, O: int) -> np.ndarray:
    """Row-wise :func:`percentile_loss` of a 2-D array."""
    n = Z.shape[1]
    _check_order(n, O)
    k = n - O - 1
    return np.partition(Z, k, axis=1)[:, k]


def percentile_loss_by_subsets(z, O: int) -> float:
    """Percentile loss as the smallest worst-case loss over subsets.

    Enumerates every subset of size ``len(z) - O`` and returns the minimum
    of their maxima. Exponential; intended as a test oracle.
    """
    z = _as_residuals(z)
    _check_order(z.size, O)
    values = z.tolist()
    return float(min(max(c) for c in itertools.combinations(values, z.size - O)))
