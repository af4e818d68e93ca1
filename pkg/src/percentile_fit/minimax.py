"""Exact minimax fits on a subset of the data ("subset fits").

Each solver minimizes the worst residual over the points of one subset:

* :func:`chebyshev_fit`      -- linear absolute residuals (Chebyshev / L-inf
  regression). Size d+1 subsets use the closed-form equioscillation solve,
  larger ones a linear program.
* :func:`enclosing_ball_fit` -- squared distances; the minimizer is the
  centre of the minimum enclosing ball.
* :func:`grid_minimax_fit`   -- arbitrary residuals in d <= 2 by grid search.

:func:`fit_batch` evaluates many same-size subsets at once and is what the
enumeration solvers call in their inner loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Dataset, PreconditionError
from .residuals import BLACKBOX, LINEAR_ABS, SQ_DISTANCE, ResidualFamily, _check_indices
from .simplex import linprog_ub

UNIQUE = "unique"
DEGENERATE = "degenerate_skipped"

# relative threshold below which a singular value / null-vector entry is zero
_HAAR_TOL = 1e-12


@dataclass
class SubsetFit:
    subset: tuple
    theta: Optional[np.ndarray]
    value: Optional[float]
    status: str = UNIQUE
    # support / active points of the fit, when the solver knows them
    support: tuple = field(default=(), compare=False)

    @property
    def ok(self) -> bool:
        return self.status == UNIQUE


def _subset_tuple(subset, M: int) -> tuple:
    idx = _check_indices(np.asarray(subset).reshape(-1), M)
    out = tuple(sorted(int(i) for i in idx))
    if len(set(out)) != len(out):
        raise PreconditionError("subset contains repeated indices")
    return out


# ---------------------------------------------------------------------------
# Chebyshev (linear absolute residuals)
# ---------------------------------------------------------------------------


def _chebyshev_square_batch(X: np.ndarray, y: np.ndarray):
    """Closed-form minimax fits for a stack of (d+1)-point subsets.

    X has shape (n, d+1, d) and y shape (n, d+1). Returns ``(theta, ok)``.
    """
    n, k, d = X.shape
    U, s, _ = np.linalg.svd(X, full_matrices=True)
    lam = U[:, :, -1]
    full_rank = s[:, -1] > _HAAR_TOL * s[:, 0]
    haar = full_rank & np.all(np.abs(lam) > _HAAR_TOL, axis=1)
    signs = np.sign(lam)
    A = np.concatenate([X, signs[:, :, None]], axis=2)
    A[~haar] = np.eye(k)
    z = np.linalg.solve(A, y[:, :, None])[:, :, 0]
    return z[:, :d], haar


def chebyshev_fit_lp(dataset: Dataset, subset) -> SubsetFit:
    """Chebyshev fit via ``min t  s.t.  -t <= y_m - x_m.theta <= t``.

    Works for any subset size. Marked degenerate when the subset design
    is rank deficient, since theta is then not unique.
    """
    S = _subset_tuple(subset, dataset.M)
    if not dataset.has_labels:
        raise PreconditionError("Chebyshev fit needs labelled data")
    X = dataset.features[list(S)]
    y = dataset.labels[list(S)]
    d = X.shape[1]
    if len(S) < d + 1:
        raise PreconditionError(f"Chebyshev fit needs at least d+1={d + 1} points")
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= _HAAR_TOL * sv[0]:
        return SubsetFit(S, None, None, DEGENERATE)
    # variables: theta_plus (d), theta_minus (d), t
    ones = np.ones((len(S), 1))
    A = np.block([[-X, X, -ones], [X, -X, -ones]])
    b = np.concatenate([-y, y])
    c = np.zeros(2 * d + 1)
    c[-1] = 1.0
    x, _ = linprog_ub(c, A, b)
    theta = x[:d] - x[d:2 * d]
    r = np.abs(y - X @ theta)
    return SubsetFit(S, theta, float(r.max()))


def chebyshev_fit(dataset: Dataset, subset) -> SubsetFit:
    """Minimize ``max_{m in S} |y_m - x_m . theta|`` over theta.

    For ``|S| = d + 1`` a nonzero ``lam`` with ``X_S^T lam = 0`` fixes the
    sign pattern ``s = sign(lam)`` of the optimal residuals, and
    ``[X_S | s] (theta, t) = y_S`` gives the fit with value ``|t|``. If the
    design is rank deficient or some ``lam_i`` vanishes (Haar condition
    fails) the subset is reported as degenerate. Larger subsets go through
    :func:`chebyshev_fit_lp`.
    """
    S = _subset_tuple(subset, dataset.M)
    if not dataset.has_labels:
        raise PreconditionError("Chebyshev fit needs labelled data")
    d = dataset.p
    if len(S) < d + 1:
        raise PreconditionError(f"Chebyshev fit needs at least d+1={d + 1} points")
    if len(S) > d + 1:
        return chebyshev_fit_lp(dataset, S)
    X = dataset.features[list(S)]
    y = dataset.labels[list(S)]
    theta, ok = _chebyshev_square_batch(X[None], y[None])
    if not ok[0]:
        return SubsetFit(S, None, None, DEGENERATE)
    r = np.abs(y - X @ theta[0])
    return SubsetFit(S, theta[0], float(r.max()), support=S)


# ---------------------------------------------------------------------------
# Minimum enclosing ball (squared distance residuals)
# ---------------------------------------------------------------------------


def circumsphere(points: np.ndarray):
    """Smallest ball with all of ``points`` (k <= dim+1 of them) on its boundary.

    The centre lies in the affine hull of the points. Returns
    ``(center, squared_radius)``.
    """
    p0 = points[0]
    if len(points) == 1:
        return p0.copy(), 0.0
    V = points[1:] - p0
    G = V @ V.T
    rhs = 0.5 * np.diag(G)
    try:
        alpha = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError:
        alpha = np.linalg.lstsq(G, rhs, rcond=None)[0]
    offset = alpha @ V
    return p0 + offset, float(offset @ offset)


def _welzl_mtf(P: np.ndarray, order: list, end: int, support: list, dim: int):
    """Move-to-front Welzl recursion over ``order[:end]`` with fixed ``support``."""
    if support:
        center, r2 = circumsphere(P[support])
    else:
        center, r2 = None, -1.0
    if len(support) == dim + 1:
        return center, r2
    i = 0
    while i < end:
        j = order[i]
        if center is None or not _inside(P[j], center, r2):
            center, r2 = _welzl_mtf(P, order, i, support + [j], dim)
            order.insert(0, order.pop(i))
        i += 1
    return center, r2


def _inside(p: np.ndarray, center: np.ndarray, r2: float) -> bool:
    diff = p - center
    return float(diff @ diff) <= r2 * (1.0 + 1e-12) + 1e-300


def minimum_enclosing_ball(points, seed=0):
    """Centre and squared radius of the smallest ball containing ``points``.

    Randomized incremental move-to-front algorithm; ``seed`` fixes the
    initial random permutation.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[0] == 0:
        raise PreconditionError("need a non-empty (k, dim) array of points")
    order = list(np.random.default_rng(seed).permutation(P.shape[0]))
    center, _ = _welzl_mtf(P, order, len(order), [], P.shape[1])
    diff = P - center
    return center, float(np.max(np.einsum("ij,ij->i", diff, diff)))


def enclosing_ball_fit(dataset: Dataset, subset) -> SubsetFit:
    """Minimize ``max_{m in S} ||x_m - theta||^2``: the minimum enclosing ball.

    The random permutation is seeded from the subset indices, so the
    result is reproducible and independent of call order.
    """
    S = _subset_tuple(subset, dataset.M)
    if dataset.has_labels:
        raise PreconditionError("enclosing ball fit takes unlabelled data")
    P = dataset.features[list(S)]
    center, r2 = minimum_enclosing_ball(P, seed=[len(S), *S])
    return SubsetFit(S, center, r2)


def _ball_batch_small(P: np.ndarray) -> np.ndarray:
    """Closed-form ball centres for stacks of <= 3 points in <= 2 dimensions.

    P has shape (n, k, dim). Two points: the midpoint. Three planar points:
    the midpoint of the longest edge when the triangle is right or obtuse
    (collinear included), otherwise the circumcentre.
    """
    n, k, dim = P.shape
    if k == 1:
        return P[:, 0, :].copy()
    if k == 2:
        return 0.5 * (P[:, 0, :] + P[:, 1, :])
    a, b, c = P[:, 0, :], P[:, 1, :], P[:, 2, :]
    e_bc = np.sum((b - c) ** 2, axis=1)
    e_ca = np.sum((c - a) ** 2, axis=1)
    e_ab = np.sum((a - b) ** 2, axis=1)
    mids = np.stack([0.5 * (b + c), 0.5 * (c + a), 0.5 * (a + b)], axis=1)
    edges = np.stack([e_bc, e_ca, e_ab], axis=1)
    longest = np.argmax(edges, axis=1)
    emax = edges[np.arange(n), longest]
    obtuse = 2.0 * emax >= edges.sum(axis=1)
    center = mids[np.arange(n), longest].copy()

    acute = ~obtuse
    if acute.any():
        u = b[acute] - a[acute]
        v = c[acute] - a[acute]
        uu = np.sum(u * u, axis=1)
        vv = np.sum(v * v, axis=1)
        D = 2.0 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
        cx = (v[:, 1] * uu - u[:, 1] * vv) / D
        cy = (u[:, 0] * vv - v[:, 0] * uu) / D
        center[acute] = a[acute] + np.stack([cx, cy], axis=1)
    return center


# ---------------------------------------------------------------------------
# Grid search (blackbox residuals)
# ---------------------------------------------------------------------------


def grid_points(box, resolution: int) -> np.ndarray:
    """Grid over an axis-aligned box in lexicographic order.

    ``box`` is ``((lo, hi), ...)`` per coordinate. Coordinates repeated
    along a degenerate axis are collapsed, so a point box yields one row.
    """
    if resolution < 2:
        raise PreconditionError("grid resolution must be at least 2")
    axes = []
    for lo, hi in box:
        lo, hi = float(lo), float(hi)
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
            raise PreconditionError(f"invalid box interval ({lo}, {hi})")
        axes.append(np.unique(np.linspace(lo, hi, resolution)))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def grid_minimax_fit(dataset: Dataset, subset, family: ResidualFamily, box=None, resolution=None) -> SubsetFit:
    """Grid point minimizing the worst residual over ``subset``.

    Ties go to the lexicographically smallest grid point. ``box`` and
    ``resolution`` default to the ones stored on a blackbox family.
    """
    if family.d > 2:
        raise PreconditionError("grid search supports d <= 2 only")
    box = family.box if box is None else box
    resolution = family.resolution if resolution is None else resolution
    if box is None or resolution is None:
        raise PreconditionError("grid search needs a box and a resolution")
    if len(box) != family.d:
        raise PreconditionError(f"box has {len(box)} intervals, expected d={family.d}")
    S = _subset_tuple(subset, dataset.M)
    grid = grid_points(box, resolution)
    worst = family.residual_matrix(grid, dataset, list(S)).max(axis=1)
    best = int(np.argmin(worst))
    return SubsetFit(S, grid[best].copy(), float(worst[best]))


# ---------------------------------------------------------------------------
# Dispatch and verification
# ---------------------------------------------------------------------------


def solve_sfit(dataset: Dataset, family: ResidualFamily, subset) -> SubsetFit:
    """Exact subset fit with the solver matching ``family``."""
    if family.kind == LINEAR_ABS:
        return chebyshev_fit(dataset, subset)
    if family.kind == SQ_DISTANCE:
        return enclosing_ball_fit(dataset, subset)
    return grid_minimax_fit(dataset, subset, family)


def fit_batch(dataset: Dataset, family: ResidualFamily, subsets: np.ndarray):
    """Fit every row of ``subsets`` (shape (n, k), each row sorted).

    Returns
    -------
    thetas : ndarray, shape (n, d)
        NaN rows where the fit was degenerate.
    values : ndarray, shape (n,)
        Worst residual over the subset at the fitted theta (inf if degenerate).
    ok : ndarray of bool, shape (n,)
    """
    subsets = np.asarray(subsets, dtype=np.intp)
    n, k = subsets.shape
    d = family.d
    thetas = np.full((n, d), np.nan)
    ok = np.ones(n, dtype=bool)
    if family.kind == LINEAR_ABS and k == d + 1:
        th, ok = _chebyshev_square_batch(dataset.features[subsets], dataset.labels[subsets])
        thetas[ok] = th[ok]
    elif family.kind == SQ_DISTANCE and (k <= 2 or (k == 3 and d == 2)):
        thetas = _ball_batch_small(dataset.features[subsets])
    else:
        for i, row in enumerate(subsets):
            fit = solve_sfit(dataset, family, row)
            if fit.ok:
                thetas[i] = fit.theta
            else:
                ok[i] = False
    values = np.full(n, np.inf)
    if ok.any():
        values[ok] = family.residual_matrix(thetas[ok], dataset, subsets[ok]).max(axis=1)
    return thetas, values, ok


def verify_sfit(fit: SubsetFit, dataset: Dataset, family: ResidualFamily,
                rel_tol: float = 1e-9, active_tol: float = 1e-8) -> bool:
    """Check a subset fit against its residuals.

    The stored value must equal the recomputed worst residual. For linear
    absolute residuals on d+1 points, all d+1 residuals must also attain
    the value (the equioscillation certificate of optimality).
    """
    if not fit.ok or fit.theta is None:
        return False
    r = family.residual_matrix(np.asarray(fit.theta)[None, :], dataset, list(fit.subset))[0]
    worst = float(r.max())
    if abs(worst - fit.value) > rel_tol * abs(worst) + 1e-15:
        return False
    if family.kind == LINEAR_ABS and len(fit.subset) == family.d + 1:
        active = np.count_nonzero(np.abs(r - fit.value) <= active_tol * max(1.0, abs(fit.value)))
        return active >= family.d + 1
    return True


__all__ = [
    "SubsetFit",
    "UNIQUE",
    "DEGENERATE",
    "chebyshev_fit",
    "chebyshev_fit_lp",
    "enclosing_ball_fit",
    "minimum_enclosing_ball",
    "circumsphere",
    "grid_minimax_fit",
    "grid_points",
    "solve_sfit",
    "fit_batch",
    "verify_sfit",
    "BLACKBOX",
]
