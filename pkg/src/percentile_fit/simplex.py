"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``min c.x  s.t.  A x <= b, x >= 0`` for small, dense problems.
Intended for exactness at desk scale, not for speed.
"""

from __future__ import annotations

import numpy as np

from .core import PercentileFitError


class InfeasibleError(PercentileFitError):
    pass


class UnboundedError(PercentileFitError):
    pass


_TOL = 1e-11


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])


def _run(T: np.ndarray, basis: list, ncols: int, max_iter: int) -> None:
    """Iterate on tableau ``T`` (objective in the last row) until optimal.

    Only the first ``ncols`` columns may enter the basis.
    """
    m = T.shape[0] - 1
    for _ in range(max_iter):
        cost = T[-1, :ncols]
        scale = max(1.0, np.abs(cost).max())
        entering = np.flatnonzero(cost < -_TOL * scale)
        if entering.size == 0:
            return
        col = int(entering[0])  # Bland: lowest index
        column = T[:m, col]
        ok = column > _TOL
        if not ok.any():
            raise UnboundedError("linear program is unbounded")
        ratios = np.full(m, np.inf)
        ratios[ok] = T[:m, -1][ok] / column[ok]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + _TOL * max(1.0, abs(best)))
        row = int(min(ties, key=lambda r: basis[r]))  # Bland: lowest basic index
        _pivot(T, row, col)
        basis[row] = col
    raise PercentileFitError("simplex iteration limit reached")


def linprog_ub(c, A, b, max_iter: int = 10_000):
    """Minimize ``c.x`` subject to ``A x <= b`` and ``x >= 0``.

    Returns
    -------
    x : ndarray
        An optimal vertex.
    value : float
        The optimal objective.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape

    # rows with negative rhs are negated; their slack enters with -1 and
    # an artificial variable supplies the initial basis
    sign = np.where(b < 0, -1.0, 1.0)
    art_rows = np.flatnonzero(sign < 0)
    n_art = art_rows.size
    width = n + m + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :n] = A * sign[:, None]
    T[:m, n:n + m] = np.diag(sign)
    T[:m, -1] = b * sign
    basis = [n + i for i in range(m)]
    for k, i in enumerate(art_rows):
        T[i, n + m + k] = 1.0
        basis[i] = n + m + k

    if n_art:
        # phase 1: minimize the sum of artificials
        T[-1, n + m:width] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        _run(T, basis, width, max_iter)
        if T[-1, -1] < -1e-9 * max(1.0, np.abs(b).max()):
            raise InfeasibleError("linear program is infeasible")
        for i, var in enumerate(basis):
            if var >= n + m:
                candidates = np.flatnonzero(np.abs(T[i, :n + m]) > _TOL)
                if candidates.size:
                    _pivot(T, i, int(candidates[0]))
                    basis[i] = int(candidates[0])
        T[:, n + m:width] = 0.0

    T[-1] = 0.0
    T[-1, :n] = c
    for i, var in enumerate(basis):
        if var < n and c[var] != 0.0:
            T[-1] -= c[var] * T[i]
    _run(T, basis, n + m, max_iter)

    x = np.zeros(width)
    for i, var in enumerate(basis):
        x[var] = T[i, -1]
    return x[:n], float(c @ x[:n])
