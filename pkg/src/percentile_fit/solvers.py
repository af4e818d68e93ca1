"""Exact and randomized solvers for the percentile (least-quantile) problem.

Given residuals f_m(theta) and an outlier budget O, the problem is::

    minimize over theta:  (O+1)-th largest of f_1(theta), ..., f_M(theta)

``solve_theorem1``
    Fit every subset of M-O points by minimax and keep the best subset.
    Exact for any residual family.
``solve_theorem2``
    For convex residuals with d+1 < M-O, fit every subset of d+1 points,
    score each fitted theta on the full percentile objective, keep the best.
``solve_randomized``
    The same pipelines over a uniform random sample of subsets.
``grid_oracle``
    Brute-force evaluation of the objective on a grid (d <= 2), used as an
    independent check of the exact solvers.

Subsets are enumerated in lexicographic order and streamed in fixed-size
chunks. Results are reduced by (score, subset), so the thread count never
changes the answer.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .core import (
    BudgetExceededError,
    DegenerateProblemError,
    PercentileProblem,
    PreconditionError,
    percentile_loss_rows,
)
from .minimax import DEGENERATE, UNIQUE, SubsetFit, fit_batch, grid_points
from .residuals import LINEAR_ABS, SQ_DISTANCE

DEFAULT_BUDGET = 10**7
CHUNK_SIZE = 2048

THEOREM1 = "theorem1"
THEOREM2 = "theorem2"
RANDOMIZED = "randomized"
GRID_ORACLE = "grid_oracle"


@dataclass(eq=False)
class FitReport:
    theta: np.ndarray
    objective: float
    winning_subset: tuple
    subsets_total: int
    subsets_solved: int
    subsets_skipped: int
    solver: str
    inlier_indices: tuple
    elapsed: float = 0.0
    # per-subset fits, only when the solver was asked to record them
    fits: Optional[list] = field(default=None, repr=False)

    def to_dict(self, one_based: bool = False, include_elapsed: bool = True) -> dict:
        shift = 1 if one_based else 0
        out = {
            "theta": [float(v) for v in self.theta],
            "objective": float(self.objective),
            "winning_subset": [int(i) + shift for i in self.winning_subset],
            "inlier_indices": [int(i) + shift for i in self.inlier_indices],
            "solver": self.solver,
            "subsets_total": int(self.subsets_total),
            "subsets_solved": int(self.subsets_solved),
            "subsets_skipped": int(self.subsets_skipped),
        }
        if include_elapsed:
            out["elapsed_s"] = float(self.elapsed)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, FitReport):
            return NotImplemented
        return self.to_dict(include_elapsed=False) == other.to_dict(include_elapsed=False)


def recovered_inliers(residuals: np.ndarray, inliers: int) -> tuple:
    """Indices of the ``inliers`` smallest residuals, ties to the lower index."""
    order = np.argsort(residuals, kind="stable")
    return tuple(sorted(int(i) for i in order[:inliers]))


# ---------------------------------------------------------------------------
# Subset streams
# ---------------------------------------------------------------------------


def _chunked(subsets: Iterable[tuple], k: int, size: int = CHUNK_SIZE) -> Iterator[np.ndarray]:
    it = iter(subsets)
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield np.array(block, dtype=np.intp).reshape(len(block), k)


def unrank_combination(rank: int, n: int, k: int) -> tuple:
    """The ``rank``-th k-subset of ``range(n)`` in lexicographic order."""
    out = []
    start = 0
    for remaining in range(k, 0, -1):
        for v in range(start, n):
            count = math.comb(n - v - 1, remaining - 1)
            if rank < count:
                out.append(v)
                start = v + 1
                break
            rank -= count
    return tuple(out)


def _check_budget(total: int, budget: Optional[int]) -> None:
    budget = DEFAULT_BUDGET if budget is None else budget
    if total > budget:
        raise BudgetExceededError(
            f"{total} subsets to enumerate exceeds the budget of {budget}"
        )


# ---------------------------------------------------------------------------
# Enumeration engine
# ---------------------------------------------------------------------------


@dataclass
class _ChunkResult:
    score: float
    subset: Optional[np.ndarray]
    theta: Optional[np.ndarray]
    solved: int
    skipped: int
    fits: Optional[list]


def _eval_chunk(problem: PercentileProblem, chunk: np.ndarray, score_on_full: bool, record: bool) -> _ChunkResult:
    thetas, values, ok = fit_batch(problem.dataset, problem.family, chunk)
    if score_on_full:
        scores = np.full(len(chunk), np.inf)
        if ok.any():
            R = problem.family.residual_matrix(thetas[ok], problem.dataset)
            scores[ok] = percentile_loss_rows(R, problem.outliers)
    else:
        scores = values
    fits = None
    if record:
        fits = [
            SubsetFit(tuple(int(i) for i in row), thetas[j].copy(), float(values[j]), UNIQUE)
            if ok[j] else SubsetFit(tuple(int(i) for i in row), None, None, DEGENERATE)
            for j, row in enumerate(chunk)
        ]
    solved = int(ok.sum())
    if solved == 0:
        return _ChunkResult(np.inf, None, None, 0, len(chunk), fits)
    best = int(np.argmin(np.where(ok, scores, np.inf)))
    return _ChunkResult(float(scores[best]), chunk[best], thetas[best], solved, len(chunk) - solved, fits)


def _scan(problem, chunks: Iterator[np.ndarray], score_on_full: bool, threads: int, record: bool):
    best = None
    solved = skipped = 0
    fits = [] if record else None

    def consume(res: _ChunkResult):
        nonlocal best, solved, skipped
        solved += res.solved
        skipped += res.skipped
        if record:
            fits.extend(res.fits)
        # chunks arrive in lexicographic order: strict < keeps the first subset on ties
        if res.subset is not None and (best is None or res.score < best.score):
            best = res

    work = lambda c: _eval_chunk(problem, c, score_on_full, record)  # noqa: E731
    if threads <= 1:
        for chunk in chunks:
            consume(work(chunk))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            while True:
                window = list(itertools.islice(chunks, 4 * threads))
                if not window:
                    break
                for res in pool.map(work, window):
                    consume(res)
    return best, solved, skipped, fits


def _report(problem, best, solved, skipped, total, solver, fits, started, objective=None) -> FitReport:
    if best is None:
        raise DegenerateProblemError(f"all {total} subset fits were degenerate")
    theta = np.array(best.theta, dtype=float)
    residuals = problem.family.residual_matrix(theta[None, :], problem.dataset)[0]
    return FitReport(
        theta=theta,
        objective=best.score if objective is None else objective,
        winning_subset=tuple(int(i) for i in best.subset),
        subsets_total=total,
        subsets_solved=solved,
        subsets_skipped=skipped,
        solver=solver,
        inlier_indices=recovered_inliers(residuals, problem.inliers),
        elapsed=time.perf_counter() - started,
        fits=fits,
    )


def _check_theorem1(problem: PercentileProblem) -> int:
    k = problem.inliers
    if problem.family.kind == LINEAR_ABS and k < problem.d + 1:
        raise PreconditionError(
            f"linear subset fits need M-O >= d+1 (M-O={k}, d+1={problem.d + 1})"
        )
    return k


def _check_theorem2(problem: PercentileProblem) -> int:
    fam = problem.family
    if not fam.convex:
        raise PreconditionError("theorem2 requires convex residuals")
    if fam.kind not in (LINEAR_ABS, SQ_DISTANCE):
        raise PreconditionError(
            "theorem2 requires a family with unique subset fits (linear_abs or sq_distance)"
        )
    k = problem.d + 1
    if not k < problem.inliers:
        raise PreconditionError(
            f"theorem2 requires d+1 < M-O (d+1={k}, M-O={problem.inliers}); use theorem1"
        )
    return k


def solve_theorem1(problem: PercentileProblem, budget: Optional[int] = None, threads: int = 1,
                   record: bool = False) -> FitReport:
    """Best minimax fit over all subsets of M-O points.

    The objective equals the smallest subset fit value, and the returned
    theta is the fit of the first (lexicographically) subset attaining it.
    With ``record=True`` every subset fit is kept on ``report.fits``.
    """
    started = time.perf_counter()
    k = _check_theorem1(problem)
    total = math.comb(problem.M, k)
    _check_budget(total, budget)
    chunks = _chunked(itertools.combinations(range(problem.M), k), k)
    best, solved, skipped, fits = _scan(problem, chunks, False, threads, record)
    return _report(problem, best, solved, skipped, total, THEOREM1, fits, started)


def solve_theorem2(problem: PercentileProblem, budget: Optional[int] = None, threads: int = 1,
                   record: bool = False) -> FitReport:
    """Best percentile objective among minimax fits of all (d+1)-subsets.

    Requires convex residuals and d+1 < M-O. Degenerate subsets (Haar
    condition violated) are skipped and counted.
    """
    started = time.perf_counter()
    k = _check_theorem2(problem)
    total = math.comb(problem.M, k)
    _check_budget(total, budget)
    chunks = _chunked(itertools.combinations(range(problem.M), k), k)
    best, solved, skipped, fits = _scan(problem, chunks, True, threads, record)
    return _report(problem, best, solved, skipped, total, THEOREM2, fits, started)


def solve_randomized(problem: PercentileProblem, num_samples: int, seed: int,
                     subset_size: str = THEOREM2, budget: Optional[int] = None,
                     threads: int = 1) -> FitReport:
    """Run the theorem1 or theorem2 pipeline on random distinct subsets.

    ``num_samples`` subsets are drawn uniformly without replacement (all of
    them if there are no more than that). Every fitted theta is scored on
    the full percentile objective, so the result can only be worse than or
    equal to the exact solver's.
    """
    started = time.perf_counter()
    if num_samples < 1:
        raise PreconditionError("num_samples must be at least 1")
    if subset_size == THEOREM2:
        k = _check_theorem2(problem)
    elif subset_size == THEOREM1:
        k = _check_theorem1(problem)
    else:
        raise PreconditionError(f"subset_size must be {THEOREM1!r} or {THEOREM2!r}")
    total = math.comb(problem.M, k)
    n = min(num_samples, total)
    _check_budget(n, budget)
    if n == total:
        subsets = itertools.combinations(range(problem.M), k)
    else:
        rng = np.random.default_rng(seed)
        if total <= np.iinfo(np.int64).max:
            ranks = np.sort(rng.choice(total, size=n, replace=False))
            subsets = (unrank_combination(int(r), problem.M, k) for r in ranks)
        else:
            drawn = set()
            while len(drawn) < n:
                drawn.add(tuple(sorted(int(i) for i in rng.choice(problem.M, k, replace=False))))
            subsets = iter(sorted(drawn))
    best, solved, skipped, _ = _scan(problem, _chunked(subsets, k), True, threads, False)
    return _report(problem, best, solved, skipped, n, RANDOMIZED, None, started)


# ---------------------------------------------------------------------------
# Grid oracle
# ---------------------------------------------------------------------------


def _normalize_box(box, d: int) -> tuple:
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != d:
        raise PreconditionError(f"box has {len(box)} intervals, expected d={d}")
    return box


def grid_oracle(problem: PercentileProblem, box, resolution: int, threads: int = 1) -> FitReport:
    """Evaluate the percentile objective at every grid point; keep the best.

    Ties go to the lexicographically smallest grid point. The winning
    "subset" reported is the recovered inlier set at that point.
    """
    started = time.perf_counter()
    if problem.d > 2:
        raise PreconditionError("grid oracle supports d <= 2 only")
    box = _normalize_box(box, problem.d)
    grid = grid_points(box, resolution)

    def score(block):
        R = problem.family.residual_matrix(block, problem.dataset)
        return percentile_loss_rows(R, problem.outliers)

    blocks = [grid[i:i + 65536] for i in range(0, len(grid), 65536)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = np.concatenate(list(pool.map(score, blocks)))
    else:
        scores = np.concatenate([score(b) for b in blocks])
    i = int(np.argmin(scores))
    theta = grid[i].copy()
    residuals = problem.family.residual_matrix(theta[None, :], problem.dataset)[0]
    inliers = recovered_inliers(residuals, problem.inliers)
    return FitReport(
        theta=theta,
        objective=float(scores[i]),
        winning_subset=inliers,
        subsets_total=len(grid),
        subsets_solved=len(grid),
        subsets_skipped=0,
        solver=GRID_ORACLE,
        inlier_indices=inliers,
        elapsed=time.perf_counter() - started,
    )


def lipschitz_bound(problem: PercentileProblem, box) -> float:
    """Lipschitz constant of the percentile objective over ``box``.

    The (O+1)-th largest of Lipschitz functions is Lipschitz with the
    largest of their constants.
    """
    box = _normalize_box(box, problem.d)
    X = problem.dataset.features
    if problem.family.kind == LINEAR_ABS:
        return float(np.max(np.linalg.norm(X, axis=1)))
    if problem.family.kind == SQ_DISTANCE:
        corners = np.array(list(itertools.product(*box)))
        far = np.max(np.linalg.norm(X[:, None, :] - corners[None, :, :], axis=2))
        return float(2.0 * far)
    raise PreconditionError("no Lipschitz bound is known for blackbox residuals")


def oracle_tolerance(problem: PercentileProblem, box, resolution: int) -> float:
    """How far the grid optimum may sit above the true optimum inside ``box``.

    Every point of the box is within half a cell diagonal of a grid point.
    """
    box = _normalize_box(box, problem.d)
    spacing = np.array([(hi - lo) / (resolution - 1) for lo, hi in box])
    return lipschitz_bound(problem, box) * 0.5 * float(np.linalg.norm(spacing))


__all__ = [
    "FitReport",
    "solve_theorem1",
    "solve_theorem2",
    "solve_randomized",
    "grid_oracle",
    "lipschitz_bound",
    "oracle_tolerance",
    "recovered_inliers",
    "unrank_combination",
    "DEFAULT_BUDGET",
]
