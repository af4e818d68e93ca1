"""Monte-Carlo comparison of the percentile centroid against the baselines.

Each trial draws ``inlier_count`` points from N(0, I) and O outliers from
``bias + outlier_scale * N(0, I)``, with O chosen so the outlier fraction
matches the requested ratio. Every method estimates the centroid and is
scored by the Euclidean norm of its estimate (the true inlier mean is 0).

Random streams are keyed by ``(seed, ratio, trial)``, so the data a trial
sees does not depend on the method list, the ratio grid, or the order in
which trials run.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence

import numpy as np

from .baselines import HUBER_THRESHOLD, huber_fit, l1_fit, least_squares_fit
from .core import Dataset, PercentileFitError, PercentileProblem
from .residuals import sq_distance
from .solvers import solve_theorem2

log = logging.getLogger(__name__)

PERCENTILE = "percentile_theorem2"
METHODS = (PERCENTILE, "least_squares", "l1", "huber")
DEFAULT_RATIOS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40)

RESULTS_HEADER = ("ratio", "trial", "method", "error", "elapsed_s")
SUMMARY_HEADER = ("ratio", "method", "mean_error", "std_error", "trials")
FAILURES_HEADER = ("ratio", "trial", "method", "message")


@dataclass
class ExperimentConfig:
    inlier_count: int = 40
    outlier_ratio_grid: tuple = DEFAULT_RATIOS
    bias: tuple = (4.0, 3.0)
    outlier_scale: float = 1.2
    trials: int = 100
    seed: int = 0
    methods: tuple = METHODS
    huber_threshold: float = HUBER_THRESHOLD
    budget: Optional[int] = None
    # wall-clock times are not reproducible; off by default so reruns are byte-identical
    record_timing: bool = False

    def __post_init__(self):
        self.outlier_ratio_grid = tuple(float(r) for r in self.outlier_ratio_grid)
        self.bias = tuple(float(b) for b in self.bias)
        self.methods = tuple(self.methods)
        if self.inlier_count < 1:
            raise PercentileFitError("inlier_count must be positive")
        if self.trials < 1:
            raise PercentileFitError("trials must be positive")
        if not self.bias:
            raise PercentileFitError("bias must be a non-empty vector")
        for r in self.outlier_ratio_grid:
            if not 0.0 <= r < 1.0:
                raise PercentileFitError(f"outlier ratio {r} outside [0, 1)")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise PercentileFitError(f"unknown methods: {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise PercentileFitError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("outlier_ratio_grid", "bias", "methods"):
            out[key] = list(out[key])
        return out


@dataclass
class TrialResult:
    ratio: float
    trial: int
    method: str
    error: float
    elapsed: float = field(default=0.0, compare=False)


@dataclass
class TrialFailure:
    ratio: float
    trial: int
    method: str
    message: str


@dataclass
class SummaryRow:
    ratio: float
    method: str
    mean_error: float
    std_error: float
    trials: int


def split_counts(inlier_count: int, ratio: float) -> tuple:
    """``(M, O)`` with ``M = round(inliers / (1 - ratio))`` and ``O = M - inliers``."""
    M = int(np.floor(inlier_count / (1.0 - ratio) + 0.5))
    return M, M - inlier_count


def trial_seed(config: ExperimentConfig, ratio: float, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(config.seed, spawn_key=(int(round(ratio * 1_000_000)), trial))


def generate_dataset(config: ExperimentConfig, ratio: float, trial_seed) -> Dataset:
    """Inliers first, then outliers; ``trial_seed`` fixes the draw."""
    rng = np.random.default_rng(trial_seed)
    M, O = split_counts(config.inlier_count, ratio)
    dim = len(config.bias)
    inliers = rng.standard_normal((config.inlier_count, dim))
    outliers = np.asarray(config.bias) + config.outlier_scale * rng.standard_normal((O, dim))
    return Dataset(np.vstack([inliers, outliers]))


def _estimators(config: ExperimentConfig) -> dict:
    return {
        PERCENTILE: lambda p: solve_theorem2(p, budget=config.budget).theta,
        "least_squares": lambda p: least_squares_fit(p).theta,
        "l1": lambda p: l1_fit(p).theta,
        "huber": lambda p: huber_fit(p, R=config.huber_threshold).theta,
    }


def _run_cell(config: ExperimentConfig, ratio: float, trial: int):
    data = generate_dataset(config, ratio, trial_seed(config, ratio, trial))
    _, O = split_counts(config.inlier_count, ratio)
    estimators = _estimators(config)
    results, failures = [], []
    for method in config.methods:
        started = time.perf_counter()
        try:
            problem = PercentileProblem(data, sq_distance(data.p), O)
            theta = estimators[method](problem)
            error = float(np.linalg.norm(theta))
            if not np.isfinite(error):
                raise PercentileFitError(f"non-finite estimate {theta}")
        except PercentileFitError as exc:
            failures.append(TrialFailure(ratio, trial, method, str(exc)))
            continue
        results.append(TrialResult(ratio, trial, method, error, time.perf_counter() - started))
    return results, failures


def run_experiment(config: ExperimentConfig, threads: int = 1,
                   on_failure: Optional[Callable[[TrialFailure], None]] = None) -> list:
    """Fit every method on every (ratio, trial) cell.

    Solver errors do not stop the sweep: each one is passed to
    ``on_failure`` (logged as a warning by default) and the cell is left
    out of the results. Results are ordered by ratio grid, trial, then
    method list.
    """
    cells = [(r, t) for r in config.outlier_ratio_grid for t in range(config.trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda c: _run_cell(config, *c), cells))
    else:
        outcomes = [_run_cell(config, *c) for c in cells]
    results = []
    for cell_results, cell_failures in outcomes:
        results.extend(cell_results)
        for failure in cell_failures:
            if on_failure is None:
                log.warning("ratio=%s trial=%d method=%s failed: %s",
                            failure.ratio, failure.trial, failure.method, failure.message)
            else:
                on_failure(failure)
    return results


def summarize(results: Sequence[TrialResult]) -> list:
    """Mean and (population) standard deviation of the error per (ratio, method)."""
    if not results:
        raise PercentileFitError("nothing to summarize")
    groups: dict = {}
    for r in results:
        groups.setdefault((r.ratio, r.method), []).append(r.error)
    rows = []
    for (ratio, method), errors in sorted(groups.items()):
        e = np.array(errors)
        rows.append(SummaryRow(ratio, method, float(e.mean()), float(e.std()), len(e)))
    return rows


def mean_errors(rows: Sequence[SummaryRow]) -> dict:
    """``{(ratio, method): mean_error}`` lookup for a summary."""
    return {(r.ratio, r.method): r.mean_error for r in rows}


def results_csv(results: Sequence[TrialResult], timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in results:
        w.writerow([repr(r.ratio), r.trial, r.method, repr(r.error), repr(r.elapsed) if timing else ""])
    return buf.getvalue()


def summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow([repr(r.ratio), r.method, repr(r.mean_error), repr(r.std_error), r.trials])
    return buf.getvalue()


def failures_csv(failures: Sequence[TrialFailure]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FAILURES_HEADER)
    for f in failures:
        w.writerow([repr(f.ratio), f.trial, f.method, f.message])
    return buf.getvalue()


PLOT_SCRIPT = """\
# gnuplot script: mean error per method against the outlier ratio
set datafile separator ','
set key autotitle columnhead
set xlabel 'outlier ratio O/M'
set ylabel 'mean ||theta||_2'
set logscale y
methods = "{methods}"
plot for [m in methods] 'summary.csv' using 1:(stringcolumn(2) eq m ? $3 : 1/0) with linespoints title m
"""


def plot_script(config: ExperimentConfig) -> str:
    return PLOT_SCRIPT.format(methods=" ".join(config.methods))
