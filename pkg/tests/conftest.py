import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from percentile_fit import Dataset, PercentileProblem, linear_abs, sq_distance  # noqa: E402


def random_centroid_problem(rng, M, O, d=2):
    inliers = rng.standard_normal((M - O, d))
    outliers = rng.normal(3.0, 1.0, size=(O, d))
    X = np.vstack([inliers, outliers])
    rng.shuffle(X)
    return PercentileProblem(Dataset(X), sq_distance(d), O)


def random_linear_problem(rng, M, O, d):
    X = rng.uniform(0.5, 2.0, size=(M, d)) * rng.choice([-1.0, 1.0], size=(M, d))
    theta = rng.uniform(-1.0, 1.0, size=d)
    y = X @ theta + 0.1 * rng.standard_normal(M)
    bad = rng.choice(M, size=O, replace=False)
    y[bad] += rng.uniform(3.0, 6.0, size=O) * rng.choice([-1.0, 1.0], size=O)
    return PercentileProblem(Dataset(X, y), linear_abs(d), O)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def five_point_centroid():
    pts = [(0.0, 0.0), (0.1, 0.0), (-0.1, 0.0), (0.0, 0.1), (10.0, 10.0)]
    return PercentileProblem(Dataset(pts), sq_distance(2), 1)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and return the flag."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
