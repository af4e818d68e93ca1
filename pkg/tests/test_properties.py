"""Property-based checks of the solver, fit and I/O invariants."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import chebyshev_scipy
from percentile_fit import (
    Dataset,
    PercentileProblem,
    chebyshev_fit,
    enclosing_ball_fit,
    linear_abs,
    percentile_loss,
    solve_theorem1,
    solve_theorem2,
    sq_distance,
)
from percentile_fit.cli import read_dataset_csv, write_dataset_csv
from percentile_fit.residuals import eval_residual_vector

coords = st.floats(-50, 50, allow_nan=False, width=64)


@st.composite
def point_clouds(draw, min_size=1, max_size=9):
    n = draw(st.integers(min_size, max_size))
    return draw(arrays(float, (n, 2), elements=coords))


@settings(max_examples=60, deadline=None)
@given(point_clouds())
def test_ball_contains_subset_and_has_support(P):
    fit = enclosing_ball_fit(Dataset(P), range(len(P)))
    dist = np.sum((P - fit.theta) ** 2, axis=1)
    assert np.all(dist <= fit.value + 1e-9 * max(1.0, fit.value))
    if fit.value > 0:
        support = np.abs(dist - fit.value) <= 1e-9 * max(1.0, fit.value)
        assert np.count_nonzero(support) >= 2


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_square_chebyshev_matches_lp_value(d, seed):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.standard_normal((d + 1, d)), rng.standard_normal(d + 1) * 5)
    fit = chebyshev_fit(ds, range(d + 1))
    if fit.ok:
        _, value = chebyshev_scipy(ds.features, ds.labels)
        assert abs(fit.value - value) <= 1e-8 * max(1.0, value)


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(point_clouds(min_size=4, max_size=8), st.data())
def test_solver_objective_self_consistent_and_monotone(P, data):
    family = sq_distance(2)
    ds = Dataset(P)
    O = data.draw(st.integers(0, len(P) - 4))
    report = solve_theorem2(PercentileProblem(ds, family, O))
    again = percentile_loss(eval_residual_vector(family, report.theta, ds), O)
    assert abs(again - report.objective) <= 1e-9 * max(abs(report.objective), 1e-300)
    exact = solve_theorem1(PercentileProblem(ds, family, O)).objective
    assert abs(report.objective - exact) <= 1e-8 * max(exact, 1e-300)
    if O + 1 <= len(P) - 4:
        fewer = solve_theorem2(PercentileProblem(ds, family, O + 1)).objective
        assert fewer <= report.objective + 1e-12 * max(1.0, report.objective)


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 9), st.integers(0, 2**32 - 1))
def test_linear_theorem1_self_consistent(M, seed):
    rng = np.random.default_rng(seed)
    ds = Dataset(rng.standard_normal((M, 1)), rng.standard_normal(M))
    problem = PercentileProblem(ds, linear_abs(1), 2)
    report = solve_theorem1(problem)
    again = percentile_loss(eval_residual_vector(linear_abs(1), report.theta, ds), 2)
    assert abs(again - report.objective) <= 1e-9 * max(report.objective, 1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 3)),
              elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_csv_round_trip_exact(tmp_path_factory, X):
    path = tmp_path_factory.mktemp("csv") / "data.csv"
    write_dataset_csv(Dataset(X), path)
    back = read_dataset_csv(path, "centroid")
    assert np.array_equal(back.features, X)
