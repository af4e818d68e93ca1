import itertools

import numpy as np
import pytest

from conftest import random_centroid_problem, random_linear_problem
from percentile_fit import (
    BudgetExceededError,
    Dataset,
    DegenerateProblemError,
    PercentileProblem,
    PreconditionError,
    blackbox,
    chebyshev_fit,
    enclosing_ball_fit,
    grid_oracle,
    linear_abs,
    percentile_loss,
    solve_randomized,
    solve_theorem1,
    solve_theorem2,
    sq_distance,
)
from percentile_fit.residuals import eval_residual_vector
from percentile_fit.solvers import lipschitz_bound, oracle_tolerance, unrank_combination


def objective_at(problem, theta):
    return percentile_loss(eval_residual_vector(problem.family, theta, problem.dataset), problem.outliers)


def test_unrank_matches_itertools():
    combos = list(itertools.combinations(range(7), 3))
    assert [unrank_combination(r, 7, 3) for r in range(len(combos))] == combos


class TestTheorem1:
    def test_no_outliers_is_plain_minimax(self, rng):
        problem = random_centroid_problem(rng, 7, 0)
        report = solve_theorem1(problem)
        ball = enclosing_ball_fit(problem.dataset, range(7))
        assert report.subsets_total == 1
        assert np.array_equal(report.theta, ball.theta) and report.objective == ball.value

    def test_five_point_centroid(self, five_point_centroid):
        report = solve_theorem1(five_point_centroid)
        assert np.allclose(report.theta, [0.0, 0.0], atol=1e-12)
        assert report.objective == pytest.approx(0.01, rel=1e-12)
        assert report.inlier_indices == (0, 1, 2, 3)
        assert report.winning_subset == (0, 1, 2, 3)
        box = [(-1.0, 11.0), (-1.0, 11.0)]
        oracle = grid_oracle(five_point_centroid, box, 241)
        tol = oracle_tolerance(five_point_centroid, box, 241)
        assert report.objective <= oracle.objective + 1e-15
        assert oracle.objective <= report.objective + tol

    def test_linear_objective_is_min_over_subset_fits(self, rng):
        problem = random_linear_problem(rng, 8, 2, 1)
        report = solve_theorem1(problem, record=True)
        assert report.subsets_total == 28
        direct = min(chebyshev_fit(problem.dataset, S).value
                     for S in itertools.combinations(range(8), 6))
        assert report.objective == pytest.approx(direct, rel=1e-12)
        assert report.objective == min(f.value for f in report.fits if f.ok)
        box = [(-4.0, 4.0)]
        oracle = grid_oracle(problem, box, 4001)
        assert abs(oracle.objective - report.objective) <= oracle_tolerance(problem, box, 4001)

    def test_lexicographic_tiebreak(self):
        # two clusters fit equally well: the first subset in lex order wins
        pts = [(0.0, 0.0), (1.0, 0.0), (10.0, 0.0), (11.0, 0.0)]
        problem = PercentileProblem(Dataset(pts), sq_distance(2), 2)
        report = solve_theorem1(problem)
        assert report.winning_subset == (0, 1)
        assert report.objective == 0.25

    def test_budget(self, rng):
        problem = random_centroid_problem(rng, 12, 4)
        with pytest.raises(BudgetExceededError):
            solve_theorem1(problem, budget=100)

    def test_all_degenerate(self):
        ds = Dataset([[0.0], [0.0], [0.0]], [1.0, 2.0, 3.0])
        with pytest.raises(DegenerateProblemError):
            solve_theorem1(PercentileProblem(ds, linear_abs(1), 1))

    def test_linear_needs_enough_inliers(self, rng):
        problem = random_linear_problem(rng, 4, 2, 3)
        with pytest.raises(PreconditionError):
            solve_theorem1(problem)

    def test_blackbox_family(self):
        pts = [(0.0, 0.0), (0.5, 0.0), (9.0, 9.0)]
        fam = blackbox(lambda t, p: float(np.sum((p.feature - t) ** 2)), 2, [(-1, 1), (-1, 1)], 9)
        report = solve_theorem1(PercentileProblem(Dataset(pts), fam, 1))
        assert report.winning_subset == (0, 1)
        assert report.theta.tolist() == [0.25, 0.0]


class TestTheorem2:
    def test_five_point_agrees_with_theorem1(self, five_point_centroid):
        t1 = solve_theorem1(five_point_centroid)
        t2 = solve_theorem2(five_point_centroid)
        assert np.allclose(t1.theta, t2.theta, atol=1e-14)
        assert t2.objective == pytest.approx(t1.objective, rel=1e-12)

    def test_linear_agrees_with_theorem1(self, rng):
        for _ in range(5):
            problem = random_linear_problem(rng, 8, 2, 1)
            t1 = solve_theorem1(problem)
            t2 = solve_theorem2(problem)
            assert t2.objective == pytest.approx(t1.objective, rel=1e-8)

    def test_precondition(self, rng):
        problem = random_centroid_problem(rng, 5, 3)
        with pytest.raises(PreconditionError, match="d\\+1 < M-O"):
            solve_theorem2(problem)

    def test_rejects_nonconvex(self):
        fam = blackbox(lambda t, p: 0.0, 1, [(0, 1)], 3)
        problem = PercentileProblem(Dataset(np.arange(6.0)[:, None]), fam, 1)
        with pytest.raises(PreconditionError, match="convex"):
            solve_theorem2(problem)

    def test_degenerate_subsets_are_skipped(self):
        X = [[0.0], [1.0], [2.0], [3.0], [0.0]]
        y = [5.0, 1.0, 2.0, 3.0, -5.0]
        report = solve_theorem2(PercentileProblem(Dataset(X, y), linear_abs(1), 2))
        assert report.subsets_skipped == 7  # pairs touching a zero feature
        assert report.subsets_solved == 3
        assert report.objective == pytest.approx(0.0, abs=1e-12)
        assert report.inlier_indices == (1, 2, 3)

    def test_self_consistent_objective(self, rng):
        problem = random_centroid_problem(rng, 11, 3)
        report = solve_theorem2(problem)
        assert objective_at(problem, report.theta) == pytest.approx(report.objective, rel=1e-9)
        assert len(report.inlier_indices) == problem.inliers

    def test_monotone_in_outliers(self, rng):
        base = random_centroid_problem(rng, 10, 0)
        prev = np.inf
        for O in range(0, 7):
            report = solve_theorem2(PercentileProblem(base.dataset, base.family, O))
            assert report.objective <= prev + 1e-12
            prev = report.objective

    def test_thread_count_does_not_change_report(self, rng, monkeypatch):
        import percentile_fit.solvers as solvers

        monkeypatch.setattr(solvers, "CHUNK_SIZE", 16)
        problem = random_centroid_problem(rng, 14, 4)
        serial = solve_theorem2(problem, threads=1)
        parallel = solve_theorem2(problem, threads=4)
        assert serial == parallel
        lin = random_linear_problem(rng, 9, 3, 2)
        assert solve_theorem1(lin, threads=1) == solve_theorem1(lin, threads=3)


class TestRandomized:
    def test_exhaustive_sampling_equals_theorem2(self, rng):
        problem = random_centroid_problem(rng, 9, 2)
        exact = solve_theorem2(problem)
        rand = solve_randomized(problem, num_samples=84, seed=5)
        a, b = rand.to_dict(include_elapsed=False), exact.to_dict(include_elapsed=False)
        assert (a.pop("solver"), b.pop("solver")) == ("randomized", "theorem2")
        assert a == b

    def test_dominance_over_many_seeds(self, rng):
        problem = random_centroid_problem(rng, 12, 3)
        lin = random_linear_problem(rng, 10, 3, 2)
        exact = solve_theorem2(problem).objective
        exact_lin = solve_theorem2(lin).objective
        for seed in range(100):
            assert solve_randomized(problem, 20, seed).objective >= exact - 1e-12
            assert solve_randomized(lin, 15, seed).objective >= exact_lin - 1e-12

    def test_deterministic(self, rng):
        problem = random_centroid_problem(rng, 12, 3)
        a = solve_randomized(problem, 30, seed=7)
        b = solve_randomized(problem, 30, seed=7)
        assert a == b and np.array_equal(a.theta, b.theta)
        assert a.subsets_total == 30

    def test_theorem1_mode(self, rng):
        problem = random_centroid_problem(rng, 8, 2)
        exact = solve_theorem1(problem)
        full = solve_randomized(problem, 1000, seed=0, subset_size="theorem1")
        assert full.objective == pytest.approx(exact.objective, rel=1e-12)
        partial = solve_randomized(problem, 5, seed=0, subset_size="theorem1")
        assert partial.objective >= exact.objective - 1e-12

    def test_bad_arguments(self, rng):
        problem = random_centroid_problem(rng, 8, 2)
        with pytest.raises(PreconditionError):
            solve_randomized(problem, 0, seed=0)
        with pytest.raises(PreconditionError):
            solve_randomized(problem, 5, seed=0, subset_size="bogus")


class TestGridOracle:
    def test_single_point_box(self, five_point_centroid):
        report = grid_oracle(five_point_centroid, [(0.0, 0.0), (0.0, 0.0)], 2)
        assert report.subsets_total == 1
        assert report.objective == pytest.approx(0.01)

    def test_square_center(self):
        pts = [(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (2.0, 2.0)]
        problem = PercentileProblem(Dataset(pts), sq_distance(2), 0)
        report = grid_oracle(problem, [(-1, 3), (-1, 3)], 41)
        assert np.all(np.abs(report.theta - 1.0) <= 0.1 + 1e-12)

    def test_rejects_three_dims(self, rng):
        problem = random_centroid_problem(rng, 6, 1, d=3)
        with pytest.raises(PreconditionError):
            grid_oracle(problem, [(0, 1)] * 3, 3)

    def test_dominated_by_exact(self, rng):
        for _ in range(5):
            problem = random_centroid_problem(rng, 9, 2)
            box = [(-4.0, 7.0), (-4.0, 7.0)]
            exact = solve_theorem2(problem)
            oracle = grid_oracle(problem, box, 201)
            assert exact.objective <= oracle.objective + 1e-12
            assert oracle.objective <= exact.objective + oracle_tolerance(problem, box, 201)

    def test_lipschitz_bound_blackbox_unknown(self):
        fam = blackbox(lambda t, p: 0.0, 1, [(0, 1)], 3)
        problem = PercentileProblem(Dataset([[0.0], [1.0]]), fam, 0)
        with pytest.raises(PreconditionError):
            lipschitz_bound(problem, [(0, 1)])
