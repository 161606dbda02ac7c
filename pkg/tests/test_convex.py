import numpy as np
import pytest

from relabelsvm import (ConvexSubproblem, Dataset, HingeTerm, Hyperplane, SignConstraint,
                        coordinate_median, geometric_median, solve_subproblem, train_svm)
from relabelsvm.convex import EmptyPointSetError, _optimal_bias

from conftest import random_dataset, reference_svm


class TestTrainSvm:
    def test_separable_symmetric_pair(self):
        d = Dataset(np.array([[-1.0], [1.0]]), np.array([-1, 1]))
        sol = train_svm(d, C=10.0)
        assert np.allclose(sol.hyperplane.w, [1.0], atol=1e-8)
        assert abs(sol.hyperplane.b) < 1e-8
        assert np.allclose(sol.errors, 0.0, atol=1e-9)
        assert abs(sol.objective - 0.5) < 1e-8

    def test_single_effective_class(self):
        d = Dataset(np.array([[-1.0], [1.0]]), np.array([1, 1]))
        sol = train_svm(d, C=1.0)
        assert np.allclose(sol.hyperplane.w, 0.0, atol=1e-9)
        assert abs(sol.hyperplane.b - 1.0) < 1e-9
        assert abs(sol.objective) < 1e-12

    def test_matches_reference_solver(self, rng):
        for _ in range(6):
            n = int(rng.integers(10, 50))
            p = int(rng.integers(1, 6))
            d = random_dataset(rng, n, p)
            C = float(10.0 ** rng.uniform(-1, 1))
            sol = train_svm(d, C=C, tol=1e-9)
            w, b, ref_obj, kkt = reference_svm(d, C, iters=20000)
            assert kkt < 1e-6  # the reference iterate is itself near-optimal
            assert abs(sol.objective - ref_obj) < 1e-6 * max(1.0, ref_obj)

    def test_duality_gap_and_error_identity(self, rng):
        d = random_dataset(rng, 40, 3)
        sol = train_svm(d, C=2.0, tol=1e-8)
        assert sol.dual_gap <= 1e-8
        f = sol.hyperplane.decision(d.X)
        expect = np.maximum(0.0, 1.0 - d.y * f)
        assert np.max(np.abs(expect - sol.errors)) < 1e-9

    def test_deterministic(self, rng):
        d = random_dataset(rng, 30, 4)
        a = train_svm(d, C=1.0)
        b = train_svm(d, C=1.0)
        assert np.array_equal(a.hyperplane.w, b.hyperplane.w)
        assert a.hyperplane.b == b.hyperplane.b

    def test_bad_c_rejected(self, rng):
        with pytest.raises(ValueError):
            train_svm(random_dataset(rng, 4, 2), C=0.0)

    def test_duplicating_points_doubles_hinge_sum(self, rng):
        d = random_dataset(rng, 20, 3)
        sol = train_svm(d, C=1.0)
        dd = Dataset(np.vstack([d.X, d.X]), np.concatenate([d.y, d.y]))
        f = sol.hyperplane.decision(dd.X)
        doubled = np.maximum(0.0, 1.0 - dd.y * f).sum()
        assert abs(doubled - 2.0 * sol.errors.sum()) < 1e-9


class TestOptimalBias:
    def test_mirrored_bias(self, rng):
        for _ in range(20):
            m = int(rng.integers(1, 8))
            ft = rng.standard_normal(m)
            t = np.where(rng.random(m) < 0.5, 1.0, -1.0)
            w = rng.random(m) + 0.1
            g = np.where(rng.random(m) < 0.8, 1.0, 0.0)
            b1, v1 = _optimal_bias(ft, t, w, g)
            b2, v2 = _optimal_bias(-ft, -t, w, g)
            assert abs(b1 + b2) < 1e-12
            assert abs(v1 - v2) < 1e-12

    def test_exactness_vs_scan(self, rng):
        for _ in range(10):
            m = int(rng.integers(2, 7))
            ft = rng.standard_normal(m)
            t = np.where(rng.random(m) < 0.5, 1.0, -1.0)
            w = rng.random(m) + 0.1
            g = np.ones(m)
            _, val = _optimal_bias(ft, t, w, g)
            bs = np.linspace(-6, 6, 20001)
            scan = (w[:, None] * np.maximum(0.0, g[:, None] - t[:, None] * (ft[:, None] + bs))).sum(0)
            assert val <= scan.min() + 1e-9


class TestSolveSubproblem:
    def test_empty_problem(self):
        sp = ConvexSubproblem(np.zeros((2, 3)), (), (), "l2sq", 0.5)
        sol = solve_subproblem(sp)
        assert np.allclose(sol.hyperplane.w, 0.0)
        assert sol.hyperplane.b == 0.0
        assert sol.objective == 0.0

    def test_equivalent_to_train_svm(self, rng):
        d = random_dataset(rng, 25, 3)
        hinges = tuple(HingeTerm(i, int(d.y[i]), 1.5) for i in range(d.n))
        sp = ConvexSubproblem(d.X, hinges, (), "l2sq", 0.5)
        sol = solve_subproblem(sp, tol=1e-9)
        ref = train_svm(d, C=1.5, tol=1e-9)
        assert abs(sol.objective - ref.objective) < 1e-7 * max(1.0, ref.objective)

    def test_constrained_1d_matches_grid_oracle(self):
        # frozen dense-grid oracle: (w, b) in [-3, 3]^2 at 1e-3 resolution gives
        # 0.055778 at (0.334, -0.668); the continuous optimum is 1/18 at (1/3, -2/3)
        X = np.array([[2.0], [-1.0]])
        sp = ConvexSubproblem(X, (HingeTerm(1, -1, 1.0),), (SignConstraint(0, 1, 0.0),),
                              "l2sq", 0.5)
        sol = solve_subproblem(sp, tol=1e-9)
        assert sol.violation <= 1e-9
        assert abs(sol.objective - 1.0 / 18.0) < 1e-6
        assert abs(sol.objective - 0.055778) < 1e-3  # grid value at grid resolution

    def test_piecewise_never_worse_than_warm_start(self, rng):
        for norm in ("l1", "l2"):
            d = random_dataset(rng, 15, 2)
            hinges = tuple(HingeTerm(i, int(d.y[i]), 0.8) for i in range(d.n))
            sp = ConvexSubproblem(d.X, hinges, (), norm, 0.5)
            warm = Hyperplane(rng.standard_normal(2), float(rng.standard_normal()))
            warm_obj = sp.objective_at(warm)
            sol = solve_subproblem(sp, tol=1e-6, warm_start=warm)
            assert sol.objective <= warm_obj + 1e-6 * max(1.0, abs(warm_obj))

    def test_piecewise_sign_constraints_enforced(self, rng):
        d = random_dataset(rng, 12, 2)
        hinges = tuple(HingeTerm(i, int(d.y[i]), 1.0) for i in range(d.n))
        cons = tuple(SignConstraint(i, int(d.y[i]), 0.0) for i in range(6))
        for norm in ("l1", "l2"):
            sp = ConvexSubproblem(d.X, hinges, cons, norm, 0.5)
            sol = solve_subproblem(sp, tol=1e-6)
            assert sol.violation <= 1e-9

    def test_l2sq_with_constraints_matches_piecewise_upper(self, rng):
        # same instance through both engines; QP path must not be worse
        d = random_dataset(rng, 10, 2)
        hinges = tuple(HingeTerm(i, int(d.y[i]), 1.0) for i in range(d.n))
        cons = (SignConstraint(0, int(d.y[0]), 0.0),)
        qp = solve_subproblem(ConvexSubproblem(d.X, hinges, cons, "l2sq", 0.5), tol=1e-9)
        # objective function value check by relaxing tolerance: subgradient path
        # on the same l2sq geometry is only approximate
        sub = ConvexSubproblem(d.X, hinges, cons, "l2sq", 0.5)
        from relabelsvm.convex import _solve_piecewise
        pw = _solve_piecewise(sub, 1e-6, None, 6, 800, None)
        assert qp.objective <= pw.objective + 1e-5 * max(1.0, pw.objective)


class TestMedians:
    def test_coordinate_median_examples(self):
        assert coordinate_median(np.array([[1.0], [2.0], [10.0]]))[0] == 2.0
        assert coordinate_median(np.array([[1.0], [3.0]]))[0] == 1.0  # lower median

    def test_coordinate_median_empty(self):
        with pytest.raises(EmptyPointSetError):
            coordinate_median(np.zeros((0, 2)))

    def test_coordinate_median_beats_random_candidates(self, rng):
        pts = rng.standard_normal((20, 3))
        med = coordinate_median(pts)
        obj = np.abs(pts - med).sum()
        cand = rng.uniform(-3, 3, size=(10000, 3))
        vals = np.abs(pts[None, :, :] - cand[:, None, :]).sum(axis=(1, 2))
        assert obj <= vals.min() + 1e-9

    def test_geometric_median_triangle(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        med = geometric_median(pts, tol=1e-10)
        centroid = pts.mean(axis=0)
        assert np.max(np.abs(med - centroid)) < 1e-6

    def test_geometric_median_identity_and_square(self):
        single = np.array([[3.0, -2.0]])
        assert np.allclose(geometric_median(single), single[0])
        square = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0]])
        assert np.max(np.abs(geometric_median(square, tol=1e-10) - [2.0, 2.0])) < 1e-6

    def test_geometric_median_coincident_anchor(self):
        pts = np.array([[1.0, 1.0]] * 5 + [[2.0, 2.0]])
        med = geometric_median(pts, tol=1e-10)
        assert np.max(np.abs(med - [1.0, 1.0])) < 1e-9

    def test_geometric_median_beats_random_candidates(self, rng):
        pts = rng.standard_normal((15, 2))
        med = geometric_median(pts, tol=1e-10)
        obj = np.sqrt(((pts - med) ** 2).sum(axis=1)).sum()
        cand = rng.uniform(-3, 3, size=(10000, 2))
        diffs = pts[None, :, :] - cand[:, None, :]
        vals = np.sqrt((diffs ** 2).sum(axis=2)).sum(axis=1)
        assert obj <= vals.min() + 1e-9
