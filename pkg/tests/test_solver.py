import numpy as np
import pytest

from oracles import lasso_coordinate_descent, lasso_objective, slope_enumeration, slope_objective
from slopekit import (
    SolverOptions,
    duality_gap,
    fit_reduced_slope,
    fit_slope,
    lasso_fit,
    majorizes,
    prox_sorted_l1,
)
from slopekit.estimators import soft_threshold
from slopekit.solver import primal_objective, spectral_norm_sq


def random_problem(rng, n, p, scale=2.0):
    X = rng.standard_normal((n, p)) / np.sqrt(n)
    beta = np.zeros(p)
    beta[: max(1, p // 4)] = 3.0
    y = X @ beta + rng.standard_normal(n) * scale * 0.3
    lam = np.sort(rng.uniform(0.05, 1.0, p))[::-1]
    return X, y, lam


def orthogonal(rng, n, p):
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return Q


class TestFitSlope:
    def test_identity_design(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = int(rng.integers(1, 30))
            y = rng.standard_normal(p) * 3
            lam = np.sort(rng.exponential(1.0, p))[::-1]
            fit = fit_slope(np.eye(p), y, lam)
            assert np.linalg.norm(fit.beta_hat - prox_sorted_l1(y, lam)) <= 1e-8

    def test_orthogonal_design(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p = int(rng.integers(1, 15))
            X = orthogonal(rng, p + int(rng.integers(0, 10)), p)
            y = rng.standard_normal(X.shape[0]) * 3
            lam = np.sort(rng.exponential(1.0, p))[::-1]
            fit = fit_slope(X, y, lam)
            assert np.linalg.norm(fit.beta_hat - prox_sorted_l1(X.T @ y, lam)) <= 1e-8

    def test_majorized_correlations_give_zero(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((10, 5))
        y = rng.standard_normal(10)
        g = np.sort(np.abs(X.T @ y))[::-1]
        lam = g + 0.1
        assert majorizes(lam, X.T @ y)
        fit = fit_slope(X, y, lam)
        assert np.all(fit.beta_hat == 0.0)
        assert fit.converged and fit.iterations == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_enumeration_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        X = rng.standard_normal((6, 4))
        y = rng.standard_normal(6) * 2
        lam = np.sort(rng.uniform(0.1, 1.5, 4))[::-1]
        b_ref, f_ref = slope_enumeration(X, y, lam)
        fit = fit_slope(X, y, lam)
        assert abs(fit.objective - f_ref) <= 1e-7
        assert fit.objective >= f_ref - 1e-10
        np.testing.assert_allclose(fit.beta_hat, b_ref, atol=1e-5)

    def test_certificates(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n, p = int(rng.integers(1, 41)), int(rng.integers(1, 21))
            X, y, lam = random_problem(rng, n, p)
            fit = fit_slope(X, y, lam)
            assert fit.converged
            assert fit.relative_gap <= 1e-8
            assert fit.duality_gap >= -1e-9
            assert fit.kkt_majorization_ok
            assert majorizes(lam, X.T @ (y - X @ fit.beta_hat), atol=1e-6 * lam[0])

    def test_objective_trace_monotone(self):
        rng = np.random.default_rng(4)
        X, y, lam = random_problem(rng, 30, 40)
        trace = np.array(fit_slope(X, y, lam).objective_trace)
        assert np.all(np.diff(trace) <= 1e-12 * abs(trace[0]))

    def test_beats_simple_candidates(self):
        rng = np.random.default_rng(5)
        X, y, lam = random_problem(rng, 25, 15)
        fit = fit_slope(X, y, lam)
        assert fit.objective <= primal_objective(X, y, lam, np.zeros(15)) + 1e-12
        assert fit.objective <= primal_objective(X, y, lam, prox_sorted_l1(X.T @ y, lam)) + 1e-12

    def test_positive_homogeneity(self):
        rng = np.random.default_rng(6)
        X, y, lam = random_problem(rng, 20, 10)
        a = fit_slope(X, y, lam).beta_hat
        b = fit_slope(X, 3.0 * y, 3.0 * lam).beta_hat
        np.testing.assert_allclose(b, 3.0 * a, atol=1e-6)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        X, y, lam = random_problem(rng, 20, 10)
        perm = rng.permutation(10)
        a = fit_slope(X, y, lam).beta_hat
        b = fit_slope(X[:, perm], y, lam).beta_hat
        np.testing.assert_allclose(b, a[perm], atol=1e-6)

    def test_non_convergence_is_reported(self):
        rng = np.random.default_rng(8)
        X, y, lam = random_problem(rng, 30, 40)
        fit = fit_slope(X, y, lam, SolverOptions(max_iter=1))
        assert not fit.converged
        assert fit.iterations == 1

    def test_bad_inputs(self):
        X = np.ones((3, 2))
        with pytest.raises(ValueError):
            fit_slope(X, np.ones(4), [1.0, 0.5])
        with pytest.raises(ValueError):
            fit_slope(X, np.ones(3), [1.0])
        with pytest.raises(ValueError):
            fit_slope(X, np.array([1.0, np.nan, 0.0]), [1.0, 0.5])
        with pytest.raises(ValueError):
            fit_slope(np.array([[np.inf, 0.0]] * 3), np.ones(3), [1.0, 0.5])
        with pytest.raises(ValueError):
            SolverOptions(max_iter=0)
        with pytest.raises(ValueError):
            SolverOptions(tol=0.0)


class TestDualityGap:
    def test_hand_instance(self):
        # b = 0: primal 11/2, rescaling t = 1/3, dual 55/18
        X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        y = np.array([3.0, 1.0, 1.0])
        gap = duality_gap(X, y, [1.0, 0.5], np.zeros(2))
        assert gap == pytest.approx(22 / 9, rel=1e-14)

    def test_orthogonal_optimum(self):
        rng = np.random.default_rng(9)
        X = orthogonal(rng, 12, 6)
        y = rng.standard_normal(12) * 3
        lam = np.sort(rng.exponential(1.0, 6))[::-1]
        assert abs(duality_gap(X, y, lam, prox_sorted_l1(X.T @ y, lam))) <= 1e-10

    def test_converged_fit(self):
        rng = np.random.default_rng(10)
        X, y, lam = random_problem(rng, 20, 12)
        fit = fit_slope(X, y, lam)
        gap = duality_gap(X, y, lam, fit.beta_hat)
        assert gap == pytest.approx(fit.duality_gap, rel=1e-6, abs=1e-12)
        assert gap <= 1e-8 * fit.objective

    def test_nonnegative(self):
        rng = np.random.default_rng(11)
        X, y, lam = random_problem(rng, 15, 8)
        for _ in range(20):
            assert duality_gap(X, y, lam, rng.standard_normal(8)) >= 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            duality_gap(np.eye(2), np.ones(2), [1.0, 0.5], np.zeros(3))


class TestReducedSlope:
    def test_full_set(self):
        rng = np.random.default_rng(12)
        X, y, lam = random_problem(rng, 20, 8)
        a = fit_slope(X, y, lam)
        b = fit_reduced_slope(X, y, lam, range(8))
        # the column copy may change BLAS summation order
        np.testing.assert_allclose(a.beta_hat, b.beta_hat, atol=1e-12)
        assert b.lifted_certificate

    def test_certificate_implies_full_solution(self):
        rng = np.random.default_rng(13)
        n, p = 20, 8
        X = rng.standard_normal((n, p)) / np.sqrt(n)
        beta = np.zeros(p)
        beta[[1, 4, 6]] = [6.0, -5.0, 4.0]
        y = X @ beta + 0.3 * rng.standard_normal(n)
        lam = np.linspace(1.5, 0.8, p)
        red = fit_reduced_slope(X, y, lam, [1, 4, 6])
        assert red.lifted_certificate
        full = fit_slope(X, y, lam)
        assert np.linalg.norm(red.beta_hat - full.beta_hat) <= 1e-6

    def test_certificate_can_fail(self):
        rng = np.random.default_rng(14)
        n, p = 20, 8
        X = rng.standard_normal((n, p)) / np.sqrt(n)
        beta = np.zeros(p)
        beta[[0, 1, 2]] = 8.0
        y = X @ beta + 0.1 * rng.standard_normal(n)
        red = fit_reduced_slope(X, y, np.linspace(0.5, 0.1, p), [0])
        assert red.lifted_certificate is False

    def test_bad_sets(self):
        X, y = np.eye(3), np.ones(3)
        with pytest.raises(ValueError):
            fit_reduced_slope(X, y, [1.0, 0.5, 0.2], [])
        with pytest.raises(ValueError):
            fit_reduced_slope(X, y, [1.0, 0.5, 0.2], [3])


class TestLasso:
    def test_huge_penalty(self):
        rng = np.random.default_rng(15)
        X, y, _ = random_problem(rng, 10, 5)
        assert np.all(lasso_fit(X, y, 1e6).beta_hat == 0.0)

    def test_orthogonal_soft_threshold(self):
        rng = np.random.default_rng(16)
        X = orthogonal(rng, 15, 7)
        y = rng.standard_normal(15) * 3
        fit = lasso_fit(X, y, 0.8)
        np.testing.assert_allclose(fit.beta_hat, soft_threshold(X.T @ y, 0.8), atol=1e-8)

    @pytest.mark.parametrize("seed", range(3))
    def test_coordinate_descent_oracle(self, seed):
        rng = np.random.default_rng(200 + seed)
        X, y, _ = random_problem(rng, 12, 6)
        b_cd = lasso_coordinate_descent(X, y, 0.4)
        fit = lasso_fit(X, y, 0.4)
        assert abs(fit.objective - lasso_objective(X, y, 0.4, b_cd)) <= 1e-7

    def test_matches_constant_weights(self):
        rng = np.random.default_rng(17)
        X, y, _ = random_problem(rng, 12, 6)
        a = lasso_fit(X, y, 0.4).beta_hat
        b = fit_slope(X, y, np.full(6, 0.4)).beta_hat
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("lam", [0.0, -1.0, float("nan")])
    def test_bad_penalty(self, lam):
        with pytest.raises(ValueError):
            lasso_fit(np.eye(2), np.ones(2), lam)


class TestSpectralNorm:
    def test_close_to_exact(self):
        rng = np.random.default_rng(18)
        X = rng.standard_normal((40, 30))
        est = spectral_norm_sq(X, 30)
        exact = np.linalg.norm(X, 2) ** 2
        assert est <= exact * (1 + 1e-12)
        assert est >= 0.9 * exact

    def test_zero_matrix(self):
        assert spectral_norm_sq(np.zeros((3, 2))) == 0.0

    def test_objective_helper(self):
        X = np.eye(2)
        assert slope_objective(X, [1.0, 1.0], [1.0, 0.5], np.zeros(2)) == 1.0
