"""Design construction and the linear/KRR fit-predict contracts."""

import numpy as np
import pytest

from semshock.errors import InputError
from semshock.models import Design, build_design, fit_predict, rbf_kernel


def _design(targets, regressors, lag=1, enhanced=False):
    return Design(
        targets=np.asarray(targets, dtype=float),
        regressors=np.asarray(regressors, dtype=float),
        row_dates=None,
        lag=lag,
        enhanced=enhanced,
    )


class TestBuildDesign:
    def test_base_hand_example(self):
        d = build_design(np.array([1.0, 2.0, 3.0, 4.0]), lag=2)
        assert d.targets.tolist() == [3.0, 4.0]
        assert d.regressors.tolist() == [[2.0, 1.0], [3.0, 2.0]]
        assert not d.enhanced

    def test_enhanced_single_extra_column(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        x = np.array([10.0, 20.0, 30.0, 40.0])
        d = build_design(y, x, lag=2)
        assert d.enhanced
        assert d.regressors.shape == (2, 3)
        assert d.regressors[:, 2].tolist() == [10.0, 20.0]

    def test_lag_zero_fatal(self):
        with pytest.raises(InputError):
            build_design(np.arange(10.0), lag=0)

    def test_too_short_fatal(self):
        with pytest.raises(InputError):
            build_design(np.array([1.0, 2.0, 3.0]), lag=2)

    def test_length_mismatch_fatal(self):
        with pytest.raises(InputError):
            build_design(np.arange(10.0), np.arange(9.0), lag=2)

    def test_base_columns_are_shifted_targets(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal(40)
        lag = 4
        d = build_design(y, lag=lag)
        for j in range(lag):
            np.testing.assert_array_equal(d.regressors[:, j], y[lag - j - 1 : len(y) - j - 1])


class TestLinear:
    def test_exact_line(self):
        d = _design([1.0, 3.0, 5.0, 0.0], [[0.0], [1.0], [2.0], [3.0]])
        fit = fit_predict(d, [0, 1, 2], [3], kind="linear")
        assert fit.predictions[0] == pytest.approx(7.0, abs=1e-10)

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n, p = int(rng.integers(10, 50)), int(rng.integers(1, 6))
            X = rng.standard_normal((n, p))
            y = rng.standard_normal(n)
            d = _design(y, X)
            n_train = n - 3
            fit = fit_predict(d, range(n_train), range(n_train, n), kind="linear")
            Xa = np.column_stack([np.ones(n_train), X[:n_train]])
            beta = np.linalg.solve(Xa.T @ Xa, Xa.T @ y[:n_train])
            expected = np.column_stack([np.ones(3), X[n_train:]]) @ beta
            np.testing.assert_allclose(fit.predictions, expected, atol=1e-8)

    def test_train_residuals_orthogonal_to_columns(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((60, 4))
        y = rng.standard_normal(60)
        d = _design(y, X)
        fit = fit_predict(d, range(50), range(50, 60), kind="linear")
        beta = fit.parameters["beta"]
        Xa = np.column_stack([np.ones(50), X[:50]])
        resid = y[:50] - Xa @ beta
        for j in range(Xa.shape[1]):
            dot = abs(float(resid @ Xa[:, j]))
            scale = np.linalg.norm(resid) * np.linalg.norm(Xa[:, j]) + 1e-30
            assert dot / scale < 1e-6

    def test_extra_column_never_hurts_train_error(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            X = rng.standard_normal((80, 3))
            noise_col = rng.standard_normal((80, 1))
            y = rng.standard_normal(80)
            base = _design(y, X)
            enhanced = _design(y, np.hstack([X, noise_col]))
            fb = fit_predict(base, range(70), range(70, 80), kind="linear")
            fe = fit_predict(enhanced, range(70), range(70, 80), kind="linear")
            Xa = np.column_stack([np.ones(70), X[:70]])
            Xe = np.column_stack([np.ones(70), X[:70], noise_col[:70]])
            err_b = np.sum((y[:70] - Xa @ fb.parameters["beta"]) ** 2)
            err_e = np.sum((y[:70] - Xe @ fe.parameters["beta"]) ** 2)
            assert err_e <= err_b + 1e-10

    def test_rank_deficiency_minimum_norm(self):
        X = np.ones((10, 2))          # duplicate constant columns
        y = np.linspace(0.0, 1.0, 10)
        d = _design(y, X)
        fit = fit_predict(d, range(8), range(8, 10), kind="linear")
        assert np.all(np.isfinite(fit.predictions))

    def test_no_intercept_flag(self):
        d = _design([2.0, 4.0, 6.0, 0.0], [[1.0], [2.0], [3.0], [5.0]])
        fit = fit_predict(d, [0, 1, 2], [3], kind="linear", intercept=False)
        assert fit.predictions[0] == pytest.approx(10.0, abs=1e-10)


class TestKrr:
    def test_single_train_point_exact_half(self):
        d = _design([1.0, 0.0], [[0.0], [0.0]])
        fit = fit_predict(d, [0], [1], kind="krr", ridge_lambda=1.0, rbf_gamma=2.5)
        assert fit.predictions[0] == 0.5

    def test_matches_dense_solve_raw_features(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n, p = int(rng.integers(8, 40)), int(rng.integers(1, 5))
            X = rng.standard_normal((n, p))
            y = rng.standard_normal(n)
            lam, gamma = 0.7, 0.9
            d = _design(y, X)
            n_train = n - 4
            fit = fit_predict(d, range(n_train), range(n_train, n), kind="krr",
                              ridge_lambda=lam, rbf_gamma=gamma, standardize=False)
            # independent oracle: explicit loops and a generic dense solve
            K = np.empty((n_train, n_train))
            for i in range(n_train):
                for j in range(n_train):
                    diff = X[i] - X[j]
                    K[i, j] = np.exp(-gamma * diff @ diff)
            alpha = np.linalg.solve(K + lam * np.eye(n_train), y[:n_train])
            expected = np.empty(4)
            for i in range(4):
                k_star = np.array([np.exp(-gamma * (X[n_train + i] - X[j]) @ (X[n_train + i] - X[j]))
                                   for j in range(n_train)])
                expected[i] = k_star @ alpha
            np.testing.assert_allclose(fit.predictions, expected, atol=1e-8)

    def test_matches_dense_solve_standardized(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((30, 3)) * np.array([5.0, 0.2, 1.0])
        y = rng.standard_normal(30)
        fit = fit_predict(_design(y, X), range(24), range(24, 30), kind="krr",
                          ridge_lambda=1.0)
        mu = X[:24].mean(axis=0)
        sd = X[:24].std(axis=0)
        Z = (X - mu) / sd
        gamma = 1.0 / 3
        K = np.exp(-gamma * ((Z[:24, None, :] - Z[None, :24, :]) ** 2).sum(-1))
        alpha = np.linalg.solve(K + np.eye(24), y[:24])
        k_star = np.exp(-gamma * ((Z[24:, None, :] - Z[None, :24, :]) ** 2).sum(-1))
        np.testing.assert_allclose(fit.predictions, k_star @ alpha, atol=1e-8)

    def test_alpha_norm_shrinks_with_lambda(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((40, 2))
        y = rng.standard_normal(40)
        d = _design(y, X)
        norms = []
        for lam in (0.01, 0.1, 1.0, 10.0, 100.0):
            fit = fit_predict(d, range(35), range(35, 40), kind="krr", ridge_lambda=lam)
            norms.append(np.linalg.norm(fit.parameters["alpha"]))
        assert all(a > b for a, b in zip(norms, norms[1:]))

    def test_interpolates_as_lambda_vanishes(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((25, 2))
        y = rng.standard_normal(25)
        d = _design(y, X)
        fit = fit_predict(d, range(20), range(20, 25), kind="krr",
                          ridge_lambda=1e-10, standardize=False)
        alpha = fit.parameters["alpha"]
        K = rbf_kernel(fit.parameters["train_inputs"], fit.parameters["train_inputs"],
                       fit.parameters["gamma"])
        np.testing.assert_allclose(K @ alpha, y[:20], atol=1e-4)

    def test_bad_lambda_fatal(self):
        d = _design([1.0, 2.0, 3.0], [[0.0], [1.0], [2.0]])
        with pytest.raises(InputError):
            fit_predict(d, [0, 1], [2], kind="krr", ridge_lambda=0.0)


class TestSplitsAndDeterminism:
    def test_empty_split_fatal(self):
        d = _design([1.0, 2.0, 3.0], [[0.0], [1.0], [2.0]])
        with pytest.raises(InputError):
            fit_predict(d, [], [2], kind="linear")

    def test_train_must_precede_test(self):
        d = _design([1.0, 2.0, 3.0], [[0.0], [1.0], [2.0]])
        with pytest.raises(InputError):
            fit_predict(d, [2], [0], kind="linear")

    def test_bit_identical_predictions(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((50, 3))
        y = rng.standard_normal(50)
        d = _design(y, X)
        for kind in ("linear", "krr"):
            a = fit_predict(d, range(40), range(40, 50), kind=kind)
            b = fit_predict(d, range(40), range(40, 50), kind=kind)
            assert np.array_equal(a.predictions, b.predictions)
