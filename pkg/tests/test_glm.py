"""Weighted logistic/multinomial fits against an independent optimizer."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from itrnma.errors import SingularDesignError
from itrnma.glm import (
    SeparationWarning,
    fit_weighted_logistic,
    fit_weighted_multinomial,
    predict_prob,
)


def _logistic_negll(beta, x, y, w):
    eta = x @ beta
    return -np.sum(w * (y * eta - np.logaddexp(0.0, eta)))


def _multinomial_negll(bflat, x, onehot, w, k, p):
    b = bflat.reshape(k - 1, p)
    eta = np.column_stack([np.zeros(x.shape[0]), x @ b.T])
    lse = np.logaddexp.reduce(eta, axis=1)
    return -np.sum(w * (np.sum(onehot * eta, axis=1) - lse))


def _logistic_fixture(seed, n=80, p=3):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    beta_true = rng.normal(scale=0.8, size=p)
    prob = 1 / (1 + np.exp(-(x @ beta_true)))
    y = (rng.uniform(size=n) < prob).astype(float)
    w = rng.gamma(2.0, 1.0, size=n)
    return x, y, w


def _multinomial_fixture(seed, n=150, p=3, k=3):
    rng = np.random.default_rng(seed)
    x = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    b_true = rng.normal(scale=0.6, size=(k - 1, p))
    eta = np.column_stack([np.zeros(n), x @ b_true.T])
    prob = np.exp(eta - eta.max(axis=1, keepdims=True))
    prob /= prob.sum(axis=1, keepdims=True)
    arm = 1 + np.array([rng.choice(k, p=prob[j]) for j in range(n)])
    arm[:k] = np.arange(1, k + 1)
    w = rng.gamma(2.0, 1.0, size=n)
    return x, arm, w


class TestLogisticOracle:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_independent_optimizer(self, seed):
        x, y, w = _logistic_fixture(seed)
        fit = fit_weighted_logistic(x, y, w)
        assert fit.converged
        res = minimize(
            _logistic_negll,
            np.zeros(x.shape[1]),
            args=(x, y, w),
            method="BFGS",
            options={"gtol": 1e-10, "maxiter": 500},
        )
        np.testing.assert_allclose(fit.coefficients, res.x, atol=1e-5)

    @pytest.mark.parametrize("seed", range(10))
    def test_score_equations_hold(self, seed):
        x, y, w = _logistic_fixture(seed)
        fit = fit_weighted_logistic(x, y, w)
        p = 1 / (1 + np.exp(-(x @ fit.coefficients)))
        score = x.T @ (w * (y - p))
        assert np.max(np.abs(score)) < 1e-6

    def test_zero_weight_rows_ignored(self):
        x, y, w = _logistic_fixture(42)
        fit_all = fit_weighted_logistic(x[:60], y[:60], w[:60])
        w2 = w.copy()
        w2[60:] = 0.0
        y2 = y.copy()
        y2[60:] = 1 - y2[60:]  # corrupt the zero-weight rows
        fit_masked = fit_weighted_logistic(x, y2, w2)
        np.testing.assert_allclose(fit_masked.coefficients, fit_all.coefficients, atol=1e-8)

    def test_separation_clamps_instead_of_failing(self):
        x = np.column_stack([np.ones(20), np.linspace(-2, 2, 20)])
        y = (x[:, 1] > 0).astype(float)
        with pytest.warns(SeparationWarning):
            fit = fit_weighted_logistic(x, y, np.ones(20))
        assert fit.separation
        assert np.max(np.abs(fit.coefficients)) <= 30.0 + 1e-12

    def test_rank_deficient_design_rejected(self):
        x = np.column_stack([np.ones(30), np.ones(30)])
        y = np.zeros(30)
        y[::2] = 1.0
        with pytest.raises(SingularDesignError):
            fit_weighted_logistic(x, y, np.ones(30))

    def test_negative_weights_rejected(self):
        x, y, w = _logistic_fixture(1)
        w[0] = -1.0
        with pytest.raises(ValueError):
            fit_weighted_logistic(x, y, w)


class TestMultinomialOracle:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_independent_optimizer(self, seed):
        x, arm, w = _multinomial_fixture(seed)
        k, p = 3, x.shape[1]
        fit = fit_weighted_multinomial(x, arm, w, n_categories=k)
        assert fit.converged
        onehot = np.zeros((x.shape[0], k))
        onehot[np.arange(x.shape[0]), arm - 1] = 1.0
        res = minimize(
            _multinomial_negll,
            np.zeros((k - 1) * p),
            args=(x, onehot, w, k, p),
            method="BFGS",
            options={"gtol": 1e-10, "maxiter": 1000},
        )
        np.testing.assert_allclose(fit.coefficients.reshape(-1), res.x, atol=1e-5)

    @pytest.mark.parametrize("seed", range(5))
    def test_score_equations_hold(self, seed):
        x, arm, w = _multinomial_fixture(seed)
        fit = fit_weighted_multinomial(x, arm, w, n_categories=3)
        probs = predict_prob(fit, x)
        onehot = np.zeros((x.shape[0], 3))
        onehot[np.arange(x.shape[0]), arm - 1] = 1.0
        score = x.T @ (w[:, None] * (onehot[:, 1:] - probs[:, 1:]))
        assert np.max(np.abs(score)) < 1e-6

    def test_two_categories_reduce_to_logistic(self):
        x, y, w = _logistic_fixture(5)
        arm = 1 + y.astype(int)
        mfit = fit_weighted_multinomial(x, arm, w, n_categories=2)
        lfit = fit_weighted_logistic(x, y, w)
        np.testing.assert_allclose(mfit.coefficients[0], lfit.coefficients, atol=1e-12)


class TestPredictProb:
    def test_rows_sum_to_one(self):
        x, arm, w = _multinomial_fixture(2)
        fit = fit_weighted_multinomial(x, arm, w, n_categories=3)
        probs = predict_prob(fit, x)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_target_vector_selects_received_category(self):
        x, arm, w = _multinomial_fixture(3)
        fit = fit_weighted_multinomial(x, arm, w, n_categories=3)
        probs = predict_prob(fit, x)
        received = predict_prob(fit, x, target=arm)
        np.testing.assert_array_equal(received, probs[np.arange(x.shape[0]), arm - 1])

    def test_probabilities_floored(self):
        x = np.column_stack([np.ones(20), np.linspace(-2, 2, 20)])
        y = (x[:, 1] > 0).astype(float)
        with pytest.warns(SeparationWarning):
            fit = fit_weighted_logistic(x, y, np.ones(20))
        probs = predict_prob(fit, np.array([[1.0, 100.0]]), target=2)
        assert probs[0] <= 1 - 1e-6
        probs = predict_prob(fit, np.array([[1.0, -100.0]]), target=2)
        assert probs[0] >= 1e-6

    @given(scale=st.floats(min_value=0.1, max_value=10.0), seed=st.integers(0, 100))
    @settings(max_examples=25, deadline=None)
    def test_weight_scaling_invariance(self, scale, seed):
        """Multiplying all observation weights by a constant leaves the MLE."""
        x, y, w = _logistic_fixture(seed, n=60)
        f1 = fit_weighted_logistic(x, y, w)
        f2 = fit_weighted_logistic(x, y, w * scale)
        np.testing.assert_allclose(f1.coefficients, f2.coefficients, atol=1e-6)
