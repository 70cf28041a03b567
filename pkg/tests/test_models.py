"""Tests for the built-in plug-in score estimators."""

import numpy as np
import pytest

from indecide.experiments import _draw_mixture, oracle_eta
from indecide.models import (
    LdaModel,
    LogisticModel,
    fit_lda,
    fit_logistic,
    predict_eta,
    predict_scores,
)
from indecide.numerics import seeded_stream


class TestLda:
    def test_recovers_mixture_means(self):
        rng = seeded_stream(41, 0)
        x, y = _draw_mixture(rng, 50_000, 1.0)
        model = fit_lda(x, y)
        assert model.class_means[0, 0] == pytest.approx(1.0, abs=0.05)
        assert model.class_means[1, 0] == pytest.approx(-1.0, abs=0.05)
        assert model.pooled_covariance[0, 0] == pytest.approx(1.0, abs=0.05)
        assert model.priors[0] == pytest.approx(0.5, abs=0.02)

    def test_posterior_matches_closed_form(self):
        rng = seeded_stream(41, 1)
        x, y = _draw_mixture(rng, 100_000, 1.0)
        model = fit_lda(x, y)
        grid = np.linspace(-4.0, 4.0, 401)
        fitted = predict_eta(model, grid)
        exact = oracle_eta(grid, 1.0)
        assert np.abs(fitted - exact).max() <= 0.02

    def test_posterior_monotone_for_1d(self):
        rng = seeded_stream(41, 2)
        x, y = _draw_mixture(rng, 2_000, 1.0)
        model = fit_lda(x, y)
        vals = predict_eta(model, np.linspace(-5, 5, 100))
        assert (np.diff(vals) >= -1e-12).all()

    def test_predict_scores_rows_sum_to_one(self):
        rng = seeded_stream(41, 3)
        x = np.concatenate(
            [rng.normal(-2, 1, 100), rng.normal(0, 1, 100), rng.normal(2, 1, 100)]
        )
        y = np.repeat([1, 2, 3], 100)
        model = fit_lda(x, y)
        scores = predict_scores(model, np.linspace(-3, 3, 50))
        assert scores.shape == (50, 3)
        assert np.allclose(scores.sum(axis=1), 1.0, atol=1e-12)
        assert (scores >= 0).all()

    def test_label_preconditions(self):
        x = np.arange(10.0)
        with pytest.raises(ValueError):
            fit_lda(x, np.ones(10, dtype=int))  # one class
        with pytest.raises(ValueError):
            fit_lda(x, np.array([1, 1, 1, 1, 1, 3, 3, 3, 3, 3]))  # gap in labels
        with pytest.raises(ValueError):
            fit_lda(x, np.array([1, 1, 1, 1, 1, 1, 1, 1, 1, 2]))  # class 2 has 1 point

    def test_singular_covariance_ridged(self):
        x = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
        y = np.array([1, 1, 1, 2, 2, 2])
        with pytest.warns(UserWarning):
            model = fit_lda(x, y)
        assert np.linalg.eigvalsh(model.pooled_covariance).min() > 0

    def test_model_validation(self):
        with pytest.raises(ValueError):
            LdaModel(
                class_means=np.array([[0.0], [1.0]]),
                pooled_covariance=np.array([[1.0]]),
                priors=np.array([0.7, 0.7]),
            )
        with pytest.raises(ValueError):
            LdaModel(
                class_means=np.array([[0.0], [1.0]]),
                pooled_covariance=np.array([[-1.0]]),
                priors=np.array([0.5, 0.5]),
            )


class TestLogistic:
    def test_recovers_known_coefficients(self):
        rng = seeded_stream(42, 0)
        n = 40_000
        x = rng.normal(0.0, 2.0, n)
        eta = 1.0 / (1.0 + np.exp(-(1.5 * x - 0.5)))
        y = np.where(rng.random(n) < eta, 1, 2)
        model = fit_logistic(x, y)
        assert model.converged
        assert model.weights[0] == pytest.approx(1.5, abs=0.1)
        assert model.bias == pytest.approx(-0.5, abs=0.1)

    def test_predictions_in_range(self):
        rng = seeded_stream(42, 1)
        x, y = _draw_mixture(rng, 500, 1.0)
        model = fit_logistic(x, y)
        eta = predict_eta(model, np.linspace(-100, 100, 50))
        assert ((eta >= 0) & (eta <= 1)).all()

    def test_iteration_budget_returns_partial_model(self):
        rng = seeded_stream(42, 2)
        x, y = _draw_mixture(rng, 500, 1.0)
        model = fit_logistic(x, y, max_iter=1)
        assert not model.converged
        assert model.iterations == 1

    def test_label_preconditions(self):
        x = np.arange(6.0)
        with pytest.raises(ValueError):
            fit_logistic(x, np.array([1, 1, 1, 1, 1, 1]))
        with pytest.raises(ValueError):
            fit_logistic(x, np.array([0, 0, 0, 1, 1, 1]))

    def test_model_validation(self):
        with pytest.raises(ValueError):
            LogisticModel(
                weights=np.array([np.inf]), bias=0.0, converged=True, iterations=1
            )


class TestPredictEta:
    def test_feature_dimension_checked(self):
        rng = seeded_stream(43, 0)
        x, y = _draw_mixture(rng, 200, 1.0)
        model = fit_lda(x, y)
        with pytest.raises(ValueError):
            predict_eta(model, np.zeros((5, 2)))

    def test_unsupported_model(self):
        with pytest.raises(TypeError):
            predict_eta(object(), np.zeros(3))

    def test_empty_feature_dim(self):
        with pytest.raises(ValueError):
            fit_lda(np.zeros((4, 0)), np.array([1, 1, 2, 2]))
