"""OLS solving, the MSE gradient, SGD training dynamics, prediction."""
from __future__ import annotations

import numpy as np
import pytest

from yieldcast.core import fit_scaler
from yieldcast.errors import (
    ConstantFeature,
    Diverged,
    InsufficientRows,
    InvalidData,
    ShapeError,
)
from yieldcast.linear import (
    LinearModel,
    SgdConfig,
    effective_parameters,
    fit_ols,
    fit_sgd,
    mse_gradient,
    predict_linear,
)


def noiseless(seed=0, n=50, p=3):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, p))
    beta = rng.normal(scale=2.0, size=p)
    intercept = float(rng.normal())
    return x, x @ beta + intercept, beta, intercept


class TestFitOls:
    def test_recovers_noiseless_parameters(self):
        x, y, beta, intercept = noiseless()
        m = fit_ols(x, y, feature_names=("a", "b", "c"))
        np.testing.assert_allclose(m.coefficients, beta, atol=1e-10)
        assert m.intercept == pytest.approx(intercept, abs=1e-10)
        assert m.metadata == {"solver": "lstsq", "rank_deficient": False}
        assert m.feature_names == ("a", "b", "c")
        assert m.scaler is None

    def test_requires_more_rows_than_columns(self):
        with pytest.raises(InsufficientRows):
            fit_ols(np.eye(3), np.ones(3))

    def test_rank_deficient_falls_back_to_jitter(self):
        x, y, _, _ = noiseless(n=30, p=2)
        xdup = np.column_stack([x, x[:, 0]])
        m = fit_ols(xdup, y)
        assert m.metadata == {"solver": "ridge_jitter", "rank_deficient": True}
        np.testing.assert_allclose(predict_linear(m, xdup), y, atol=1e-3)

    def test_rejects_nonfinite(self):
        x, y, _, _ = noiseless()
        y = y.copy()
        y[0] = np.inf
        with pytest.raises(InvalidData):
            fit_ols(x, y)

    def test_shape_validation(self):
        with pytest.raises(ShapeError):
            fit_ols(np.ones(5), np.ones(5))
        with pytest.raises(ShapeError):
            fit_ols(np.ones((5, 2)), np.ones(4))


class TestMseGradient:
    def test_hand_oracle_single_point(self):
        # x=[[1]], y=[2], beta=0, b=0: err=-2, grad = ((2/1)*1*-2, (2/1)*-2)
        grad_beta, grad_b = mse_gradient(np.zeros(1), 0.0, np.array([[1.0]]),
                                         np.array([2.0]))
        assert grad_beta[0] == -4.0 and grad_b == -4.0

    def test_hand_oracle_with_l2(self):
        # err = 1*1 + 0 - 2 = -1; grad_beta = 2*1*(-1) + 2*0.5*1 = -1
        grad_beta, grad_b = mse_gradient(np.array([1.0]), 0.0, np.array([[1.0]]),
                                         np.array([2.0]), l2=0.5)
        assert grad_beta[0] == -1.0 and grad_b == -2.0

    def test_zero_at_ols_solution(self):
        x, y, _, _ = noiseless()
        m = fit_ols(x, y)
        grad_beta, grad_b = mse_gradient(m.coefficients, m.intercept, x, y)
        np.testing.assert_allclose(grad_beta, 0.0, atol=1e-9)
        assert grad_b == pytest.approx(0.0, abs=1e-9)

    def test_matches_central_differences(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(20, 3))
        y = rng.normal(size=20)

        def loss(beta, b, l2):
            return float(np.mean((x @ beta + b - y) ** 2) + l2 * np.sum(beta**2))

        h = 1e-6
        for _ in range(20):
            beta = rng.normal(size=3)
            b = float(rng.normal())
            l2 = float(rng.uniform(0.0, 0.5))
            grad_beta, grad_b = mse_gradient(beta, b, x, y, l2=l2)
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                numeric = (loss(beta + e, b, l2) - loss(beta - e, b, l2)) / (2 * h)
                assert grad_beta[j] == pytest.approx(numeric, rel=1e-6, abs=1e-8)
            numeric_b = (loss(beta, b + h, l2) - loss(beta, b - h, l2)) / (2 * h)
            assert grad_b == pytest.approx(numeric_b, rel=1e-6, abs=1e-8)

    def test_beta_shape_checked(self):
        with pytest.raises(ShapeError):
            mse_gradient(np.zeros(2), 0.0, np.ones((4, 3)), np.ones(4))


class TestFitSgd:
    def test_approaches_ols_on_easy_problem(self):
        x, y, _, _ = noiseless(seed=3, n=60, p=2)
        sgd = fit_sgd(x, y, SgdConfig(epochs=400, seed=1))
        ols = fit_ols(x, y)
        c_sgd, b_sgd = effective_parameters(sgd)
        c_ols, b_ols = effective_parameters(ols)
        np.testing.assert_allclose(c_sgd, c_ols, atol=5e-2)
        assert b_sgd == pytest.approx(b_ols, abs=5e-2)

    def test_checkpoints_every_100_epochs_and_final(self):
        x, y, _, _ = noiseless(n=25, p=2)
        m = fit_sgd(x, y, SgdConfig(epochs=250))
        epochs = [e for e, _ in m.metadata["loss_checkpoints"]]
        assert epochs == [100, 200, 250]
        assert m.metadata["final_train_mse"] == m.metadata["loss_checkpoints"][-1][1]
        assert m.metadata["config"]["epochs"] == 250

    def test_deterministic_per_seed(self):
        x, y, _, _ = noiseless(n=30)
        a = fit_sgd(x, y, SgdConfig(epochs=50, seed=5))
        b = fit_sgd(x, y, SgdConfig(epochs=50, seed=5))
        np.testing.assert_array_equal(a.coefficients, b.coefficients)
        c = fit_sgd(x, y, SgdConfig(epochs=50, seed=6))
        assert not np.array_equal(a.coefficients, c.coefficients)

    def test_shuffle_off_is_sequential_and_stable(self):
        x, y, _, _ = noiseless(n=30)
        a = fit_sgd(x, y, SgdConfig(epochs=50, shuffle=False))
        b = fit_sgd(x, y, SgdConfig(epochs=50, shuffle=False, seed=99))
        np.testing.assert_array_equal(a.coefficients, b.coefficients)

    def test_huge_learning_rate_diverges_with_epoch(self):
        x, y, _, _ = noiseless(n=40)
        with pytest.raises(Diverged) as excinfo:
            fit_sgd(x, y, SgdConfig(learning_rate=5.0, epochs=50))
        assert excinfo.value.epoch >= 1

    def test_onehot_columns_need_passthrough(self):
        x = np.column_stack([np.arange(10.0), np.ones(10)])
        y = np.arange(10.0)
        with pytest.raises(ConstantFeature):
            fit_sgd(x, y, SgdConfig(epochs=5))
        m = fit_sgd(x, y, SgdConfig(epochs=5), passthrough=[False, True])
        assert m.scaler.passthrough == (False, True)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SgdConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            SgdConfig(epochs=0)
        with pytest.raises(ValueError):
            SgdConfig(l2=-0.1)


class TestPredictAndParameters:
    def test_effective_parameters_fold_scaler_in(self):
        x, y, _, _ = noiseless(n=40)
        m = fit_sgd(x, y, SgdConfig(epochs=100))
        coef, intercept = effective_parameters(m)
        np.testing.assert_allclose(predict_linear(m, x), x @ coef + intercept,
                                   rtol=1e-10, atol=1e-10)

    def test_effective_parameters_identity_without_scaler(self):
        m = LinearModel(coefficients=np.array([2.0]), intercept=1.0)
        coef, intercept = effective_parameters(m)
        assert coef[0] == 2.0 and intercept == 1.0

    def test_predict_checks_width(self):
        m = LinearModel(coefficients=np.array([1.0, 2.0]), intercept=0.0)
        with pytest.raises(ShapeError):
            predict_linear(m, np.ones((3, 3)))

    def test_model_validation(self):
        with pytest.raises(ValueError):
            LinearModel(coefficients=np.array([np.nan]), intercept=0.0)
        with pytest.raises(ValueError):
            LinearModel(coefficients=np.array([1.0]), intercept=0.0,
                        feature_names=("a", "b"))

    def test_scaled_and_unscaled_agree_on_training_fit(self):
        x, y, beta, intercept = noiseless(seed=9, n=200, p=2)
        sgd = fit_sgd(x, y, SgdConfig(epochs=300, seed=2))
        coef, b = effective_parameters(sgd)
        np.testing.assert_allclose(coef, beta, atol=5e-2)
        assert b == pytest.approx(intercept, abs=5e-2)
