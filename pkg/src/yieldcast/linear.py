"""Ordinary least squares and stochastic-gradient-descent linear regressors.

OLS is solved through an orthogonal factorization of the intercept-augmented
design matrix; exactly collinear designs (one-hot blocks plus intercept) fall
back to a ridge-jittered normal-equations solve, flagged on the model. SGD
standardizes features internally so a constant learning rate stays stable,
and folds the scaler back in at predict time.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Scaler, apply_scaler, fit_scaler
from .errors import Diverged, InsufficientRows, InvalidData, ShapeError


@dataclass(frozen=True)
class LinearModel:
    """Affine predictor yhat = intercept + x @ coefficients.

    When a scaler is present, inputs are standardized before the dot product,
    so the model still maps raw feature space.
    """

    coefficients: np.ndarray
    intercept: float
    scaler: Optional[Scaler] = None
    feature_names: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.coefficients).all() and np.isfinite(self.intercept)):
            raise ValueError("non-finite model parameters")
        if self.feature_names and len(self.feature_names) != len(self.coefficients):
            raise ValueError("feature name count != coefficient count")


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float = 1e-3
    epochs: int = 1000
    l2: float = 1e-4
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs <= 0:
            raise ValueError("epochs must be > 0")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


def _check_xy(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"x must be 2-d, got shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise ShapeError(f"y shape {y.shape} does not match x rows {x.shape[0]}")
    return x, y


def fit_ols(
    x: np.ndarray, y: np.ndarray, feature_names: Sequence[str] = ()
) -> LinearModel:
    """Least-squares fit of y on x with an intercept.

    Rank-deficient designs are retried once with 1e-8 ridge jitter on the
    normal-equations diagonal; the model's metadata records the fallback.
    """
    x, y = _check_xy(x, y)
    n, p = x.shape
    if n <= p:
        raise InsufficientRows(f"need n > p for OLS, got n={n}, p={p}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise InvalidData("non-finite values in OLS input")

    a = np.column_stack([x, np.ones(n)])
    beta, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    metadata = {"solver": "lstsq", "rank_deficient": False}
    if rank < p + 1:
        ata = a.T @ a + 1e-8 * np.eye(p + 1)
        beta = np.linalg.solve(ata, a.T @ y)
        metadata = {"solver": "ridge_jitter", "rank_deficient": True}
    return LinearModel(
        coefficients=beta[:p],
        intercept=float(beta[p]),
        feature_names=tuple(feature_names),
        metadata=metadata,
    )


def mse_gradient(
    beta: np.ndarray,
    intercept: float,
    x: np.ndarray,
    y: np.ndarray,
    l2: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Gradient of (1/n) * sum((yhat - y)^2) + l2 * ||beta||^2.

    Returns (grad_beta, grad_intercept); the penalty never touches the
    intercept.
    """
    x, y = _check_xy(x, y)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (x.shape[1],):
        raise ShapeError(f"beta shape {beta.shape} does not match {x.shape[1]} columns")
    n = x.shape[0]
    err = x @ beta + intercept - y
    grad_beta = (2.0 / n) * (x.T @ err) + 2.0 * l2 * beta
    grad_intercept = float((2.0 / n) * err.sum())
    return grad_beta, grad_intercept


def fit_sgd(
    x: np.ndarray,
    y: np.ndarray,
    cfg: SgdConfig = SgdConfig(),
    passthrough: Optional[Sequence[bool]] = None,
    feature_names: Sequence[str] = (),
) -> LinearModel:
    """Per-sample gradient descent on squared error with L2 on the weights.

    Features are standardized internally (one-hot columns passed through);
    the fitted model carries the scaler so it predicts from raw inputs. Full
    training MSE is checkpointed every 100 epochs and at the final epoch.
    Raises Diverged, naming the epoch, if any parameter leaves the floats.
    """
    x, y = _check_xy(x, y)
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise InvalidData("non-finite values in SGD input")
    n, p = x.shape
    scaler = fit_scaler(x, passthrough=passthrough)
    z = apply_scaler(scaler, x)

    rng = np.random.default_rng(cfg.seed)
    beta = np.zeros(p)
    intercept = 0.0
    checkpoints: list[tuple[int, float]] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(n) if cfg.shuffle else np.arange(n)
            for i in order:
                row = z[i]
                err = row @ beta + intercept - y[i]
                beta -= cfg.learning_rate * (2.0 * err * row + 2.0 * cfg.l2 * beta)
                intercept -= cfg.learning_rate * 2.0 * err
            if not (np.isfinite(beta).all() and np.isfinite(intercept)):
                raise Diverged(epoch)
            if epoch % 100 == 0 or epoch == cfg.epochs:
                mse = float(np.mean((z @ beta + intercept - y) ** 2))
                checkpoints.append((epoch, mse))

    return LinearModel(
        coefficients=beta,
        intercept=float(intercept),
        scaler=scaler,
        feature_names=tuple(feature_names),
        metadata={
            "config": {
                "learning_rate": cfg.learning_rate,
                "epochs": cfg.epochs,
                "l2": cfg.l2,
                "seed": cfg.seed,
                "shuffle": cfg.shuffle,
            },
            "loss_checkpoints": checkpoints,
            "final_train_mse": checkpoints[-1][1],
        },
    )


def effective_parameters(m: LinearModel) -> tuple[np.ndarray, float]:
    """Coefficients and intercept in raw feature space.

    Folds any attached scaler into the parameters: predict_linear(m, x)
    equals x @ coef + intercept for the returned pair.
    """
    if m.scaler is None:
        return m.coefficients.copy(), m.intercept
    coef = m.coefficients / m.scaler.stds
    intercept = m.intercept - float(np.sum(coef * m.scaler.means))
    return coef, intercept


def predict_linear(m: LinearModel, x: np.ndarray) -> np.ndarray:
    """Affine prediction; applies the fit-time scaler when one is present."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != len(m.coefficients):
        raise ShapeError(
            f"expected {len(m.coefficients)} columns, got shape {x.shape}"
        )
    z = apply_scaler(m.scaler, x) if m.scaler is not None else x
    return z @ m.coefficients + m.intercept


__all__ = [
    "LinearModel",
    "SgdConfig",
    "fit_ols",
    "mse_gradient",
    "fit_sgd",
    "effective_parameters",
    "predict_linear",
]
