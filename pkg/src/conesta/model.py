"""Logistic regression without intercept: the smooth data-fit term."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .grid import power_iteration

__all__ = [
    "Dataset",
    "predict_proba",
    "logistic_loss_value_gradient",
    "smooth_part_lipschitz",
    "spectral_norm_X",
]


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (n x p) and binary labels ``y``."""

    X: np.ndarray
    y: np.ndarray
    label_name: str = "y"

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.asarray(self.y)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"X must be a non-empty 2D array, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise ValueError(f"y must have shape ({X.shape[0]},), got {y.shape}")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.uint8))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.y[rows], self.label_name)


def _check_beta(X, beta):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.shape[1],):
        raise ValueError(f"beta must have length {X.shape[1]}, got shape {beta.shape}")
    return beta


def predict_proba(X, beta):
    """``P(y = 1 | x) = 1 / (1 + exp(-x^T beta))`` for each row of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2D")
    return expit(X @ _check_beta(X, beta))


def _log1pexp(m):
    # log(1 + exp(m)) without overflow for large |m|
    return np.maximum(m, 0.0) + np.log1p(np.exp(-np.abs(m)))


def logistic_loss_value_gradient(data: Dataset, beta):
    """Mean negative log-likelihood and its gradient.

    value = mean(log(1 + exp(X beta)) - y * X beta)
    grad  = X^T (sigmoid(X beta) - y) / n
    """
    beta = _check_beta(data.X, beta)
    margin = data.X @ beta
    value = float(np.mean(_log1pexp(margin) - data.y * margin))
    grad = data.X.T @ (expit(margin) - data.y) / data.n
    return value, grad


def logistic_loss(data: Dataset, beta):
    beta = _check_beta(data.X, beta)
    margin = data.X @ beta
    return float(np.mean(_log1pexp(margin) - data.y * margin))


def spectral_norm_X(X, tol=1e-6, max_iter=10000, seed=42):
    return power_iteration(np.asarray(X, dtype=float), tol=tol, max_iter=max_iter, seed=seed)


def smooth_part_lipschitz(data: Dataset, l2, spectral_norm_X):
    """Lipschitz constant of the gradient of ``loss + l2 ||beta||^2``.

    The logistic Hessian is bounded by ``X^T X / (4 n)``, hence
    ``L0 = 2 * l2 + ||X||_2^2 / (4 n)``.
    """
    return 2.0 * float(l2) + float(spectral_norm_X) ** 2 / (4.0 * data.n)
