"""Penalty functions: l1 with its prox, squared l2, exact and smoothed TV.

TV is written in dual form as ``max_{alpha in K} <alpha, A beta>`` with ``K``
the product of unit balls in R^3, one per voxel. Subtracting
``(mu / 2) ||alpha||^2`` inside the max gives a smooth surrogate whose
maximiser is the groupwise projection of ``A beta / mu`` onto ``K``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PenaltyWeights",
    "tv_exact",
    "project_dual",
    "tv_smoothed",
    "tv_smoothed_gradient",
    "tv_smoothed_lipschitz",
    "prox_l1",
    "l1_value",
    "l2_value_gradient",
]


@dataclass(frozen=True)
class PenaltyWeights:
    """Nonnegative penalty strengths ``(l2, l1, tv)``. Any of them may be zero."""

    l2: float = 0.0
    l1: float = 0.0
    tv: float = 0.0

    def __post_init__(self):
        for name in ("l2", "l1", "tv"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"penalty weight {name} must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)

    def as_dict(self):
        return {"l2": self.l2, "l1": self.l1, "tv": self.tv}


def _check_mu(mu):
    mu = float(mu)
    if not mu > 0:
        raise ValueError(f"smoothing parameter mu must be > 0, got {mu}")
    return mu


def _group_norms(v):
    return np.sqrt(np.einsum("ij,ij->i", v, v))


def tv_exact(op, beta):
    """Sum over voxels of the Euclidean norm of the forward-difference gradient."""
    grads = op.apply(beta).reshape(-1, 3)
    return float(_group_norms(grads).sum())


def project_dual(alpha):
    """Project each consecutive 3-vector of ``alpha`` onto the unit ball."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size % 3:
        raise ValueError("alpha length must be a multiple of 3")
    groups = alpha.reshape(-1, 3)
    norms = _group_norms(groups)
    scale = np.maximum(norms, 1.0)
    return (groups / scale[:, None]).ravel()


def _dual_maximiser(op, beta, mu):
    a = op.apply(beta)
    return a, project_dual(a / mu)


def tv_smoothed(op, beta, mu):
    """Smoothed TV: ``<alpha*, A beta> - (mu / 2) ||alpha*||^2``.

    Satisfies ``tv_smoothed <= tv_exact <= tv_smoothed + mu * p / 2``.
    """
    mu = _check_mu(mu)
    a, alpha = _dual_maximiser(op, beta, mu)
    return float(alpha @ a - 0.5 * mu * (alpha @ alpha))


def tv_smoothed_gradient(op, beta, mu):
    """Gradient ``A^T alpha*`` of the smoothed TV."""
    mu = _check_mu(mu)
    _, alpha = _dual_maximiser(op, beta, mu)
    return op.apply_transpose(alpha)


def tv_smoothed_value_gradient(op, beta, mu):
    """Value and gradient of the smoothed TV sharing one pass over ``A beta``."""
    mu = _check_mu(mu)
    a, alpha = _dual_maximiser(op, beta, mu)
    value = float(alpha @ a - 0.5 * mu * (alpha @ alpha))
    return value, op.apply_transpose(alpha)


def tv_smoothed_lipschitz(spectral_norm_A, mu):
    """Lipschitz constant ``||A||^2 / mu`` of the smoothed-TV gradient."""
    return float(spectral_norm_A) ** 2 / _check_mu(mu)


def prox_l1(x, threshold):
    """Soft-thresholding, the proximal operator of ``threshold * ||.||_1``.

    Coordinates with ``|x_j| <= threshold`` come out as exact zeros.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    x = np.asarray(x, dtype=float)
    if threshold == 0:
        return x.copy()
    out = np.abs(x) - threshold
    np.maximum(out, 0.0, out=out)
    # np.where keeps thresholded entries at +0.0 rather than -0.0
    return np.where(out > 0, np.copysign(out, x), 0.0)


def l1_value(beta):
    return float(np.abs(beta).sum())


def l2_value_gradient(beta, l2):
    """``l2 * ||beta||^2`` and its gradient ``2 * l2 * beta`` (no 1/2 factor)."""
    if l2 < 0:
        raise ValueError("l2 must be >= 0")
    beta = np.asarray(beta, dtype=float)
    return float(l2 * (beta @ beta)), 2.0 * l2 * beta
