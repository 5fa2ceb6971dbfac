"""FISTA for the smoothed problem at a fixed smoothing parameter.

Minimises ``f_mu(beta) = loss(beta) + l2 ||beta||^2 + tv * TV_mu(beta)
+ l1 ||beta||_1``: everything but the l1 term is differentiable, and the l1
term is handled exactly by soft-thresholding.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import penalties
from .model import logistic_loss_value_gradient

logger = logging.getLogger(__name__)

__all__ = ["FistaConfig", "FistaResult", "NonFiniteError", "fista_run", "fista_step_size",
           "smoothed_objective"]


class NonFiniteError(FloatingPointError):
    """The iterates or the objective became NaN or infinite."""

    def __init__(self, iteration, message=None):
        self.iteration = iteration
        super().__init__(message or f"non-finite objective at iteration {iteration}")


@dataclass(frozen=True)
class FistaConfig:
    """Inner-solver settings.

    ``step_size`` must not exceed the inverse Lipschitz constant of the smooth
    part (see :func:`fista_step_size`). It may be left as None when the
    config is handed to :func:`conesta.continuation.conesta_fit`, which
    fills it in for every continuation run.
    """

    step_size: float | None = None
    max_iter: int = 10000
    tol: float = 1e-6
    record_trace: bool = False

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol >= 0:
            raise ValueError("tol must be >= 0")


@dataclass
class FistaResult:
    beta: np.ndarray
    iterations: int
    converged: bool
    objective_trace: list[float] | None = field(default=None)


def fista_step_size(L0, weights, spectral_norm_A, mu):
    """Inverse Lipschitz constant of the smooth part: ``1 / (L0 + tv ||A||^2 / mu)``."""
    if mu is None or weights.tv == 0:
        lipschitz = float(L0)
    else:
        lipschitz = float(L0) + weights.tv * penalties.tv_smoothed_lipschitz(spectral_norm_A, mu)
    if not lipschitz > 0:
        raise ValueError("unregularized smooth part has unknown curvature")
    return 1.0 / lipschitz


def _smooth_value_gradient(data, op, weights, mu):
    tv_active = weights.tv > 0

    def value_gradient(beta):
        value, grad = logistic_loss_value_gradient(data, beta)
        if weights.l2 > 0:
            v2, g2 = penalties.l2_value_gradient(beta, weights.l2)
            value += v2
            grad += g2
        if tv_active:
            vtv, gtv = penalties.tv_smoothed_value_gradient(op, beta, mu)
            value += weights.tv * vtv
            grad += weights.tv * gtv
        return value, grad

    return value_gradient


def smoothed_objective(data, op, weights, beta, mu):
    """``f_mu``; equal to the exact objective when the TV weight is zero."""
    value, _ = _smooth_value_gradient(data, op, weights, mu)(beta)
    return value + weights.l1 * penalties.l1_value(beta)


def fista_run(data, op, weights, mu, beta0, cfg: FistaConfig, callback=None) -> FistaResult:
    """Run FISTA with a constant step from ``beta0``.

    Momentum follows Beck and Teboulle: ``tau_1 = 1``,
    ``tau_{k+1} = (1 + sqrt(1 + 4 tau_k^2)) / 2``. Stops when
    ``||beta_k - beta_{k-1}|| / step <= tol`` or after ``max_iter`` iterations.
    ``tol = 0`` disables the first test, so exactly ``max_iter`` iterations run.
    ``mu`` and ``op`` are ignored (and may be None) when ``weights.tv == 0``.

    ``callback(k, beta_k)``, if given, is called after every iteration.
    """
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.shape != (data.p,):
        raise ValueError(f"beta0 must have length {data.p}, got shape {beta0.shape}")
    if weights.tv > 0:
        if op is None or mu is None:
            raise ValueError("a gradient operator and mu are required when tv > 0")
        if op.p != data.p:
            raise ValueError(f"operator acts on {op.p} voxels but data has {data.p} features")
        mu = penalties._check_mu(mu)
    if cfg.step_size is None:
        raise ValueError("FistaConfig.step_size is required to run FISTA directly")
    value_gradient = _smooth_value_gradient(data, op, weights, mu)
    t = float(cfg.step_size)
    threshold = t * weights.l1

    beta_prev = beta0.copy()
    beta = beta0.copy()
    tau = 1.0
    trace = [] if cfg.record_trace else None
    converged = False
    k = 0
    for k in range(1, int(cfg.max_iter) + 1):
        tau_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tau * tau))
        z = beta + ((tau - 1.0) / tau_next) * (beta - beta_prev)
        _, grad = value_gradient(z)
        beta_prev = beta
        beta = penalties.prox_l1(z - t * grad, threshold)
        tau = tau_next
        if not np.all(np.isfinite(beta)):
            raise NonFiniteError(k)
        if trace is not None:
            value = value_gradient(beta)[0] + weights.l1 * penalties.l1_value(beta)
            if not np.isfinite(value):
                raise NonFiniteError(k)
            trace.append(value)
        if callback is not None:
            callback(k, beta)
        if cfg.tol > 0 and np.linalg.norm(beta - beta_prev) / t <= cfg.tol:
            converged = True
            break
    logger.debug("FISTA stopped after %d iterations (converged=%s)", k, converged)
    return FistaResult(beta=beta, iterations=k, converged=converged, objective_trace=trace)
