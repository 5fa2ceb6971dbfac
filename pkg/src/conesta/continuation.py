"""CONESTA: FISTA restarted with a shrinking smoothing parameter.

Run ``i`` targets precision ``eps_i = 2 ** -(i - 1)`` and uses the smoothing
parameter ``mu_opt(eps_i)`` that minimises the worst-case number of FISTA
iterations needed to reach that precision on the unsmoothed objective. Each
run is warm-started from the previous solution.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import penalties
from .fista import FistaConfig, NonFiniteError, fista_run, fista_step_size, smoothed_objective
from .model import logistic_loss, smooth_part_lipschitz, spectral_norm_X

logger = logging.getLogger(__name__)

__all__ = [
    "RunRecord",
    "FitResult",
    "SolverError",
    "mu_opt",
    "init_beta",
    "objective_exact",
    "objective_smoothed",
    "conesta_fit",
    "precision_schedule",
]


class SolverError(RuntimeError):
    """An inner FISTA run failed; ``run_index`` is 1-based."""

    def __init__(self, run_index, message):
        self.run_index = run_index
        super().__init__(f"continuation run {run_index}: {message}")


@dataclass(frozen=True)
class RunRecord:
    eps: float | None
    mu: float | None
    step_size: float
    inner_iterations: int
    converged: bool
    final_objective_fmu: float
    final_objective_f: float


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    runs: tuple[RunRecord, ...]
    constants: dict
    weights: penalties.PenaltyWeights
    target_eps: float
    seed: int
    total_inner_iterations: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "total_inner_iterations", sum(r.inner_iterations for r in self.runs)
        )

    @property
    def eps_sequence(self):
        return [r.eps for r in self.runs]

    @property
    def mu_sequence(self):
        return [r.mu for r in self.runs]

    @property
    def objective(self):
        return self.runs[-1].final_objective_f


def precision_schedule(target_eps):
    """``eps_i = (1/2) ** (i - 1)`` for every ``i`` with ``eps_i >= target_eps``."""
    if not target_eps > 0:
        raise ValueError("target_eps must be > 0")
    out = []
    i = 1
    while True:
        eps = 0.5 ** (i - 1)
        if eps < target_eps:
            return out
        out.append(eps)
        i += 1


def mu_opt(eps, tv_weight, spectral_norm_A, L0, p):
    """Smoothing parameter minimising the worst-case iteration count for precision ``eps``.

    With ``M = p / 2`` and ``a = ||A||^2``::

        mu = -tv * a / L0 + sqrt((tv * M * a) ** 2 + eps * M * L0 * a) / (M * L0)
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if tv_weight < 0:
        raise ValueError("tv_weight must be >= 0")
    if not L0 > 0:
        raise ValueError("L0 must be > 0")
    if p < 1:
        raise ValueError("p must be >= 1")
    a = float(spectral_norm_A) ** 2
    if a == 0:
        if tv_weight > 0:
            raise ValueError("TV penalty is active but the difference operator is zero")
        raise ValueError("mu_opt is undefined for a zero operator")
    M = p / 2.0
    first = tv_weight * a / L0
    q = eps * a / (M * L0)
    # sqrt(first**2 + q) - first, rationalised to avoid cancellation for small eps
    mu = q / (math.sqrt(first * first + q) + first)
    return mu


def init_beta(p, mode="random_unit", seed=42):
    """Starting vector: zeros, or a seeded Gaussian draw rescaled to unit norm."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if mode == "zeros":
        return np.zeros(p)
    if mode == "random_unit":
        v = np.random.default_rng(seed).standard_normal(p)
        return v / np.linalg.norm(v)
    raise ValueError(f"unknown init mode {mode!r}")


def objective_exact(data, op, weights, beta):
    """``loss + l2 ||beta||^2 + l1 ||beta||_1 + tv TV(beta)``."""
    value = logistic_loss(data, beta)
    value += penalties.l2_value_gradient(beta, weights.l2)[0]
    value += weights.l1 * penalties.l1_value(beta)
    if weights.tv > 0:
        value += weights.tv * penalties.tv_exact(op, beta)
    return value


def objective_smoothed(data, op, weights, beta, mu):
    """Same as :func:`objective_exact` with TV replaced by its smoothed version."""
    return smoothed_objective(data, op, weights, np.asarray(beta, dtype=float), mu)


def conesta_fit(
    data,
    op,
    weights,
    beta0=None,
    target_eps=1e-6,
    inner_cfg: FistaConfig | None = None,
    seed=42,
    init="random_unit",
    norm_tol=1e-6,
    callback=None,
) -> FitResult:
    """Fit by continuation over the smoothing parameter.

    ``beta0`` defaults to :func:`init_beta` with ``init`` and ``seed``;
    ``seed`` also seeds the power iterations for ``||X||`` and ``||A||``.
    ``inner_cfg`` supplies ``max_iter``, ``tol`` and ``record_trace`` for
    every run; its ``step_size`` is ignored and recomputed per run.

    When ``weights.tv == 0`` no smoothing is involved and a single FISTA
    run is made (its record carries ``eps = mu = None``).

    ``callback(k, beta)`` receives the cumulative inner-iteration count.
    """
    if inner_cfg is None:
        inner_cfg = FistaConfig()
    if beta0 is None:
        beta0 = init_beta(data.p, init, seed)
    beta = np.asarray(beta0, dtype=float).copy()
    if beta.shape != (data.p,):
        raise ValueError(f"beta0 must have length {data.p}, got shape {beta.shape}")
    if weights.tv > 0:
        if op is None:
            raise ValueError("a gradient operator is required when tv > 0")
        if op.p != data.p:
            raise ValueError(f"operator acts on {op.p} voxels but data has {data.p} features")
    schedule = precision_schedule(target_eps)

    norm_X = spectral_norm_X(data.X, tol=norm_tol, seed=seed)
    L0 = smooth_part_lipschitz(data, weights.l2, norm_X)
    norm_A = float(op.spectral_norm) if op is not None else 0.0
    constants = {"L0": L0, "norm_A": norm_A, "norm_X": norm_X}
    logger.info("L0=%.6g ||A||=%.6g ||X||=%.6g", L0, norm_A, norm_X)

    done = 0
    runs = []

    def run(index, eps, mu):
        nonlocal beta, done
        inner_cb = None
        if callback is not None:
            offset = done

            def inner_cb(k, b):
                callback(offset + k, b)

        try:
            step = fista_step_size(L0, weights, norm_A, mu)
            cfg = dataclasses.replace(inner_cfg, step_size=step)
            res = fista_run(data, op, weights, mu, beta, cfg, callback=inner_cb)
        except (NonFiniteError, FloatingPointError, ValueError) as exc:
            raise SolverError(index, str(exc)) from exc
        beta = res.beta
        done += res.iterations
        fmu = objective_smoothed(data, op, weights, beta, mu)
        f = objective_exact(data, op, weights, beta)
        logger.info(
            "run %d: eps=%s mu=%s iterations=%d f=%.12g", index, eps, mu, res.iterations, f
        )
        runs.append(RunRecord(eps, mu, step, res.iterations, res.converged, fmu, f))

    if weights.tv == 0:
        run(1, None, None)
    else:
        for i, eps in enumerate(schedule, start=1):
            run(i, eps, mu_opt(eps, weights.tv, norm_A, L0, op.n_groups))
    return FitResult(
        beta=beta,
        runs=tuple(runs),
        constants=constants,
        weights=weights,
        target_eps=float(target_eps),
        seed=int(seed),
    )
