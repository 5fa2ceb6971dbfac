"""Self-check suites run by ``conesta check``.

Each suite returns a list of :class:`Check` rows; a suite passes when every
row does.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import penalties, reference
from .continuation import conesta_fit, objective_exact
from .fista import FistaConfig
from .grid import MaskedVolume, build_operator
from .model import Dataset, logistic_loss_value_gradient
from .penalties import PenaltyWeights

SUITES = ("gradients", "bounds", "oracles")


@dataclass(frozen=True)
class Check:
    name: str
    tolerance: float
    observed: float
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: observed {self.observed:.3e} (tolerance {self.tolerance:.1e})"


def _random_volume(rng, max_side=4, full=False):
    dims = tuple(int(d) for d in rng.integers(1, max_side + 1, size=3))
    if full:
        return MaskedVolume.full(dims)
    mask = rng.random(dims) < 0.8
    if not mask.any():
        mask.flat[0] = True
    return MaskedVolume(dims, mask)


def random_problem(rng, dims=(3, 3, 3), n=30, weights=(0.05, 0.02, 0.05), signal=1.0):
    """A small logistic problem whose labels depend on the first third of the voxels."""
    vol = MaskedVolume.full(dims)
    op = build_operator(vol)
    p = vol.p
    X = rng.standard_normal((n, p))
    beta_true = np.zeros(p)
    beta_true[: max(1, p // 3)] = signal
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-X @ beta_true))).astype(np.uint8)
    return Dataset(X, y), op, PenaltyWeights(*weights)


def _rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def gradient_suite(seed=0, n_instances=20, tol=1e-5):
    rng = np.random.default_rng(seed)
    worst_tv = worst_loss = 0.0
    for _ in range(n_instances):
        vol = _random_volume(rng)
        op = build_operator(vol)
        beta = rng.standard_normal(vol.p)
        mu = float(10 ** rng.uniform(-1, 0))
        fd = reference.central_difference_gradient(lambda b: penalties.tv_smoothed(op, b, mu), beta)
        worst_tv = max(worst_tv, _rel_err(penalties.tv_smoothed_gradient(op, beta, mu), fd))
        n = int(rng.integers(2, 20))
        data = Dataset(rng.standard_normal((n, vol.p)), rng.integers(0, 2, n))
        fd = reference.central_difference_gradient(
            lambda b: logistic_loss_value_gradient(data, b)[0], beta)
        worst_loss = max(worst_loss, _rel_err(logistic_loss_value_gradient(data, beta)[1], fd))
    return [
        Check("smoothed TV gradient vs central differences", tol, worst_tv, worst_tv <= tol),
        Check("logistic gradient vs central differences", tol, worst_loss, worst_loss <= tol),
    ]


def bounds_suite(seed=0, n_draws=100):
    rng = np.random.default_rng(seed)
    worst_low = worst_high = -np.inf
    for _ in range(n_draws):
        vol = _random_volume(rng, max_side=5)
        op = build_operator(vol)
        beta = rng.standard_normal(vol.p) * 10 ** rng.uniform(-2, 1)
        mu = float(10 ** rng.uniform(-4, 1))
        gap = penalties.tv_exact(op, beta) - penalties.tv_smoothed(op, beta, mu)
        worst_low = max(worst_low, -gap)
        worst_high = max(worst_high, gap - mu * vol.p / 2)
    return [
        Check("TV - TV_mu >= 0 (worst violation)", 0.0, worst_low, worst_low <= 0),
        Check("TV - TV_mu <= mu p / 2 (worst violation)", 0.0, worst_high, worst_high <= 0),
    ]


def oracle_suite(seed=0, n_instances=2, tol=1e-4):
    rng = np.random.default_rng(seed)
    worst_full = 0.0
    worst_lasso = 0.0
    for _ in range(n_instances):
        data, op, w = random_problem(rng)
        A = reference.dense_difference_operator(op.volume.mask)
        b_ref = reference.solve_exact_cvxpy(data.X, data.y.astype(float), A, w.l2, w.l1, w.tv)
        f_ref = reference.exact_objective_dense(data.X, data.y, A, w.l2, w.l1, w.tv, b_ref)
        fit = conesta_fit(data, op, w, target_eps=1e-6, inner_cfg=FistaConfig(tol=1e-4), seed=seed)
        worst_full = max(worst_full, abs(objective_exact(data, op, w, fit.beta) - f_ref))

        X = rng.standard_normal((20, 5))
        y = (rng.random(20) < 1 / (1 + np.exp(-X[:, 0] * 2))).astype(np.uint8)
        small = Dataset(X, y)
        lasso = PenaltyWeights(0.0, 0.02, 0.0)
        b_cd = reference.coordinate_descent_logistic(X, y.astype(float), lasso.l2, lasso.l1)
        fit = conesta_fit(small, None, lasso, inner_cfg=FistaConfig(tol=1e-10, max_iter=200000),
                          seed=seed)
        worst_lasso = max(worst_lasso, float(np.max(np.abs(fit.beta - b_cd))))
    return [
        Check("CONESTA objective vs interior-point reference", tol, worst_full, worst_full <= tol),
        Check("lasso fit vs coordinate descent (max abs diff)", 1e-5, worst_lasso,
              worst_lasso <= 1e-5),
    ]


def run_suite(name, seed=0):
    if name == "gradients":
        return gradient_suite(seed)
    if name == "bounds":
        return bounds_suite(seed)
    if name == "oracles":
        return oracle_suite(seed)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
