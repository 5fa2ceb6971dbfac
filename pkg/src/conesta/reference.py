"""Independent reference computations used to validate the solvers.

Nothing here goes through the sparse operator, the penalty module or FISTA:
the difference operator is rebuilt densely by looping over voxels, losses are
re-derived, and the optimisers are different algorithms (ISTA compiled with
numba, damped Newton, exact coordinate descent, and an interior-point conic
solve of the unsmoothed problem through cvxpy).
"""
from __future__ import annotations

import math

import numba
import numpy as np
from scipy.optimize import brentq

__all__ = [
    "dense_difference_operator",
    "central_difference_gradient",
    "ista_smoothed",
    "newton_l2_logistic",
    "coordinate_descent_logistic",
    "solve_exact_cvxpy",
    "worst_case_iterations",
]


def dense_difference_operator(mask):
    """Dense ``(3p, p)`` forward-difference matrix built voxel by voxel."""
    mask = np.asarray(mask, dtype=bool)
    nx, ny, nz = mask.shape
    index = {}
    for z in range(nz):
        for y in range(ny):
            for x in range(nx):
                if mask[x, y, z]:
                    index[(x, y, z)] = len(index)
    p = len(index)
    A = np.zeros((3 * p, p))
    for (x, y, z), i in index.items():
        for axis, nb in enumerate(((x + 1, y, z), (x, y + 1, z), (x, y, z + 1))):
            j = index.get(nb)
            if j is not None:
                A[3 * i + axis, j] += 1.0
                A[3 * i + axis, i] -= 1.0
    return A


def central_difference_gradient(fun, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        grad[j] = (fun(x + e) - fun(x - e)) / (2 * step)
    return grad


@numba.njit(cache=True)
def _ista_kernel(X, y, indptr, indices, values, l2, l1, tv, mu, beta, step, n_iter):
    n, p = X.shape
    m = indptr.size - 1
    a = np.empty(m)
    grad = np.empty(p)
    for _ in range(n_iter):
        grad[:] = 0.0
        for i in range(n):
            s = 0.0
            for j in range(p):
                s += X[i, j] * beta[j]
            if s >= 0:
                sig = 1.0 / (1.0 + math.exp(-s))
            else:
                e = math.exp(s)
                sig = e / (1.0 + e)
            r = (sig - y[i]) / n
            for j in range(p):
                grad[j] += X[i, j] * r
        for j in range(p):
            grad[j] += 2.0 * l2 * beta[j]
        if tv > 0:
            for r in range(m):
                s = 0.0
                for q in range(indptr[r], indptr[r + 1]):
                    s += values[q] * beta[indices[q]]
                a[r] = s / mu
            for g in range(m // 3):
                nrm = math.sqrt(a[3 * g] ** 2 + a[3 * g + 1] ** 2 + a[3 * g + 2] ** 2)
                if nrm > 1.0:
                    a[3 * g] /= nrm
                    a[3 * g + 1] /= nrm
                    a[3 * g + 2] /= nrm
            for r in range(m):
                for q in range(indptr[r], indptr[r + 1]):
                    grad[indices[q]] += tv * values[q] * a[r]
        thr = step * l1
        for j in range(p):
            v = beta[j] - step * grad[j]
            if v > thr:
                beta[j] = v - thr
            elif v < -thr:
                beta[j] = v + thr
            else:
                beta[j] = 0.0
    return beta


def ista_smoothed(X, y, A, l2, l1, tv, mu, beta0, step, n_iter=1_000_000):
    """Plain ISTA on the smoothed objective; ``A`` is the dense difference matrix."""
    from scipy.sparse import csr_matrix

    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if A is None:
        A = np.zeros((3, X.shape[1]))
    S = csr_matrix(np.asarray(A, dtype=np.float64))
    return _ista_kernel(X, y, S.indptr.astype(np.int64), S.indices.astype(np.int64),
                        S.data.astype(np.float64), float(l2), float(l1), float(tv),
                        float(mu if mu else 1.0), np.array(beta0, dtype=np.float64),
                        float(step), int(n_iter))


def _sigmoid(m):
    return 0.5 * (1.0 + np.tanh(0.5 * m))


def smoothed_objective_dense(X, y, A, l2, l1, tv, mu, beta):
    """Objective of the smoothed problem written out directly (dense ``A``)."""
    m = X @ beta
    loss = np.mean(np.logaddexp(0.0, m) - y * m)
    value = loss + l2 * beta @ beta + l1 * np.abs(beta).sum()
    if tv > 0:
        g = (A @ beta).reshape(-1, 3)
        nrm = np.linalg.norm(g, axis=1)
        per = np.where(nrm > mu, nrm - mu / 2, nrm ** 2 / (2 * mu))
        value += tv * per.sum()
    return float(value)


def exact_objective_dense(X, y, A, l2, l1, tv, beta):
    m = X @ beta
    value = np.mean(np.logaddexp(0.0, m) - y * m) + l2 * beta @ beta + l1 * np.abs(beta).sum()
    if tv > 0:
        value += tv * np.linalg.norm((A @ beta).reshape(-1, 3), axis=1).sum()
    return float(value)


def newton_l2_logistic(X, y, l2, tol=1e-14, max_iter=200):
    """Damped Newton for ``mean(log(1 + e^m) - y m) + l2 ||b||^2``."""
    n, p = X.shape
    beta = np.zeros(p)

    def obj(b):
        m = X @ b
        return np.mean(np.logaddexp(0.0, m) - y * m) + l2 * b @ b

    for _ in range(max_iter):
        s = _sigmoid(X @ beta)
        grad = X.T @ (s - y) / n + 2 * l2 * beta
        H = (X.T * (s * (1 - s))) @ X / n + 2 * l2 * np.eye(p)
        d = np.linalg.solve(H, grad)
        t = 1.0
        f0 = obj(beta)
        while obj(beta - t * d) > f0 - 0.25 * t * grad @ d and t > 1e-12:
            t *= 0.5
        beta = beta - t * d
        if np.linalg.norm(grad) < tol:
            break
    return beta


def coordinate_descent_logistic(X, y, l2, l1, tol=1e-13, max_sweeps=10000):
    """Exact cyclic coordinate descent for the elastic-net logistic objective.

    Each one-dimensional subproblem is solved to machine precision by root
    bracketing on its (monotone) derivative.
    """
    n, p = X.shape
    beta = np.zeros(p)
    m = X @ beta
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(p):
            xj = X[:, j]
            base = m - xj * beta[j]

            def dsmooth(b):
                return xj @ (_sigmoid(base + xj * b) - y) / n + 2 * l2 * b

            d0 = dsmooth(0.0)
            if abs(d0) <= l1:
                new = 0.0
            elif d0 < -l1:
                # minimiser is positive: root of dsmooth(b) + l1 on b > 0
                hi = 1.0
                while dsmooth(hi) + l1 < 0:
                    hi *= 2
                new = brentq(lambda b: dsmooth(b) + l1, 0.0, hi, xtol=1e-15, rtol=1e-15)
            else:
                lo = -1.0
                while dsmooth(lo) - l1 > 0:
                    lo *= 2
                new = brentq(lambda b: dsmooth(b) - l1, lo, 0.0, xtol=1e-15, rtol=1e-15)
            biggest = max(biggest, abs(new - beta[j]))
            m = base + xj * new
            beta[j] = new
        if biggest < tol:
            break
    return beta


def solve_exact_cvxpy(X, y, A, l2, l1, tv):
    """Interior-point solve of the unsmoothed problem (TV as a sum of norms)."""
    import cvxpy as cp

    n, p = X.shape
    b = cp.Variable(p)
    m = X @ b
    expr = cp.sum(cp.logistic(m) - cp.multiply(y, m)) / n
    if l2:
        expr = expr + l2 * cp.sum_squares(b)
    if l1:
        expr = expr + l1 * cp.norm1(b)
    if tv:
        G = cp.reshape(A @ b, (A.shape[0] // 3, 3), order="C")
        expr = expr + tv * cp.sum(cp.norm(G, 2, axis=1))
    prob = cp.Problem(cp.Minimize(expr))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12,
               max_iter=500)
    return np.asarray(b.value, dtype=float)


def worst_case_iterations(mu, eps, tv, norm_A, L0, p, radius=1.0):
    """Iterations FISTA needs, in the worst case, for precision ``eps`` on the exact objective.

    Combines the FISTA rate ``2 R^2 / (t (k+1)^2)`` with step
    ``t = 1 / (L0 + tv ||A||^2 / mu)`` and the smoothing bias ``tv mu p / 2``.
    Infinite where the bias alone exceeds ``eps``.
    """
    mu = np.asarray(mu, dtype=float)
    M = p / 2.0
    slack = eps - tv * mu * M
    lip = L0 + tv * norm_A ** 2 / mu
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.sqrt(2.0 * radius ** 2 * lip / slack) - 1.0
    return np.where(slack > 0, k, np.inf)
