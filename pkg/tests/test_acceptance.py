"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Fits that involve an l1 weight are module-scoped fixtures so that the
sparsity check (criterion 8) can inspect every one of them regardless of
test selection or order.
"""
import time
from fractions import Fraction
from math import comb

import numpy as np
import pytest

from conesta import penalties as pen
from conesta import reference as ref
from conesta.cli import main
from conesta.continuation import conesta_fit, init_beta, mu_opt, objective_exact
from conesta.data import SyntheticSpec, generate
from conesta.fista import FistaConfig, fista_run, fista_step_size, smoothed_objective
from conesta.grid import MaskedVolume, build_operator
from conesta.metrics import compute_metrics, mcnemar_pvalue, support_stats
from conesta.model import Dataset, logistic_loss_value_gradient, smooth_part_lipschitz
from conesta.penalties import PenaltyWeights

from conftest import make_problem

# solver settings shared by the full-method criteria: library/CLI defaults
TARGET_EPS = 1e-6
INNER = FistaConfig(tol=1e-4, max_iter=10000)


def random_volume(rng, max_p, min_p=1):
    while True:
        dims = tuple(int(d) for d in rng.integers(1, 6, size=3))
        mask = rng.random(dims) < rng.uniform(0.6, 1.0)
        if min_p <= mask.sum() <= max_p:
            return MaskedVolume(dims, mask)


def assert_reported(report, criterion, passed, detail):
    report(criterion, passed, detail)
    assert passed, detail


# ---------------------------------------------------------------- fits (shared)


@pytest.fixture(scope="module")
def fista_bound_runs():
    """Criterion 3 data: 10 instances, FISTA objective traces and ISTA references."""
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    out = []
    for i in range(10):
        vol = random_volume(rng, 50, min_p=8)
        op = build_operator(vol)
        n = int(rng.integers(20, 41))
        X = rng.standard_normal((n, vol.p))
        y = (rng.random(n) < 1 / (1 + np.exp(-X[:, : max(1, vol.p // 3)].sum(1)))).astype(np.uint8)
        data = Dataset(X, y)
        w = PenaltyWeights(*rng.uniform([0.0, 0.03, 0.01], [0.1, 0.1, 0.1]))
        mu = float(10 ** rng.uniform(-2, -1))
        L0 = smooth_part_lipschitz(data, w.l2, np.linalg.norm(X, 2))
        t = fista_step_size(L0, w, op.spectral_norm, mu)
        beta0 = init_beta(vol.p, "random_unit", seed=i)
        trace = []
        res = fista_run(data, op, w, mu, beta0, FistaConfig(step_size=t, max_iter=2000, tol=0.0),
                        callback=lambda k, b: trace.append(smoothed_objective(data, op, w, b, mu)))
        A = ref.dense_difference_operator(vol.mask)
        b_star = ref.ista_smoothed(X, y, A, w.l2, w.l1, w.tv, mu, beta0, t, 1_000_000)
        out.append(dict(data=data, op=op, w=w, mu=mu, t=t, beta0=beta0, trace=np.array(trace),
                        beta=res.beta, b_star=b_star))
    return dict(runs=out, seconds=time.perf_counter() - start)


@pytest.fixture(scope="module")
def special_case_fits():
    """Criterion 5: lasso, elastic net and ridge (tv = 0) against CD / Newton."""
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    cfg = FistaConfig(tol=1e-11, max_iter=500000)
    out = []
    for i in range(3):
        p = int(rng.integers(6, 11))
        n = int(rng.integers(15, 40))
        X = rng.standard_normal((n, p))
        y = (rng.random(n) < 1 / (1 + np.exp(-2 * X[:, 0] + X[:, 1]))).astype(np.uint8)
        data = Dataset(X, y)
        # l1 weights large enough that the optima have exact zeros
        for kind, w in (("lasso", PenaltyWeights(0.0, 0.06, 0.0)),
                        ("elastic net", PenaltyWeights(0.05, 0.06, 0.0)),
                        ("ridge", PenaltyWeights(0.05, 0.0, 0.0))):
            fit = conesta_fit(data, None, w, inner_cfg=cfg, seed=i)
            if w.l1 > 0:
                oracle = ref.coordinate_descent_logistic(X, y.astype(float), w.l2, w.l1)
            else:
                oracle = ref.newton_l2_logistic(X, y.astype(float), w.l2)
            out.append(dict(kind=kind, p=p, w=w, beta=fit.beta, oracle=oracle))
    return dict(fits=out, seconds=time.perf_counter() - start)


@pytest.fixture(scope="module")
def convergence_fits():
    """Criterion 6: full-method fits with per-iteration exact objective traces."""
    start = time.perf_counter()
    out = []
    for seed in (0, 1):
        data, op, w = make_problem(seed, dims=(3, 3, 3), n=40, weights=(0.05, 0.02, 0.05))
        A = ref.dense_difference_operator(op.volume.mask)
        X, y = data.X, data.y.astype(float)
        # long-run reference: interior-point solve of the exact problem, then
        # 10^7 ISTA iterations at mu = 1e-8 warm-started from it
        b_ip = ref.solve_exact_cvxpy(X, y, A, w.l2, w.l1, w.tv)
        L0 = smooth_part_lipschitz(data, w.l2, np.linalg.norm(X, 2))
        mu_ref = 1e-8
        t_ref = fista_step_size(L0, w, np.linalg.norm(A, 2), mu_ref)
        b_long = ref.ista_smoothed(X, y, A, w.l2, w.l1, w.tv, mu_ref, b_ip, t_ref, 10_000_000)
        f_ref = min(ref.exact_objective_dense(X, y, A, w.l2, w.l1, w.tv, b)
                    for b in (b_ip, b_long))
        trace = []
        fit = conesta_fit(data, op, w, target_eps=TARGET_EPS, inner_cfg=INNER,
                          callback=lambda k, b: trace.append((k, objective_exact(data, op, w, b))))
        out.append(dict(data=data, op=op, w=w, fit=fit, f_ref=f_ref, trace=np.array(trace)))
    return dict(fits=out, seconds=time.perf_counter() - start)


SUPPORT_SPEC = SyntheticSpec(dims=(10, 10, 10), n_per_class=50, regions=(((5, 5, 5), 2.5, 0.5),),
                             noise_sigma=1.0, smoothness=1, seed=0)
L1_GRID = (0.002, 0.005, 0.01, 0.02, 0.05, 0.1)
TV_WEIGHTS = PenaltyWeights(0.01, 0.06, 0.1)


@pytest.fixture(scope="module")
def support_fits():
    """Criterion 7: l1-only fits over a weight grid and one l1+l2+TV fit."""
    start = time.perf_counter()
    data, vol, truth = generate(SUPPORT_SPEC)
    op = build_operator(vol)
    fits = {}
    for l1 in L1_GRID:
        fits[("l1", l1)] = conesta_fit(data, op, PenaltyWeights(0.0, l1, 0.0),
                                       target_eps=TARGET_EPS, inner_cfg=INNER)
    fits[("tv", None)] = conesta_fit(data, op, TV_WEIGHTS, target_eps=TARGET_EPS, inner_cfg=INNER)
    return dict(truth=truth, fits=fits, seconds=time.perf_counter() - start)


# ---------------------------------------------------------------- criteria


def test_criterion_1_smoothing_bound(report):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    violations = 0
    worst_ratio = 0.0
    for _ in range(1000):
        vol = random_volume(rng, 125)
        op = build_operator(vol)
        beta = rng.standard_normal(vol.p) * 10 ** rng.uniform(-3, 2)
        mu = float(10 ** rng.uniform(-4, 1))
        gap = pen.tv_exact(op, beta) - pen.tv_smoothed(op, beta, mu)
        violations += not (0 <= gap <= mu * vol.p / 2)
        worst_ratio = max(worst_ratio, gap / (mu * vol.p / 2))
    elapsed = time.perf_counter() - start
    ok = violations == 0 and elapsed < 10
    assert_reported(report, 1, ok, f"1000 draws, {violations} violations, max gap/(mu p/2) "
                    f"{worst_ratio:.3f}, {elapsed:.1f}s (limit 10s)")


def test_criterion_2_gradients(report):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst_tv = worst_g = 0.0
    for _ in range(100):
        vol = random_volume(rng, 100)
        op = build_operator(vol)
        n = int(rng.integers(5, 30))
        data = Dataset(rng.standard_normal((n, vol.p)), rng.integers(0, 2, n))
        w = PenaltyWeights(*rng.uniform(0, 0.5, 3))
        mu = float(10 ** rng.uniform(-1, 0))
        beta = rng.standard_normal(vol.p)

        def g(b):
            return (logistic_loss_value_gradient(data, b)[0] + w.l2 * b @ b
                    + w.tv * pen.tv_smoothed(op, b, mu))

        grad_g = (logistic_loss_value_gradient(data, beta)[1] + 2 * w.l2 * beta
                  + w.tv * pen.tv_smoothed_gradient(op, beta, mu))
        fd_g = ref.central_difference_gradient(g, beta)
        fd_tv = ref.central_difference_gradient(lambda b: pen.tv_smoothed(op, b, mu), beta)
        worst_g = max(worst_g, np.linalg.norm(grad_g - fd_g) / np.linalg.norm(fd_g))
        worst_tv = max(worst_tv, np.linalg.norm(pen.tv_smoothed_gradient(op, beta, mu) - fd_tv)
                       / max(np.linalg.norm(fd_tv), 1e-12))
    elapsed = time.perf_counter() - start
    ok = worst_tv <= 1e-5 and worst_g <= 1e-5 and elapsed < 30
    assert_reported(report, 2, ok, f"100 instances, worst rel err TV_mu {worst_tv:.1e}, "
                    f"smooth part {worst_g:.1e} (tol 1e-5), {elapsed:.1f}s (limit 30s)")


def test_criterion_3_fista_rate(report, fista_bound_runs):
    worst = -np.inf
    for run in fista_bound_runs["runs"]:
        data, op, w, mu = run["data"], run["op"], run["w"], run["mu"]
        f_star = smoothed_objective(data, op, w, run["b_star"], mu)
        k = np.arange(1, run["trace"].size + 1)
        rhs = 2.0 / (run["t"] * (k + 1) ** 2) * np.sum((run["beta0"] - run["b_star"]) ** 2)
        worst = max(worst, float(np.max((run["trace"] - f_star) / rhs)))
    elapsed = fista_bound_runs["seconds"]
    n_iter = min(r["trace"].size for r in fista_bound_runs["runs"])
    ok = worst <= 1.0 and n_iter == 2000 and elapsed < 300
    assert_reported(report, 3, ok, f"10 instances x {n_iter} iterations, max gap/bound "
                    f"{worst:.3f} (must be <= 1), {elapsed:.1f}s (limit 300s)")


def test_criterion_4_mu_opt_minimality(report):
    start = time.perf_counter()
    worst_steps = 0.0
    cases = 0
    for seed, dims in ((0, (3, 3, 3)), (1, (4, 3, 2)), (2, (5, 4, 3))):
        data, op, w = make_problem(seed, dims=dims, weights=(0.05, 0.02, 0.1))
        L0 = smooth_part_lipschitz(data, w.l2, np.linalg.norm(data.X, 2))
        a, p = op.spectral_norm, data.p
        for eps in (1.0, 0.1, 0.01):
            # any mu at or above eps / (tv p/2) leaves no room for optimisation error
            hi = eps / (w.tv * p / 2)
            grid = np.logspace(np.log10(hi) - 8, np.log10(hi), 200, endpoint=False)
            bound = ref.worst_case_iterations(grid, eps, w.tv, a, L0, p)
            step = np.log(grid[1] / grid[0])
            off = abs(np.log(grid[np.argmin(bound)]) - np.log(mu_opt(eps, w.tv, a, L0, p))) / step
            worst_steps = max(worst_steps, off)
            cases += 1
    elapsed = time.perf_counter() - start
    ok = worst_steps <= 1.0 and elapsed < 60
    assert_reported(report, 4, ok, f"{cases} (instance, eps) cases, grid argmin at most "
                    f"{worst_steps:.2f} grid steps from mu_opt, {elapsed:.1f}s (limit 60s)")


def test_criterion_5_special_cases(report, special_case_fits):
    fits = special_case_fits["fits"]
    worst = {}
    for f in fits:
        d = float(np.max(np.abs(f["beta"] - f["oracle"])))
        worst[f["kind"]] = max(worst.get(f["kind"], 0.0), d)
    elapsed = special_case_fits["seconds"]
    ok = max(worst.values()) <= 1e-5 and max(f["p"] for f in fits) <= 10 and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert_reported(report, 5, ok, f"max |dbeta| {detail} (tol 1e-5) over {len(fits)} fits, "
                    f"{elapsed:.1f}s (limit 60s)")


def test_criterion_6_full_method(report, convergence_fits):
    worst_final = 0.0
    slopes = []
    for c in convergence_fits["fits"]:
        worst_final = max(worst_final, abs(c["fit"].objective - c["f_ref"]))
        K, f = c["trace"][:, 0], c["trace"][:, 1]
        gap = f - c["f_ref"]
        # below 1e-9 the gap is dominated by the reference's own accuracy
        keep = gap > 1e-9
        slopes.append(float(np.polyfit(np.log(K[keep]), np.log(gap[keep]), 1)[0]))
    elapsed = convergence_fits["seconds"]
    ok = worst_final <= 1e-4 and max(slopes) <= -1.5 and elapsed < 300
    assert_reported(report, 6, ok, f"final |f - f_ref| <= {worst_final:.1e} (tol 1e-4), "
                    f"log-log slopes {', '.join(f'{s:.2f}' for s in slopes)} (need <= -1.5), "
                    f"{elapsed:.1f}s (limit 300s)")


def test_criterion_7_support_recovery(report, support_fits):
    truth = support_fits["truth"]
    l1_dice = {l1: support_stats(support_fits["fits"][("l1", l1)].beta, truth)[0]
               for l1 in L1_GRID}
    best_l1 = max(l1_dice.values())
    tv_dice, tv_nnz = support_stats(support_fits["fits"][("tv", None)].beta, truth)
    elapsed = support_fits["seconds"]
    ok = best_l1 < 0.5 and tv_dice >= best_l1 + 0.2 and elapsed < 300
    assert_reported(report, 7, ok, f"best l1-only Dice {best_l1:.3f} over {len(L1_GRID)} weights, "
                    f"l1+l2+TV Dice {tv_dice:.3f} ({tv_nnz} nonzeros, {int(truth.support.sum())} "
                    f"true), {elapsed:.1f}s (limit 300s)")


def test_criterion_8_exact_zeros(report, fista_bound_runs, special_case_fits, convergence_fits,
                                 support_fits):
    betas = [r["beta"] for r in fista_bound_runs["runs"]]
    betas += [f["beta"] for f in special_case_fits["fits"] if f["w"].l1 > 0]
    betas += [c["fit"].beta for c in convergence_fits["fits"]]
    betas += [fit.beta for fit in support_fits["fits"].values()]
    # the prox writes +0.0 exactly
    with_zeros = sum(bool(np.any((b == 0) & ~np.signbit(b))) for b in betas)
    # where an exact coordinate-descent oracle exists, the zero patterns agree
    pattern_ok = all(np.array_equal(f["beta"] == 0, f["oracle"] == 0)
                     for f in special_case_fits["fits"] if f["w"].l1 > 0)
    ok = with_zeros == len(betas) and pattern_ok
    assert_reported(report, 8, ok, f"{with_zeros}/{len(betas)} fits with l1 > 0 contain "
                    f"bitwise-zero coordinates; zero pattern matches CD oracle: {pattern_ok}")


def binomial_tail_p(b, c):
    n = b + c
    tail = sum(Fraction(comb(n, i), 2 ** n) for i in range(min(b, c) + 1))
    return float(min(Fraction(1), 2 * tail))


def test_criterion_9_metrics(report):
    rows = [((171, 29, 171, 29), 0.855), ((171, 79, 121, 129), 0.584)]
    bcr_err = 0.0
    for (tp, fn, tn, fp), expected in rows:
        y = np.array([1] * (tp + fn) + [0] * (tn + fp))
        pred = np.array([1] * tp + [0] * fn + [0] * tn + [1] * fp)
        m = compute_metrics(y, pred)
        bcr_err = max(bcr_err, abs(m.bcr - expected), abs(m.bcr - (m.sensitivity + m.specificity) / 2))
    mc_err = 0.0
    for b in range(25):
        for c in range(25 - b):
            p, kind = mcnemar_pvalue(b, c)
            assert kind == "exact"
            mc_err = max(mc_err, abs(p - binomial_tail_p(b, c)))
    ok = bcr_err <= 1e-12 and mc_err <= 1e-12
    assert_reported(report, 9, ok, f"BCR fixtures max err {bcr_err:.1e}; McNemar exact vs "
                    f"binomial sum max err {mc_err:.1e} over all b+c < 25 (tol 1e-12)")


def test_criterion_10_cli_determinism(report, tmp_path):
    import json

    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"dims": [5, 5, 5], "n_per_class": 15, "noise_sigma": 1.0,
                                "smoothness": 1, "seed": 11,
                                "regions": [{"center": [2, 2, 2], "radius": 1.5, "effect": 1.0}]}))
    prefix = str(tmp_path / "sim")
    assert main(["simulate", "--spec", str(spec), "--out-prefix", prefix]) == 0
    outs = []
    for name in ("first", "second"):
        out = tmp_path / f"{name}.model"
        code = main(["fit", "--data", prefix + ".data", "--mask", prefix + ".mask", "--l2", "0.1",
                     "--l1", "0.1", "--tv", "0.8", "--seed", "7", "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1]
    assert_reported(report, 10, ok, f"two fits with identical flags: model files "
                    f"{'byte-identical' if ok else 'differ'} ({len(outs[0])} bytes)")
