"""Convergence of CONESTA on small elastic-net + TV problems.

Compares the exact objective along the continuation path with an
interior-point reference and fits the log-log slope of the gap against the
cumulative number of inner iterations.

    python3 scripts/run_convergence.py --seeds 0 1 2 --inner-tol 1e-3 1e-4 1e-6
"""
import argparse
import csv
import sys
import time

import numpy as np

from conesta import FistaConfig, Dataset, MaskedVolume, PenaltyWeights, build_operator
from conesta import conesta_fit, objective_exact
from conesta import reference as ref


def instance(seed, dims, n, weights):
    rng = np.random.default_rng(seed)
    vol = MaskedVolume.full(dims)
    p = vol.p
    X = rng.standard_normal((n, p))
    beta_true = np.zeros(p)
    beta_true[: max(1, p // 3)] = 1.0
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ beta_true))).astype(np.uint8)
    return Dataset(X, y), build_operator(vol), PenaltyWeights(*weights)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1])
    ap.add_argument("--dims", type=int, nargs=3, default=[3, 3, 3])
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--weights", type=float, nargs=3, default=[0.05, 0.02, 0.05],
                    metavar=("L2", "L1", "TV"))
    ap.add_argument("--eps", type=float, default=1e-6)
    ap.add_argument("--inner-tol", type=float, nargs="+", default=[1e-4])
    ap.add_argument("--trace-csv", help="write (seed, inner_tol, K, gap) rows here")
    args = ap.parse_args(argv)

    rows = []
    print("seed  inner_tol  K_total  runs  final_gap   slope  seconds")
    for seed in args.seeds:
        data, op, w = instance(seed, tuple(args.dims), args.n, args.weights)
        A = ref.dense_difference_operator(op.volume.mask)
        b_ref = ref.solve_exact_cvxpy(data.X, data.y.astype(float), A, w.l2, w.l1, w.tv)
        f_ref = ref.exact_objective_dense(data.X, data.y, A, w.l2, w.l1, w.tv, b_ref)
        for tol in args.inner_tol:
            trace = []
            start = time.perf_counter()
            fit = conesta_fit(data, op, w, target_eps=args.eps, inner_cfg=FistaConfig(tol=tol),
                              callback=lambda k, b: trace.append((k, objective_exact(data, op, w, b))))
            seconds = time.perf_counter() - start
            K = np.array([k for k, _ in trace], dtype=float)
            gap = np.array([f for _, f in trace]) - f_ref
            keep = gap > 1e-9
            slope = np.polyfit(np.log(K[keep]), np.log(gap[keep]), 1)[0] if keep.sum() > 2 else np.nan
            print(f"{seed:4d}  {tol:9.0e}  {fit.total_inner_iterations:7d}  {len(fit.runs):4d}  "
                  f"{fit.objective - f_ref:9.2e}  {slope:6.2f}  {seconds:7.2f}")
            rows += [(seed, tol, int(k), g) for k, g in zip(K, gap)]
    if args.trace_csv:
        with open(args.trace_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seed", "inner_tol", "K", "gap"])
            writer.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
