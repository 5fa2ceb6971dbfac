"""Worst-case iteration bound as a function of the smoothing parameter.

Prints the bound on a log grid of mu for several target precisions and
marks where the closed-form optimum falls.

    python3 scripts/run_mu_opt_grid.py --tv 0.1 --norm-a 3.4 --l0 0.8 --p 27
"""
import argparse
import sys

import numpy as np

from conesta import mu_opt
from conesta.reference import worst_case_iterations


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tv", type=float, default=0.1)
    ap.add_argument("--norm-a", type=float, default=np.sqrt(12.0))
    ap.add_argument("--l0", type=float, default=1.0)
    ap.add_argument("--p", type=int, default=27)
    ap.add_argument("--eps", type=float, nargs="+", default=[1.0, 0.1, 0.01])
    ap.add_argument("--points", type=int, default=200)
    args = ap.parse_args(argv)

    for eps in args.eps:
        hi = eps / (args.tv * args.p / 2)
        grid = np.logspace(np.log10(hi) - 8, np.log10(hi), args.points, endpoint=False)
        bound = worst_case_iterations(grid, eps, args.tv, args.norm_a, args.l0, args.p)
        best = grid[np.argmin(bound)]
        mu = mu_opt(eps, args.tv, args.norm_a, args.l0, args.p)
        steps = abs(np.log(best / mu)) / np.log(grid[1] / grid[0])
        print(f"eps={eps:g}: grid argmin mu={best:.4e}  mu_opt={mu:.4e}  "
              f"({steps:.2f} grid steps apart)  bound at mu_opt={float(worst_case_iterations(mu, eps, args.tv, args.norm_a, args.l0, args.p)):.4g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
