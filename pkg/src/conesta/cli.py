"""Command-line interface: ``conesta {simulate,fit,predict,evaluate,check,slices}``.

Exit codes: 0 success, 1 runtime or domain failure, 2 usage error.
Verbosity is set by the ``CONESTA_LOG`` environment variable
(``error``, ``info`` or ``debug``); logs go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checks, data as files
from .continuation import SolverError, conesta_fit
from .fista import FistaConfig
from .grid import build_operator
from .metrics import compute_metrics, export_weight_slices, mcnemar_test
from .model import Dataset, predict_proba
from .penalties import PenaltyWeights

logger = logging.getLogger("conesta")


@dataclass(frozen=True)
class CliDefaults:
    eps: float = 1e-6
    seed: int = 42
    init: str = "random_unit"
    inner_tol: float = 1e-4
    max_iter: int = 10000
    threshold: float = 0.5


DEFAULTS = CliDefaults()


def _setup_logging():
    level = os.environ.get("CONESTA_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("conesta")
    root.handlers[:] = [handler]
    root.setLevel(levels.get(level, logging.ERROR))
    root.propagate = False


def _nonneg(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def build_parser():
    parser = argparse.ArgumentParser(prog="conesta", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="JSON file describing the generator")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--mask", help="optional mask file restricting the voxels")

    p = sub.add_parser("fit", help="fit a penalized logistic regression with CONESTA")
    p.add_argument("--data", required=True)
    p.add_argument("--mask", help="mask file; required when --tv > 0")
    p.add_argument("--l2", type=_nonneg, default=0.0)
    p.add_argument("--l1", type=_nonneg, default=0.0)
    p.add_argument("--tv", type=_nonneg, default=0.0)
    p.add_argument("--eps", type=_positive, default=DEFAULTS.eps, help="target precision")
    p.add_argument("--seed", type=int, default=DEFAULTS.seed)
    p.add_argument("--init", choices=("zeros", "random_unit"), default=DEFAULTS.init)
    p.add_argument("--standardize", action="store_true", help="z-score the columns of X")
    p.add_argument("--inner-tol", type=_positive, default=DEFAULTS.inner_tol)
    p.add_argument("--max-iter", type=_positive_int, default=DEFAULTS.max_iter,
                   help="FISTA iterations per continuation run")
    p.add_argument("--out", required=True)

    p = sub.add_parser("predict", help="write per-sample probabilities and labels")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="sensitivity, specificity, BCR and McNemar")
    p.add_argument("--pred-a", required=True)
    p.add_argument("--pred-b")
    p.add_argument("--truth", required=True, help="dataset file holding the true labels")
    p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("check", help="run built-in numerical self-checks")
    p.add_argument("--suite", choices=checks.SUITES, required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("slices", help="export weight-map slices as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--axis", choices=("x", "y", "z"), default="z")
    p.add_argument("--indices", type=int, nargs="+", required=True)
    p.add_argument("--out-prefix", required=True)
    return parser


def cmd_simulate(args):
    spec = files.SyntheticSpec.from_dict(json.loads(Path(args.spec).read_text()))
    mask = files.read_mask(args.mask) if args.mask else None
    dataset, vol, truth = files.generate(spec, mask)
    prefix = args.out_prefix
    files.write_dataset(prefix + ".data", dataset)
    files.write_mask(prefix + ".mask", vol)
    files.write_truth(prefix + ".truth", truth)
    logger.info("wrote %s.{data,mask,truth}: n=%d p=%d", prefix, dataset.n, dataset.p)
    return 0


def cmd_fit(args):
    dataset = files.read_dataset(args.data)
    weights = PenaltyWeights(args.l2, args.l1, args.tv)
    op = None
    if args.mask:
        vol = files.read_mask(args.mask)
        if vol.p != dataset.p:
            raise ValueError(f"mask has {vol.p} voxels but data has {dataset.p} features")
        op = build_operator(vol, seed=args.seed)
    elif weights.tv > 0:
        raise ValueError("--mask is required when --tv > 0")
    mean = scale = None
    if args.standardize:
        mean = dataset.X.mean(axis=0)
        scale = dataset.X.std(axis=0)
        scale[scale == 0] = 1.0
        dataset = Dataset((dataset.X - mean) / scale, dataset.y, dataset.label_name)
    cfg = FistaConfig(max_iter=args.max_iter, tol=args.inner_tol)
    fit = conesta_fit(dataset, op, weights, target_eps=args.eps, inner_cfg=cfg,
                      seed=args.seed, init=args.init)
    files.write_model(args.out, fit, mean, scale)
    logger.info("fit done: %d runs, %d inner iterations, f=%.10g",
                len(fit.runs), fit.total_inner_iterations, fit.objective)
    return 0


def cmd_predict(args):
    model = files.read_model(args.model)
    dataset = files.read_dataset(args.data)
    if dataset.p != model.beta.size:
        raise ValueError(f"model has p={model.beta.size} but data has p={dataset.p}")
    prob = predict_proba(model.transform(dataset.X), model.beta)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "probability", "label"])
        for i, pr in enumerate(prob):
            writer.writerow([i, repr(float(pr)), int(pr >= DEFAULTS.threshold)])
    return 0


def read_predictions(path):
    """Hard labels from a prediction CSV written by ``predict``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["index", "probability", "label"]:
        raise ValueError(f"{path}: malformed prediction CSV (bad header)")
    labels = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3 or row[2] not in ("0", "1"):
            raise ValueError(f"{path}:{lineno}: malformed prediction row")
        labels.append(int(row[2]))
    return np.array(labels, dtype=np.int8)


def cmd_evaluate(args):
    y = files.read_dataset(args.truth).y
    pred_a = read_predictions(args.pred_a)
    if pred_a.size != y.size:
        raise ValueError(f"{args.pred_a} has {pred_a.size} rows but truth has {y.size}")
    report = {"a": compute_metrics(y, pred_a).as_dict()}
    if args.pred_b:
        pred_b = read_predictions(args.pred_b)
        if pred_b.size != y.size:
            raise ValueError(f"{args.pred_b} has {pred_b.size} rows but truth has {y.size}")
        report["b"] = compute_metrics(y, pred_b).as_dict()
        report["mcnemar"] = mcnemar_test(y, pred_a, pred_b).as_dict()
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_check(args):
    results = checks.run_suite(args.suite, seed=args.seed)
    for row in results:
        print(row.line())
    ok = all(r.passed for r in results)
    print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_slices(args):
    model = files.read_model(args.model)
    vol = files.read_mask(args.mask)
    texts = export_weight_slices(model.beta, vol, args.axis, args.indices)
    for k, text in zip(args.indices, texts):
        Path(f"{args.out_prefix}_{args.axis}{k}.csv").write_text(text)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "check": cmd_check,
    "slices": cmd_slices,
}


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SolverError as exc:
        logger.error("solver failure in run %d: %s", exc.run_index, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
