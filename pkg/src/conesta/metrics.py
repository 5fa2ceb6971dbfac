"""Classification metrics, McNemar's paired test, support overlap and slice export."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "EvalMetrics",
    "McNemarResult",
    "compute_metrics",
    "mcnemar_test",
    "export_weight_slices",
    "support_stats",
    "EXACT_CROSSOVER",
]

# below this many discordant pairs the exact binomial test is used
EXACT_CROSSOVER = 25


@dataclass(frozen=True)
class EvalMetrics:
    sensitivity: float
    specificity: float
    bcr: float
    tp: int
    tn: int
    fp: int
    fn: int

    def as_dict(self):
        return {
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "bcr": self.bcr,
            "counts": {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn},
        }


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    p_value: float
    test_kind: str

    def as_dict(self):
        return {"discordant_counts": [self.b, self.c], "p_value": self.p_value,
                "test_kind": self.test_kind}


def _labels(v, name):
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1D")
    if not np.all((v == 0) | (v == 1)):
        raise ValueError(f"{name} must contain only 0/1 labels")
    return v.astype(np.int8)


def compute_metrics(y_true, y_pred) -> EvalMetrics:
    """Sensitivity (recall of class 1), specificity (recall of class 0) and their mean."""
    y_true = _labels(y_true, "y_true")
    y_pred = _labels(y_pred, "y_pred")
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    pos = y_true == 1
    if pos.all() or not pos.any():
        raise ValueError("degenerate test set")
    tp = int(np.sum(pos & (y_pred == 1)))
    fn = int(np.sum(pos & (y_pred == 0)))
    tn = int(np.sum(~pos & (y_pred == 0)))
    fp = int(np.sum(~pos & (y_pred == 1)))
    sens = tp / (tp + fn)
    spec = tn / (tn + fp)
    return EvalMetrics(sens, spec, (sens + spec) / 2, tp, tn, fp, fn)


def mcnemar_pvalue(b, c, kind="auto"):
    """Two-sided McNemar p-value from the discordant counts ``b`` and ``c``.

    ``kind`` is "exact" (binomial), "chi2_cc" (chi-square with continuity
    correction) or "auto", which picks exact below ``EXACT_CROSSOVER``
    discordant pairs.
    """
    b, c = int(b), int(c)
    n = b + c
    if kind == "auto":
        kind = "exact" if n < EXACT_CROSSOVER else "chi2_cc"
    if n == 0:
        return 1.0, "exact"
    if kind == "exact":
        p = 2.0 * stats.binom.cdf(min(b, c), n, 0.5)
    elif kind == "chi2_cc":
        stat = max(abs(b - c) - 1, 0) ** 2 / n
        p = stats.chi2.sf(stat, df=1)
    else:
        raise ValueError(f"unknown McNemar test kind {kind!r}")
    return float(min(1.0, p)), kind


def mcnemar_test(y_true, pred_a, pred_b, kind="auto") -> McNemarResult:
    """Compare two classifiers on the same samples.

    ``b`` counts samples only ``pred_a`` gets right, ``c`` those only ``pred_b``
    gets right.
    """
    y_true = _labels(y_true, "y_true")
    pred_a = _labels(pred_a, "pred_a")
    pred_b = _labels(pred_b, "pred_b")
    if not (y_true.shape == pred_a.shape == pred_b.shape):
        raise ValueError("inputs differ in length")
    ok_a = pred_a == y_true
    ok_b = pred_b == y_true
    b = int(np.sum(ok_a & ~ok_b))
    c = int(np.sum(~ok_a & ok_b))
    p, used = mcnemar_pvalue(b, c, kind)
    return McNemarResult(b, c, p, used)


_SLICE_AXES = {"x": 0, "y": 1, "z": 2}


def export_weight_slices(beta, vol, axis, indices):
    """CSV text for each requested slice of the weight map.

    Rows run over the slower of the two remaining axes, columns over the
    faster one (x before y before z). In-mask cells hold ``repr`` of the
    weight so the text round-trips exactly; out-of-mask cells are empty.
    """
    if axis not in _SLICE_AXES:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    a = _SLICE_AXES[axis]
    volume = vol.to_volume(np.asarray(beta, dtype=float))
    out = []
    for k in indices:
        if not 0 <= int(k) < vol.dims[a]:
            raise ValueError(f"slice index {k} out of range for axis {axis}")
        values = np.take(volume, int(k), axis=a)
        inside = np.take(vol.mask, int(k), axis=a)
        # remaining axes are (fast, slow); put slow on rows
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row_vals, row_mask in zip(values.T, inside.T):
            writer.writerow([repr(float(v)) if m else "" for v, m in zip(row_vals, row_mask)])
        out.append(buf.getvalue())
    return out


def support_stats(beta, truth, threshold=0.0):
    """Dice overlap between ``{j : |beta_j| > threshold}`` and the true support.

    ``truth`` is a :class:`~conesta.data.GroundTruth` or a boolean mask.
    Returns ``(dice, n_nonzero)``; two empty supports count as a perfect match.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    est = np.abs(np.asarray(beta, dtype=float)) > threshold
    truth = np.asarray(getattr(truth, "support", truth), dtype=bool)
    if est.shape != truth.shape:
        raise ValueError("beta and support differ in length")
    total = est.sum() + truth.sum()
    dice = 1.0 if total == 0 else 2.0 * np.sum(est & truth) / total
    return float(dice), int(est.sum())
