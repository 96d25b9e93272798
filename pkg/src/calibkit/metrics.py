"""Confusion-matrix metrics, PR/ROC curves, reliability bins, ECE/MCE,
and operating-threshold selection.

Conventions pinned here and relied on throughout the package:

* Prediction rule is inclusive: predicted positive iff score >= threshold.
* Candidate thresholds are exactly the distinct observed scores, swept in
  descending order, plus the all-positive endpoint at threshold 0.
* Undefined metrics are ``None`` (rendered "NA" in reports), never 0.
* AUPRC is the average-precision step sum; AUROC is the trapezoid over
  (fpr, tpr), computed in integer arithmetic so it equals the tie-aware
  pairwise-ranking count exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels
from .core import ScoreSet, ValidationError

_BIN_MODES = ("positive_fraction", "label_accuracy")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts must be nonnegative")
        if self.tp + self.fp + self.fn + self.tn < 1:
            raise ValidationError("confusion matrix must count at least one sample")


class BasicMetrics(NamedTuple):
    accuracy: float | None
    precision: float | None
    recall: float | None
    fscore: float | None


class PRPoint(NamedTuple):
    threshold: float
    precision: float
    recall: float


class ROCPoint(NamedTuple):
    threshold: float
    fpr: float
    tpr: float


@dataclass(frozen=True)
class PRCurve:
    points: tuple[PRPoint, ...]
    auprc: float


@dataclass(frozen=True)
class ROCCurve:
    points: tuple[ROCPoint, ...]
    auroc: float


@dataclass(frozen=True)
class ReliabilityBin:
    lower: float
    upper: float
    count: int
    mean_score: float | None
    observed: float | None


@dataclass(frozen=True)
class ReliabilityBins:
    bin_count: int
    mode: str
    bins: tuple[ReliabilityBin, ...]
    total: int


@dataclass(frozen=True)
class ThresholdChoice:
    threshold: float
    criterion: str
    criterion_value: float


def confusion_at(s: ScoreSet, threshold: float) -> ConfusionMatrix:
    """Tally predictions (score >= threshold) against labels."""
    if not (0.0 <= threshold <= 1.0):
        raise ValidationError("threshold must lie in [0, 1]")
    pred = s.scores >= threshold
    pos = s.labels == 1
    tp = int(np.count_nonzero(pred & pos))
    fp = int(np.count_nonzero(pred & ~pos))
    fn = int(np.count_nonzero(~pred & pos))
    tn = len(s) - tp - fp - fn
    return ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn)


def basic_metrics(cm: ConfusionMatrix) -> BasicMetrics:
    """Accuracy, precision, recall, F-score; None where a denominator is 0."""
    total = cm.tp + cm.fp + cm.fn + cm.tn
    accuracy = (cm.tp + cm.tn) / total
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp > 0 else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else None
    if precision is None or recall is None or precision + recall == 0.0:
        fscore = None
    else:
        fscore = 2.0 * precision * recall / (precision + recall)
    return BasicMetrics(accuracy, precision, recall, fscore)


def mcc(cm: ConfusionMatrix) -> float | None:
    """Matthews correlation coefficient in exact integer arithmetic.

    The numerator and the product of the four marginals are formed as Python
    integers (no overflow), with a single float division at the end.  None
    when any marginal is empty.
    """
    tp, fp, fn, tn = cm.tp, cm.fp, cm.fn, cm.tn
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return None
    return (tp * tn - fp * fn) / math.sqrt(denom)


def _sweep(s: ScoreSet):
    """Descending-threshold cumulative (thresholds, tp, fp) over distinct scores."""
    scores = np.ascontiguousarray(s.scores, dtype=np.float64)
    labels = np.ascontiguousarray(s.labels, dtype=np.int64)
    order = np.argsort(-scores, kind="stable")
    return _kernels.sweep_counts(scores[order], labels[order])


def pr_curve(s: ScoreSet) -> PRCurve:
    """Precision-recall curve over descending distinct thresholds.

    The final point is the all-positive endpoint at threshold 0 (present
    implicitly when 0 is an observed score).  auprc is the step-form
    average precision: sum of (R_n - R_{n-1}) * P_n over the sweep.
    """
    n_pos = s.positive_count
    if n_pos == 0:
        raise ValidationError("pr_curve requires at least one positive label")
    thr, tp, fp = _sweep(s)
    points = []
    terms = []
    prev_recall = 0.0
    for i in range(thr.shape[0]):
        tp_i = int(tp[i])
        fp_i = int(fp[i])
        precision = tp_i / (tp_i + fp_i)
        recall = tp_i / n_pos
        points.append(PRPoint(float(thr[i]), precision, recall))
        terms.append((recall - prev_recall) * precision)
        prev_recall = recall
    if points[-1].threshold > 0.0:
        # Same partition as the lowest observed score under the inclusive
        # rule; recall is already 1 there, so the step term is 0.
        points.append(PRPoint(0.0, points[-1].precision, points[-1].recall))
        terms.append(0.0)
    return PRCurve(points=tuple(points), auprc=math.fsum(terms))


def roc_curve(s: ScoreSet) -> ROCCurve:
    """ROC curve over descending distinct thresholds.

    auroc is the trapezoid over (fpr, tpr) anchored at (0, 0), accumulated
    in integer arithmetic, so it equals the fraction of correctly ordered
    positive/negative pairs with ties counted one half.
    """
    n_pos = s.positive_count
    n_neg = s.negative_count
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("roc_curve requires both classes present")
    thr, tp, fp = _sweep(s)
    points = []
    area2 = 0
    prev_tp = 0
    prev_fp = 0
    for i in range(thr.shape[0]):
        tp_i = int(tp[i])
        fp_i = int(fp[i])
        points.append(ROCPoint(float(thr[i]), fp_i / n_neg, tp_i / n_pos))
        area2 += (fp_i - prev_fp) * (tp_i + prev_tp)
        prev_tp, prev_fp = tp_i, fp_i
    auroc = area2 / (2 * n_neg * n_pos)
    return ROCCurve(points=tuple(points), auroc=auroc)


def reliability_bins(s: ScoreSet, bin_count: int = 10,
                     mode: str = "positive_fraction") -> ReliabilityBins:
    """Assign scores to ``bin_count`` equal-width bins and summarize each.

    Bin z (1-based) covers ((z-1)/Z, z/Z]; a score of exactly 0 joins bin 1.
    ``observed`` per non-empty bin is the positive fraction (default) or, in
    label_accuracy mode, the fraction of correct predictions at threshold
    0.5.  Empty bins carry count 0 and None summaries.
    """
    if bin_count < 2:
        raise ValidationError("bin_count must be at least 2")
    if mode not in _BIN_MODES:
        raise ValidationError(f"mode must be one of {_BIN_MODES}")
    scores = np.ascontiguousarray(s.scores, dtype=np.float64)
    if mode == "positive_fraction":
        obs = s.labels.astype(np.float64)
    else:
        pred = scores >= 0.5
        obs = (pred == (s.labels == 1)).astype(np.float64)
    edges = np.arange(bin_count + 1, dtype=np.float64) / bin_count
    counts, score_sums, obs_sums = _kernels.bin_accumulate(
        scores, scores, np.ascontiguousarray(obs), edges)
    bins = []
    for k in range(bin_count):
        c = int(counts[k])
        bins.append(ReliabilityBin(
            lower=float(edges[k]),
            upper=float(edges[k + 1]),
            count=c,
            mean_score=float(score_sums[k]) / c if c else None,
            observed=float(obs_sums[k]) / c if c else None,
        ))
    return ReliabilityBins(bin_count=bin_count, mode=mode, bins=tuple(bins),
                           total=len(s))


def ece(b: ReliabilityBins) -> float:
    """Expected calibration error: count-weighted mean |observed - mean score|."""
    terms = [(rb.count / b.total) * abs(rb.observed - rb.mean_score)
             for rb in b.bins if rb.count]
    return math.fsum(terms)


def mce(b: ReliabilityBins) -> float:
    """Maximum calibration error over non-empty bins."""
    gaps = [abs(rb.observed - rb.mean_score) for rb in b.bins if rb.count]
    if not gaps:
        raise ValidationError("mce requires at least one non-empty bin")
    return max(gaps)


def _fscore_of(point: PRPoint) -> float | None:
    if point.precision + point.recall == 0.0:
        return None
    return 2.0 * point.precision * point.recall / (point.precision + point.recall)


def optimal_threshold_pr(c: PRCurve) -> ThresholdChoice:
    """Threshold maximizing F = 2PR/(P+R) over the curve's points.

    Ties go to the lower threshold (the higher-recall operating point).
    """
    best: PRPoint | None = None
    best_f = -1.0
    for point in c.points:
        f = _fscore_of(point)
        if f is not None and f >= best_f:
            best, best_f = point, f
    if best is None:
        raise ValidationError("no curve point has a defined F-score")
    return ThresholdChoice(threshold=best.threshold, criterion="pr_fmax",
                           criterion_value=best_f)


def youden_threshold(c: ROCCurve) -> ThresholdChoice:
    """Threshold maximizing J = tpr - fpr; ties go to the lower threshold."""
    if not c.points:
        raise ValidationError("empty curve")
    best = c.points[0]
    best_j = best.tpr - best.fpr
    for point in c.points[1:]:
        j = point.tpr - point.fpr
        if j >= best_j:
            best, best_j = point, j
    return ThresholdChoice(threshold=best.threshold, criterion="youden",
                           criterion_value=best_j)


def gmeans_threshold(c: ROCCurve) -> ThresholdChoice:
    """Threshold maximizing sqrt(tpr * (1 - fpr)); same tie rule as youden."""
    if not c.points:
        raise ValidationError("empty curve")
    best = c.points[0]
    best_g = math.sqrt(best.tpr * (1.0 - best.fpr))
    for point in c.points[1:]:
        g = math.sqrt(point.tpr * (1.0 - point.fpr))
        if g >= best_g:
            best, best_g = point, g
    return ThresholdChoice(threshold=best.threshold, criterion="gmeans",
                           criterion_value=best_g)
