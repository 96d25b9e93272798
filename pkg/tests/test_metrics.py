"""Confusion metrics, curves, calibration bins, and threshold selectors.

Oracles: every sweep-based quantity is re-derived here per-threshold with
``confusion_at`` (an independent vectorized path), AUROC is checked against
an exact integer pairwise count (Mann-Whitney with ties at one half), and
the selectors are checked against explicit enumerate-all-thresholds loops.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calibkit import (ConfusionMatrix, ScoreRecord, ScoreSet, ValidationError,
                      basic_metrics, confusion_at, ece, gmeans_threshold, mcc,
                      mce, optimal_threshold_pr, pr_curve, reliability_bins,
                      roc_curve, youden_threshold)


def _set(scores, labels, name="m"):
    return ScoreSet(tuple(ScoreRecord(f"r{i}", float(s), int(y))
                          for i, (s, y) in enumerate(zip(scores, labels))),
                    name)


# The four-point reference set used throughout: sweep points
#   t=0.9  -> P=1,   R=1/2      t=0.6  -> P=1/2, R=1/2
#   t=0.35 -> P=2/3, R=1        t=0.1  -> P=1/2, R=1
FOUR = _set([0.9, 0.6, 0.35, 0.1], [1, 0, 1, 0])


# ------------------------------------------------------------------- oracles

def confusion_oracle(s, t):
    tp = fp = fn = tn = 0
    for r in s.records:
        pred = r.score >= t
        if pred and r.label == 1:
            tp += 1
        elif pred:
            fp += 1
        elif r.label == 1:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def pairwise_auroc_oracle(s):
    pos = [r.score for r in s.records if r.label == 1]
    neg = [r.score for r in s.records if r.label == 0]
    num = 0  # doubled win count
    for p in pos:
        for q in neg:
            if p > q:
                num += 2
            elif p == q:
                num += 1
    return Fraction(num, 2 * len(pos) * len(neg))


def auprc_oracle(s):
    n_pos = s.positive_count
    terms = []
    prev_recall = 0.0
    for t in sorted({r.score for r in s.records}, reverse=True):
        tp, fp, _, _ = confusion_oracle(s, t)
        precision = tp / (tp + fp)
        recall = tp / n_pos
        terms.append((recall - prev_recall) * precision)
        prev_recall = recall
    return math.fsum(terms)


def selector_oracle(s, score_fn, include_zero_endpoint):
    """Enumerate every candidate threshold; max metric, ties -> lowest t."""
    candidates = sorted({r.score for r in s.records})
    if include_zero_endpoint and candidates[0] > 0.0:
        candidates.insert(0, 0.0)
    best_t, best_v = None, None
    for t in candidates:  # ascending: later strictly-better wins, ties keep lower t
        v = score_fn(*confusion_oracle(s, t))
        if v is None:
            continue
        if best_v is None or v > best_v:
            best_t, best_v = t, v
    return best_t, best_v


def _f_of(tp, fp, fn, tn):
    if tp + fp == 0 or tp + fn == 0:
        return None
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    if precision + recall == 0.0:
        return None
    return 2 * precision * recall / (precision + recall)


def _j_of(tp, fp, fn, tn):
    return tp / (tp + fn) - fp / (fp + tn)


def _g_of(tp, fp, fn, tn):
    return math.sqrt((tp / (tp + fn)) * (tn / (fp + tn)))


def _random_sets(seed_base):
    rng = np.random.Generator(np.random.PCG64(seed_base))
    out = []
    for k in range(12):
        n = int(rng.integers(2, 120))
        if rng.random() < 0.5:
            scores = rng.choice([0.0, 0.1, 0.25, 0.5, 0.5, 0.75, 1.0], n)
        else:
            scores = rng.uniform(0, 1, n)
        labels = (rng.random(n) < 0.5).astype(int)
        if labels.sum() == 0:
            labels[0] = 1
        if labels.sum() == n:
            labels[-1] = 0
        out.append(_set(scores, labels, f"rand{k}"))
    return out


# --------------------------------------------------------------- confusion

def test_confusion_inclusive_rule_counts_threshold_scores_positive():
    s = _set([0.5, 0.5, 0.4], [1, 0, 1])
    cm = confusion_at(s, 0.5)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (1, 1, 1, 0)


def test_confusion_extremes():
    s = FOUR
    cm0 = confusion_at(s, 0.0)
    assert (cm0.tp, cm0.fp, cm0.fn, cm0.tn) == (2, 2, 0, 0)
    cm1 = confusion_at(s, 1.0)
    assert (cm1.tp, cm1.fp, cm1.fn, cm1.tn) == (0, 0, 2, 2)


def test_confusion_matches_oracle_on_random_sets():
    for s in _random_sets(100):
        for t in (0.0, 0.25, 0.5, 0.5000001, 1.0):
            cm = confusion_at(s, t)
            assert (cm.tp, cm.fp, cm.fn, cm.tn) == confusion_oracle(s, t)


def test_confusion_validation():
    with pytest.raises(ValidationError, match="threshold"):
        confusion_at(FOUR, 1.5)
    with pytest.raises(ValidationError, match="nonnegative"):
        ConfusionMatrix(-1, 0, 0, 2)
    with pytest.raises(ValidationError, match="at least one sample"):
        ConfusionMatrix(0, 0, 0, 0)


# ------------------------------------------------------------ basic metrics

def test_basic_metrics_values():
    m = basic_metrics(ConfusionMatrix(tp=2, fp=1, fn=0, tn=1))
    assert m.accuracy == pytest.approx(0.75)
    assert m.precision == pytest.approx(2 / 3)
    assert m.recall == pytest.approx(1.0)
    assert m.fscore == pytest.approx(0.8)


def test_basic_metrics_none_propagation():
    m = basic_metrics(ConfusionMatrix(tp=0, fp=0, fn=2, tn=2))
    assert m.accuracy == 0.5
    assert m.precision is None  # no predicted positives
    assert m.recall == 0.0
    assert m.fscore is None
    m = basic_metrics(ConfusionMatrix(tp=0, fp=2, fn=0, tn=2))
    assert m.recall is None  # no actual positives
    m = basic_metrics(ConfusionMatrix(tp=0, fp=1, fn=1, tn=2))
    assert m.fscore is None  # P + R == 0


def test_mcc_known_value_and_none():
    # tp=4 fp=1 fn=2 tn=3: num=4*3-1*2=10, denom=5*6*4*5=600
    assert mcc(ConfusionMatrix(4, 1, 2, 3)) == pytest.approx(
        10 / math.sqrt(600))
    assert mcc(ConfusionMatrix(0, 0, 3, 5)) is None  # tp+fp == 0
    assert mcc(ConfusionMatrix(3, 5, 0, 0)) is None  # tn+fn == 0
    assert mcc(ConfusionMatrix(2, 0, 0, 2)) == pytest.approx(1.0)
    assert mcc(ConfusionMatrix(0, 2, 2, 0)) == pytest.approx(-1.0)


def test_mcc_exact_at_huge_counts():
    # Integer arithmetic: (tp*tn - fp*fn) and the marginal product both
    # exceed 2^63; the result must still be finite and correct.
    big = 3_000_000_000
    got = mcc(ConfusionMatrix(big, 1, 1, big))
    assert got == pytest.approx(1.0, abs=1e-9)


# ------------------------------------------------------------------- curves

def test_pr_curve_four_point_fixture():
    c = pr_curve(FOUR)
    assert [p.threshold for p in c.points] == [0.9, 0.6, 0.35, 0.1, 0.0]
    assert c.points[0] == (0.9, 1.0, 0.5)
    assert c.points[2].precision == pytest.approx(2 / 3)
    assert c.points[2].recall == 1.0
    # zero endpoint copies the last sweep point's precision
    assert c.points[-1] == (0.0, 0.5, 1.0)
    assert c.auprc == pytest.approx(5 / 6, abs=1e-15)


def test_pr_curve_no_endpoint_when_zero_is_observed():
    s = _set([0.0, 0.5, 1.0], [0, 1, 1])
    c = pr_curve(s)
    assert [p.threshold for p in c.points] == [1.0, 0.5, 0.0]
    assert c.points[-1].recall == 1.0


def test_pr_curve_matches_oracle_on_random_sets():
    for s in _random_sets(200):
        c = pr_curve(s)
        assert c.auprc == pytest.approx(auprc_oracle(s), abs=1e-12)
        for p in c.points:
            if p.threshold == 0.0 and min(r.score for r in s.records) > 0.0:
                continue  # synthetic endpoint
            tp, fp, fn, _ = confusion_oracle(s, p.threshold)
            assert p.precision == pytest.approx(tp / (tp + fp), abs=1e-15)
            assert p.recall == pytest.approx(tp / (tp + fn), abs=1e-15)


def test_pr_curve_requires_a_positive():
    with pytest.raises(ValidationError, match="positive"):
        pr_curve(_set([0.2, 0.4], [0, 0]))


def test_roc_curve_fixture_and_endpoints():
    c = roc_curve(FOUR)
    assert [p.threshold for p in c.points] == [0.9, 0.6, 0.35, 0.1]
    assert c.points[0] == (0.9, 0.0, 0.5)
    assert c.points[-1] == (0.1, 1.0, 1.0)
    # pairs: (0.9 vs 0.6, 0.1) both win; (0.35 vs 0.6) lose, (0.35 vs 0.1) win
    assert c.auroc == pytest.approx(0.75)


def test_roc_auroc_equals_pairwise_count_exactly():
    for s in _random_sets(300):
        c = roc_curve(s)
        want = pairwise_auroc_oracle(s)
        assert c.auroc == want.numerator / want.denominator


def test_roc_curve_requires_both_classes():
    with pytest.raises(ValidationError, match="both classes"):
        roc_curve(_set([0.2, 0.4], [1, 1]))


def test_tied_scores_collapse_to_one_sweep_point():
    s = _set([0.5, 0.5, 0.5, 0.2], [1, 0, 1, 0])
    c = pr_curve(s)
    assert [p.threshold for p in c.points] == [0.5, 0.2, 0.0]
    assert c.points[0].precision == pytest.approx(2 / 3)
    r = roc_curve(s)
    assert [p.threshold for p in r.points] == [0.5, 0.2]
    assert r.auroc == pairwise_auroc_oracle(s)


# -------------------------------------------------------------- reliability

def test_reliability_two_bin_fixture():
    s = _set([0.3, 0.4, 0.7, 0.8], [1, 0, 1, 1])
    b = reliability_bins(s, bin_count=2)
    assert b.total == 4 and b.bin_count == 2
    lo, hi = b.bins
    assert (lo.lower, lo.upper, lo.count) == (0.0, 0.5, 2)
    assert lo.mean_score == pytest.approx(0.35)
    assert lo.observed == pytest.approx(0.5)
    assert hi.mean_score == pytest.approx(0.75)
    assert hi.observed == pytest.approx(1.0)
    assert ece(b) == pytest.approx(0.2, abs=1e-15)
    assert mce(b) == pytest.approx(0.25, abs=1e-15)


def test_reliability_zero_score_joins_first_bin():
    s = _set([0.0, 0.05, 0.95], [0, 0, 1])
    b = reliability_bins(s, bin_count=10)
    assert b.bins[0].count == 2
    assert b.bins[9].count == 1


def test_reliability_boundary_scores_go_down():
    # 0.1 is the first bin's upper edge: ((0.0, 0.1] contains it.
    s = _set([0.1, 0.2], [0, 1])
    b = reliability_bins(s, bin_count=10)
    assert b.bins[0].count == 1
    assert b.bins[1].count == 1


def test_reliability_empty_bins_have_none_summaries():
    s = _set([0.05, 0.95], [0, 1])
    b = reliability_bins(s, bin_count=10)
    assert b.bins[3].count == 0
    assert b.bins[3].mean_score is None
    assert b.bins[3].observed is None


def test_reliability_label_accuracy_mode():
    # predictions at 0.5: [0, 1]; labels [1, 1] -> correct = [False, True]
    s = _set([0.3, 0.7], [1, 1])
    b = reliability_bins(s, bin_count=2, mode="label_accuracy")
    assert b.mode == "label_accuracy"
    assert b.bins[0].observed == 0.0
    assert b.bins[1].observed == 1.0


def test_reliability_validation():
    s = _set([0.5], [1])
    with pytest.raises(ValidationError, match="at least 2"):
        reliability_bins(s, bin_count=1)
    with pytest.raises(ValidationError, match="mode"):
        reliability_bins(s, mode="quantile")


def test_ece_mce_relationship_on_random_sets():
    for s in _random_sets(400):
        b = reliability_bins(s, bin_count=7)
        e, m = ece(b), mce(b)
        assert 0.0 <= e <= m <= 1.0


def test_ece_weighted_mean_matches_direct_loop():
    for s in _random_sets(500):
        b = reliability_bins(s, bin_count=5)
        want = sum(rb.count * abs(rb.observed - rb.mean_score)
                   for rb in b.bins if rb.count) / b.total
        assert ece(b) == pytest.approx(want, abs=1e-12)


# ---------------------------------------------------------------- selectors

def test_pr_fmax_fixture():
    choice = optimal_threshold_pr(pr_curve(FOUR))
    assert choice.threshold == 0.35
    assert choice.criterion == "pr_fmax"
    assert choice.criterion_value == pytest.approx(0.8)


def test_pr_fmax_tie_prefers_lower_threshold():
    # Both thresholds give identical P=R=F; the lower must win.
    s = _set([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0])
    # t=0.8: P=1,R=.5,F=2/3; t=0.6: P=.5,R=.5,F=.5; t=0.4: P=2/3,R=1,F=0.8;
    # t=0.2: P=.5,R=1,F=2/3; t=0: same as 0.2 -> unique max at 0.4
    choice = optimal_threshold_pr(pr_curve(s))
    assert choice.threshold == 0.4
    s2 = _set([0.9, 0.5], [0, 1])
    # t=0.9: F undefined (no true positives); t=0.5 and the t=0 endpoint
    # share P=.5, R=1, F=2/3 -> tie resolves to the lower threshold 0.
    choice2 = optimal_threshold_pr(pr_curve(s2))
    assert choice2.threshold == 0.0
    assert choice2.criterion_value == pytest.approx(2 / 3)


def test_selectors_match_enumeration_oracle():
    for s in _random_sets(600):
        got = optimal_threshold_pr(pr_curve(s))
        t, v = selector_oracle(s, _f_of, include_zero_endpoint=True)
        assert got.threshold == t
        assert got.criterion_value == pytest.approx(v, abs=1e-12)

        got = youden_threshold(roc_curve(s))
        t, v = selector_oracle(s, _j_of, include_zero_endpoint=False)
        assert got.threshold == t
        assert got.criterion_value == pytest.approx(v, abs=1e-12)

        got = gmeans_threshold(roc_curve(s))
        t, v = selector_oracle(s, _g_of, include_zero_endpoint=False)
        assert got.threshold == t
        assert got.criterion_value == pytest.approx(v, abs=1e-12)


def test_youden_and_gmeans_on_fixture():
    c = roc_curve(FOUR)
    y = youden_threshold(c)
    # J: 0.5-0=0.5 @0.9; 0.5-0.5=0 @0.6; 1-0.5=0.5 @0.35; 0 @0.1 -> tie, lower
    assert y.threshold == 0.35
    assert y.criterion_value == pytest.approx(0.5)
    g = gmeans_threshold(c)
    # G: sqrt(.5*1)=.707 @0.9; sqrt(.5*.5)=.5; sqrt(1*.5)=.707 @0.35 -> tie
    assert g.threshold == 0.35
    assert g.criterion_value == pytest.approx(math.sqrt(0.5))


# ------------------------------------------------------ property-based glue

score_strategy = st.one_of(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
    st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]))


@st.composite
def score_sets(draw, min_size=2):
    n = draw(st.integers(min_value=min_size, max_value=60))
    scores = draw(st.lists(score_strategy, min_size=n, max_size=n))
    labels = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    labels[0], labels[-1] = 1, 0  # both classes present
    return _set(scores, labels, "prop")


@settings(max_examples=60, deadline=None)
@given(score_sets())
def test_property_auroc_pairwise_identity(s):
    want = pairwise_auroc_oracle(s)
    assert roc_curve(s).auroc == want.numerator / want.denominator


@settings(max_examples=60, deadline=None)
@given(score_sets())
def test_property_curve_monotonicity_and_ranges(s):
    c = pr_curve(s)
    assert 0.0 <= c.auprc <= 1.0
    recalls = [p.recall for p in c.points]
    assert recalls == sorted(recalls)
    r = roc_curve(s)
    assert 0.0 <= r.auroc <= 1.0
    fprs = [p.fpr for p in r.points]
    tprs = [p.tpr for p in r.points]
    assert fprs == sorted(fprs)
    assert tprs == sorted(tprs)
    assert fprs[-1] == 1.0 and tprs[-1] == 1.0


@settings(max_examples=60, deadline=None)
@given(score_sets(), st.integers(min_value=2, max_value=20))
def test_property_bins_partition_and_bound_errors(s, bin_count):
    b = reliability_bins(s, bin_count=bin_count)
    assert sum(rb.count for rb in b.bins) == len(s)
    for rb in b.bins:
        if rb.count:
            assert rb.lower - 1e-12 <= rb.mean_score <= rb.upper + 1e-12 \
                or (rb.lower == 0.0 and rb.mean_score >= 0.0)
            assert 0.0 <= rb.observed <= 1.0
    assert ece(b) <= mce(b) + 1e-15
