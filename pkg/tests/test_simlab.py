"""Class-imbalance subsetting and synthetic miscalibrated score generation."""

import io
import math

import numpy as np
import pytest

from calibkit import (ComputationError, ImbalanceSpec, ScoreRecord, ScoreSet,
                      SynthSpec, ValidationError, distort, load_scores_csv,
                      make_imbalanced, save_scores_csv, save_truth_csv,
                      synth_scores)


def _pool(n_neg, n_pos, name="pool", seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    recs = [ScoreRecord(f"n{i}", float(v), 0)
            for i, v in enumerate(rng.uniform(0, 1, n_neg))]
    recs += [ScoreRecord(f"p{i}", float(v), 1)
             for i, v in enumerate(rng.uniform(0, 1, n_pos))]
    order = rng.permutation(len(recs))
    return ScoreSet(tuple(recs[i] for i in order), name)


# ------------------------------------------------------------ spec validation

def test_imbalance_spec_validation():
    for pct in (0, 101, -5):
        with pytest.raises(ValidationError, match="1..100"):
            ImbalanceSpec(percent=pct, seed=0)
    with pytest.raises(ValidationError, match="integer"):
        ImbalanceSpec(percent=20.0, seed=0)
    with pytest.raises(ValidationError, match="seed"):
        ImbalanceSpec(percent=20, seed=-1)


def test_synth_spec_validation():
    with pytest.raises(ValidationError, match="positive integer"):
        SynthSpec(n=0)
    with pytest.raises(ValidationError, match="0 < low < high < 1"):
        SynthSpec(n=10, low=0.5, high=0.5)
    with pytest.raises(ValidationError, match="unknown distortion"):
        SynthSpec(n=10, distortion="gamma")
    with pytest.raises(ValidationError, match="gain g > 0"):
        SynthSpec(n=10, distortion="affine_logit", g=0.0)
    with pytest.raises(ValidationError, match="exactly 4 coefficients"):
        SynthSpec(n=10, distortion="cubic_logit", coefficients=(0, 1, 0))
    with pytest.raises(ValidationError, match="strictly in"):
        SynthSpec(n=10, positive_rate_target=0.0)
    with pytest.raises(ValidationError, match="seed"):
        SynthSpec(n=10, seed=-3)


@pytest.mark.parametrize("coefs", [
    (0, 1, 0, 0),        # pure identity slope
    (0.5, 2, 0, 0),      # affine
    (0, 1, 0.1, 0.1),    # c2^2 = .01 < 3*c1*c3 = .3
    (1, 2, 3, 4),        # 9 < 24
    (-1, 3, -0.5, 1),    # .25 < 9
])
def test_cubic_increasing_coefficients_accepted(coefs):
    spec = SynthSpec(n=10, distortion="cubic_logit", coefficients=coefs)
    assert spec.coefficients == tuple(float(v) for v in coefs)


@pytest.mark.parametrize("coefs", [
    (0, 0, 0, 1),        # derivative 3u^2 touches zero
    (0, 1, 2, 1),        # 4 >= 3
    (0, -1, 0, 0),       # negative slope
    (0, 0, 0, 0),        # flat
    (0, 1, 0.5, 0),      # linear-plus-quadratic derivative goes negative
])
def test_cubic_non_increasing_coefficients_rejected(coefs):
    with pytest.raises(ValidationError, match="strictly increasing"):
        SynthSpec(n=10, distortion="cubic_logit", coefficients=coefs)


# ------------------------------------------------------------ make_imbalanced

def test_imbalance_keeps_floor_fraction_of_negative_count():
    pool = _pool(1000, 1000)
    for pct, want in [(20, 200), (40, 400), (60, 600), (80, 800)]:
        sub = make_imbalanced(pool, ImbalanceSpec(percent=pct, seed=1))
        assert sub.positive_count == want
        assert sub.negative_count == 1000
        assert sub.name == f"pool:set{pct}"


def test_imbalance_small_pool_reference_count():
    pool = _pool(226, 226)
    sub = make_imbalanced(pool, ImbalanceSpec(percent=20, seed=2))
    assert sub.positive_count == 45  # (20 * 226) // 100
    assert sub.negative_count == 226


def test_imbalance_integer_floor_rule():
    pool = _pool(10, 10)
    sub = make_imbalanced(pool, ImbalanceSpec(percent=33, seed=0))
    assert sub.positive_count == 3


def test_imbalance_percent_100_is_identity_on_balanced_pool():
    pool = _pool(300, 300)
    sub = make_imbalanced(pool, ImbalanceSpec(percent=100, seed=5))
    assert sub.ids == pool.ids
    assert sub.scores.tolist() == pool.scores.tolist()


def test_imbalance_preserves_input_order_and_negatives():
    pool = _pool(50, 80)
    sub = make_imbalanced(pool, ImbalanceSpec(percent=50, seed=3))
    pos_in_pool = {r.id for r in pool.records if r.label == 0}
    assert pos_in_pool <= set(sub.ids)  # every negative kept
    order = {rid: i for i, rid in enumerate(pool.ids)}
    got = [order[rid] for rid in sub.ids]
    assert got == sorted(got)
    # records are untouched, not copies with altered fields
    by_id = {r.id: r for r in pool.records}
    assert all(r == by_id[r.id] for r in sub.records)


def test_imbalance_is_seeded_and_deterministic():
    pool = _pool(200, 200)
    a = make_imbalanced(pool, ImbalanceSpec(percent=30, seed=11))
    b = make_imbalanced(pool, ImbalanceSpec(percent=30, seed=11))
    c = make_imbalanced(pool, ImbalanceSpec(percent=30, seed=12))
    assert a.ids == b.ids
    assert a.ids != c.ids


def test_imbalance_errors():
    with pytest.raises(ValidationError, match="both classes"):
        make_imbalanced(_set_single_class(), ImbalanceSpec(percent=50, seed=0))
    with pytest.raises(ValidationError, match="leaves zero positives"):
        make_imbalanced(_pool(50, 50), ImbalanceSpec(percent=1, seed=0))
    with pytest.raises(ValidationError, match="needs 50 positives but"):
        make_imbalanced(_pool(100, 10), ImbalanceSpec(percent=50, seed=0))


def _set_single_class():
    return ScoreSet((ScoreRecord("a", 0.5, 0), ScoreRecord("b", 0.6, 0)), "s")


# --------------------------------------------------------------- distortions

def test_distort_none_returns_copy():
    spec = SynthSpec(n=5)
    p = np.array([0.1, 0.5, 0.9])
    out = distort(spec, p)
    assert out.tolist() == p.tolist()
    out[0] = 0.7
    assert p[0] == 0.1


def test_distort_affine_identity_when_g1_d0():
    spec = SynthSpec(n=5, distortion="affine_logit", g=1.0, d=0.0)
    p = np.linspace(0.05, 0.95, 51)
    assert distort(spec, p) == pytest.approx(p, abs=1e-12)


def test_distort_affine_pinned_values():
    up = SynthSpec(n=5, distortion="affine_logit", g=2.0, d=1.0)
    assert distort(up, np.array([0.5]))[0] == pytest.approx(
        1 / (1 + math.exp(-1.0)), abs=1e-15)
    down = SynthSpec(n=5, distortion="affine_logit", g=2.0, d=-1.0)
    assert distort(down, np.array([0.5]))[0] == pytest.approx(
        1 / (1 + math.exp(1.0)), abs=1e-15)
    # g=2 doubles the logit: p with logit 1 maps to logit 3 (d=1)
    p1 = 1 / (1 + math.exp(-1.0))
    assert distort(up, np.array([p1]))[0] == pytest.approx(
        1 / (1 + math.exp(-3.0)), abs=1e-12)


def test_distort_cubic_pinned_values():
    spec = SynthSpec(n=5, distortion="cubic_logit",
                     coefficients=(0.0, 1.0, 0.1, 0.1))
    assert distort(spec, np.array([0.5]))[0] == pytest.approx(0.5, abs=1e-15)
    p1 = 1 / (1 + math.exp(-1.0))  # u = 1 -> c = 0 + 1 + .1 + .1 = 1.2
    assert distort(spec, np.array([p1]))[0] == pytest.approx(
        1 / (1 + math.exp(-1.2)), abs=1e-12)


def test_distort_preserves_order():
    p = np.linspace(0.02, 0.98, 200)
    for spec in (SynthSpec(n=5, distortion="affine_logit", g=3.0, d=-2.0),
                 SynthSpec(n=5, distortion="cubic_logit",
                           coefficients=(1, 2, 3, 4))):
        out = distort(spec, p)
        # nondecreasing everywhere (the sigmoid saturates in float at
        # extreme logits), strictly increasing in the interior
        assert np.all(np.diff(out) >= 0)
        interior = distort(spec, np.linspace(0.3, 0.7, 100))
        assert np.all(np.diff(interior) > 0)


# -------------------------------------------------------------- synth_scores

def test_synth_scores_shape_and_alignment():
    spec = SynthSpec(n=2_000, seed=4)
    s, truth = synth_scores(spec)
    assert len(s) == 2_000
    assert s.name == "synth"
    assert s.ids[0] == "s0000000" and s.ids[-1] == "s0001999"
    assert truth.shape == (2_000,)
    assert truth.min() >= 0.02 and truth.max() <= 0.98
    # no distortion: the observed score IS the true probability
    assert s.scores.tolist() == truth.tolist()


def test_synth_scores_labels_follow_truth():
    spec = SynthSpec(n=50_000, seed=5, low=0.1, high=0.6)
    s, truth = synth_scores(spec)
    assert abs(s.positive_count / len(s) - truth.mean()) < 0.01
    # scores near 0 are mostly negative, near the top mostly positive
    lo = s.labels[s.scores < 0.2].mean()
    hi = s.labels[s.scores > 0.5].mean()
    assert lo < 0.2 and hi > 0.45


def test_synth_scores_distortion_applies_to_scores_not_truth():
    spec = SynthSpec(n=3_000, seed=6, distortion="affine_logit", g=2.0, d=1.0)
    s, truth = synth_scores(spec)
    want = distort(spec, truth)
    assert s.scores.tolist() == want.tolist()
    assert truth.max() <= 0.98  # truth stays on the base scale


def test_synth_scores_deterministic_bitwise():
    spec = SynthSpec(n=1_000, seed=9, distortion="affine_logit", g=1.5, d=0.3,
                     positive_rate_target=0.4)
    s1, t1 = synth_scores(spec)
    s2, t2 = synth_scores(spec)
    assert s1.ids == s2.ids
    assert s1.scores.tolist() == s2.scores.tolist()
    assert s1.labels.tolist() == s2.labels.tolist()
    assert t1.tolist() == t2.tolist()
    s3, _ = synth_scores(SynthSpec(n=1_000, seed=10, distortion="affine_logit",
                                   g=1.5, d=0.3, positive_rate_target=0.4))
    assert s3.scores.tolist() != s1.scores.tolist()


def test_synth_scores_hits_positive_rate_target():
    for target in (0.2, 0.5, 0.8):
        spec = SynthSpec(n=5_000, seed=7, positive_rate_target=target)
        s, truth = synth_scores(spec)
        assert len(s) == 5_000
        assert abs(s.positive_count / len(s) - target) <= 0.01
        assert truth.min() >= 0.02 and truth.max() <= 0.98


def test_synth_scores_unattainable_target_raises():
    # n=3 admits rates {0, 1/3, 2/3, 1}, never within 0.01 of 0.5
    with pytest.raises(ComputationError, match="not attained within 200"):
        synth_scores(SynthSpec(n=3, seed=0, positive_rate_target=0.5))


def test_synth_scores_round_trip_through_csv(tmp_path):
    spec = SynthSpec(n=500, seed=12, distortion="affine_logit", g=2.0, d=1.0)
    s, truth = synth_scores(spec)
    p = tmp_path / "synth.csv"
    save_scores_csv(s, p)
    back = load_scores_csv(p, name="synth")
    assert back.ids == s.ids
    assert back.scores.tolist() == s.scores.tolist()
    assert back.labels.tolist() == s.labels.tolist()


# ----------------------------------------------------------------- truth csv

def test_save_truth_csv_format_and_round_trip(tmp_path):
    s = ScoreSet((ScoreRecord("a", 0.5, 1), ScoreRecord("b", 0.25, 0)), "t")
    buf = io.StringIO()
    save_truth_csv(s, [0.625, 1 / 3], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "id,true_p"
    assert lines[1] == "a,0.625"
    rid, val = lines[2].split(",")
    assert rid == "b" and float(val) == 1 / 3  # repr round-trips exactly

    p = tmp_path / "truth.csv"
    save_truth_csv(s, [0.625, 1 / 3], p)
    assert p.read_text().splitlines()[0] == "id,true_p"


def test_save_truth_csv_shape_validation():
    s = ScoreSet((ScoreRecord("a", 0.5, 1),), "t")
    with pytest.raises(ValidationError, match="one value per record"):
        save_truth_csv(s, [0.1, 0.2], io.StringIO())
