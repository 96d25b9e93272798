"""Imbalance simulation and synthetic miscalibrated score generation.

``make_imbalanced`` builds the reduced-positive training sets used by the
experiment runner: all negatives are kept and exactly
``floor(percent/100 * negative_count)`` positives are drawn uniformly
without replacement.  Rounding is floor, computed in integer arithmetic.

``synth_scores`` is the ground-truth oracle: it draws a true probability p
per sample, a label ~ Bernoulli(p), and emits a score z that distorts p in
a controlled, invertible way.  Because the true p is returned alongside the
scores, calibration quality can be checked against the generating process
instead of another estimate.

Distortions (all strictly increasing maps of (0,1) onto (0,1)):

* ``none``          — z = p; the scores are perfectly calibrated.
* ``affine_logit``  — logit(z) = g * logit(p) + d with g > 0.
* ``cubic_logit``   — logit(z) = c0 + c1*u + c2*u^2 + c3*u^3 with
  u = logit(p); coefficients are ascending-power and must give a
  derivative that is positive for every real u.

When ``positive_rate_target`` is set, samples are thinned class-
conditionally (acceptance probability depends only on the label) so the
realized positive fraction lands near the target.  Given the label, the
distribution of p is untouched; only the class prior shifts — which is the
point, since a prior shift is itself a calibration distortion.  The
``truth`` values returned are always the per-sample p each label was drawn
from; under a shifted prior the population P(label=1 | z) is a tilt of
that p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (ComputationError, ScoreRecord, ScoreSet, ValidationError,
                   save_scores_csv)

_DISTORTIONS = ("none", "affine_logit", "cubic_logit")

_MAX_RESAMPLE_ROUNDS = 200


@dataclass(frozen=True)
class ImbalanceSpec:
    """Keep all negatives and percent% as many positives, chosen by seed."""

    percent: int
    seed: int

    def __post_init__(self) -> None:
        if not isinstance(self.percent, int) or isinstance(self.percent, bool):
            raise ValidationError("percent must be an integer")
        if not (1 <= self.percent <= 100):
            raise ValidationError("percent must lie in 1..100")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValidationError("seed must be a nonnegative integer")
        if self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic score set with known per-sample truth.

    ``low``/``high`` bound the uniform distribution the true probability is
    drawn from.  ``coefficients`` (cubic_logit only) are ascending powers
    of u = logit(p).  ``positive_rate_target``, when set, thins the sample
    so the realized positive fraction is within 0.01 of the target.
    """

    n: int
    low: float = 0.02
    high: float = 0.98
    distortion: str = "none"
    g: float = 1.0
    d: float = 0.0
    coefficients: tuple[float, ...] = ()
    positive_rate_target: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise ValidationError("n must be a positive integer")
        if not (0.0 < self.low < self.high < 1.0):
            raise ValidationError("need 0 < low < high < 1")
        if self.distortion not in _DISTORTIONS:
            raise ValidationError(
                f"unknown distortion '{self.distortion}'; "
                f"choose one of {', '.join(_DISTORTIONS)}")
        if self.distortion == "affine_logit" and not self.g > 0.0:
            raise ValidationError("affine_logit requires gain g > 0")
        if self.distortion == "cubic_logit":
            coefs = tuple(float(v) for v in self.coefficients)
            object.__setattr__(self, "coefficients", coefs)
            if len(coefs) != 4:
                raise ValidationError(
                    "cubic_logit requires exactly 4 coefficients (c0..c3)")
            _, c1, c2, c3 = coefs
            # Derivative 3*c3*u^2 + 2*c2*u + c1 must be positive for every
            # real u: either a genuinely cubic map with an upward derivative
            # parabola that never touches zero, or a pure positive slope.
            increasing = ((c3 > 0.0 and c2 * c2 < 3.0 * c1 * c3)
                          or (c3 == 0.0 and c2 == 0.0 and c1 > 0.0))
            if not increasing:
                raise ValidationError(
                    "cubic_logit coefficients must define a strictly "
                    "increasing map (derivative positive for all u)")
        if self.positive_rate_target is not None and not (
                0.0 < self.positive_rate_target < 1.0):
            raise ValidationError(
                "positive_rate_target must lie strictly in (0, 1)")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValidationError("seed must be a nonnegative integer")
        if self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")


def make_imbalanced(pool: ScoreSet, spec: ImbalanceSpec) -> ScoreSet:
    """Subset the pool: all negatives plus a seeded draw of positives.

    The positive count is exactly ``(percent * negative_count) // 100``;
    record fields and relative input order are untouched.  At percent 100
    on a balanced pool this keeps every record.
    """
    if pool.positive_count == 0 or pool.negative_count == 0:
        raise ValidationError("pool must contain both classes")
    keep_pos = (spec.percent * pool.negative_count) // 100
    if keep_pos == 0:
        raise ValidationError(
            f"percent {spec.percent} of {pool.negative_count} negatives "
            "leaves zero positives")
    if keep_pos > pool.positive_count:
        raise ValidationError(
            f"percent {spec.percent} needs {keep_pos} positives but the "
            f"pool has only {pool.positive_count}")
    positions = np.nonzero(pool.labels == 1)[0]
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    chosen = rng.choice(positions, size=keep_pos, replace=False)
    mask = pool.labels == 0
    mask[chosen] = True
    indices = np.nonzero(mask)[0]
    return pool.subset(indices, name=f"{pool.name}:set{spec.percent}")


def _logit(p: np.ndarray) -> np.ndarray:
    return np.log(p) - np.log1p(-p)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def distort(spec: SynthSpec, p: np.ndarray) -> np.ndarray:
    """Map true probabilities to observed scores under spec.distortion."""
    p = np.asarray(p, dtype=np.float64)
    if spec.distortion == "none":
        return p.copy()
    u = _logit(p)
    if spec.distortion == "affine_logit":
        return _sigmoid(spec.g * u + spec.d)
    c0, c1, c2, c3 = spec.coefficients
    return _sigmoid(c0 + u * (c1 + u * (c2 + u * c3)))


def _acceptance_rates(spec: SynthSpec) -> tuple[float, float]:
    """Per-class thinning probabilities that shift the positive rate.

    The base positive rate is q = E[p] = (low + high) / 2.  Accepting
    positives with probability proportional to t/q and negatives to
    (1-t)/(1-q) makes the accepted stream's expected positive rate t; the
    normalizer keeps the larger rate at exactly 1 so no draw is wasted.
    """
    t = spec.positive_rate_target
    q = 0.5 * (spec.low + spec.high)
    rate_pos = t / q
    rate_neg = (1.0 - t) / (1.0 - q)
    scale = 1.0 / max(rate_pos, rate_neg)
    return rate_pos * scale, rate_neg * scale


def synth_scores(spec: SynthSpec) -> tuple[ScoreSet, np.ndarray]:
    """Generate (scores, truth): a seeded synthetic set plus its true p.

    truth[i] is the probability record i's label was drawn from.  Output is
    a pure function of the spec.  With a positive_rate_target the generator
    thins draws class-conditionally and retries whole batches until the
    realized positive fraction is within 0.01 of the target; it gives up
    after 200 rounds (unattainable targets, e.g. tiny n).
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    kept_p: list[np.ndarray] = []
    kept_label: list[np.ndarray] = []
    kept_total = 0
    for _ in range(_MAX_RESAMPLE_ROUNDS):
        p = rng.uniform(spec.low, spec.high, spec.n)
        label = rng.random(spec.n) < p
        if spec.positive_rate_target is None:
            return _assemble(spec, p, label)
        accept_pos, accept_neg = _acceptance_rates(spec)
        keep = rng.random(spec.n) < np.where(label, accept_pos, accept_neg)
        kept_p.append(p[keep])
        kept_label.append(label[keep])
        kept_total += int(keep.sum())
        if kept_total >= spec.n:
            p_all = np.concatenate(kept_p)[:spec.n]
            label_all = np.concatenate(kept_label)[:spec.n]
            realized = float(label_all.mean())
            if abs(realized - spec.positive_rate_target) <= 0.01:
                return _assemble(spec, p_all, label_all)
            kept_p.clear()
            kept_label.clear()
            kept_total = 0
    raise ComputationError(
        f"positive_rate_target {spec.positive_rate_target} not attained "
        f"within {_MAX_RESAMPLE_ROUNDS} resampling rounds")


def _assemble(spec: SynthSpec, p: np.ndarray,
              label: np.ndarray) -> tuple[ScoreSet, np.ndarray]:
    z = distort(spec, p)
    records = tuple(
        ScoreRecord(id=f"s{i:07d}", score=float(z[i]), label=int(label[i]))
        for i in range(spec.n))
    return ScoreSet(records, name="synth"), p.copy()


def save_truth_csv(s: ScoreSet, truth, sink) -> None:
    """Write the id,true_p sidecar aligned with save_scores_csv output."""
    truth = np.asarray(truth, dtype=np.float64)
    if truth.shape != (len(s.records),):
        raise ValidationError("truth must hold one value per record")
    lines = ["id,true_p"]
    lines.extend(f"{rec.id},{float(truth[i])!r}"
                 for i, rec in enumerate(s.records))
    text = "\n".join(lines) + "\n"
    if hasattr(sink, "write"):
        sink.write(text)
    else:
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


__all__ = [
    "ImbalanceSpec", "SynthSpec", "make_imbalanced", "synth_scores",
    "distort", "save_truth_csv", "save_scores_csv",
]
