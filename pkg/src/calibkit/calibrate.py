"""Calibration maps: sigmoid scaling, the beta family, and smoothing splines.

Three fitters share the same optimization core (damped Newton with
backtracking halving, gradient tolerance on the max-abs component):

* ``fit_platt``   — p = sigmoid(alpha + beta_coef * z), linear in the
  probability z itself.  Targets are optionally smoothed toward the class
  priors, which keeps the optimum finite on separable data.
* ``fit_beta``    — logit(p) = c + a*ln(z) - b*ln(1-z), fit as a logistic
  regression on (ln z, -ln(1-z)); a negative a or b triggers a refit with
  that feature dropped, so the returned map always has a, b >= 0 and is
  therefore nondecreasing.  (a, b, c) = (1, 1, 0) is the identity.
* ``fit_spline``  — p = sigmoid(f(z)) with f a natural cubic spline;
  maximizes the binomial log-likelihood penalized by lambda * integral of
  f''(t)^2, with lambda chosen by seeded k-fold cross-validated log-loss
  (ties prefer the larger lambda).  The constant and linear parts of f span
  the penalty's null space and are never shrunk.

Scores are clamped to [epsilon, 1 - epsilon] before any log is taken.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import _kernels
from ._version import __version__
from .core import ComputationError, ScoreSet, ValidationError

_VARIANTS = ("identity", "platt", "beta", "spline")

_DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4.0, 4.0, 17))


@dataclass(frozen=True)
class FitOptions:
    """Knobs shared by the three fitters; defaults suit typical score sets."""

    epsilon: float = 1e-6
    platt_target_smoothing: bool = True
    spline_knot_count: int | None = None
    spline_lambda_grid: tuple[float, ...] = _DEFAULT_LAMBDA_GRID
    cv_folds: int = 5
    max_iterations: int = 100
    gradient_tolerance: float = 1e-10
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.epsilon < 0.01):
            raise ValidationError("epsilon must lie strictly in (0, 0.01)")
        if self.spline_knot_count is not None and self.spline_knot_count < 4:
            raise ValidationError("spline_knot_count must be at least 4")
        grid = tuple(float(v) for v in self.spline_lambda_grid)
        if not grid:
            raise ValidationError("spline_lambda_grid must be non-empty")
        if any(v <= 0.0 for v in grid):
            raise ValidationError("spline_lambda_grid values must be positive")
        if any(grid[i] >= grid[i + 1] for i in range(len(grid) - 1)):
            raise ValidationError("spline_lambda_grid must be strictly ascending")
        object.__setattr__(self, "spline_lambda_grid", grid)
        if self.cv_folds < 2:
            raise ValidationError("cv_folds must be at least 2")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be at least 1")
        if self.gradient_tolerance <= 0.0:
            raise ValidationError("gradient_tolerance must be positive")
        if self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")


@dataclass(frozen=True)
class CalibrationMap:
    """A fitted (or hand-built) score-to-probability map.

    Exactly one parameter group is populated, per ``variant``:
    platt (alpha, beta_coef); beta (a, b, c); spline (knots,
    basis_coefficients, smoothing_lambda).  ``epsilon`` is the clamp margin
    applied to inputs of the log-based variants.
    """

    variant: str
    epsilon: float = 1e-6
    monotone_verified: bool = True
    alpha: float | None = None
    beta_coef: float | None = None
    a: float | None = None
    b: float | None = None
    c: float | None = None
    knots: tuple[float, ...] | None = None
    basis_coefficients: tuple[float, ...] | None = None
    smoothing_lambda: float | None = None

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS:
            raise ValidationError(f"unknown variant '{self.variant}'")
        if not (0.0 < self.epsilon < 0.01):
            raise ValidationError("epsilon must lie strictly in (0, 0.01)")
        needed = {
            "identity": (),
            "platt": ("alpha", "beta_coef"),
            "beta": ("a", "b", "c"),
            "spline": ("knots", "basis_coefficients", "smoothing_lambda"),
        }[self.variant]
        for field_name in needed:
            if getattr(self, field_name) is None:
                raise ValidationError(
                    f"{self.variant} map requires field '{field_name}'")
        if self.variant == "beta" and (self.a < 0.0 or self.b < 0.0):
            raise ValidationError(
                "beta map requires a >= 0 and b >= 0 (monotone family)")
        if self.variant == "spline":
            object.__setattr__(self, "knots",
                               tuple(float(v) for v in self.knots))
            object.__setattr__(self, "basis_coefficients",
                               tuple(float(v) for v in self.basis_coefficients))
            k = self.knots
            if len(k) < 4:
                raise ValidationError("spline map requires at least 4 knots")
            if len(self.basis_coefficients) != len(k):
                raise ValidationError(
                    "spline map needs one coefficient per knot")
            if any(k[i] >= k[i + 1] for i in range(len(k) - 1)):
                raise ValidationError("spline knots must be strictly ascending")
            if k[0] <= 0.0 or k[-1] >= 1.0:
                raise ValidationError("spline knots must lie strictly in (0, 1)")
            if self.smoothing_lambda < 0.0:
                raise ValidationError("smoothing_lambda must be nonnegative")


def identity_map(epsilon: float = 1e-6) -> CalibrationMap:
    return CalibrationMap(variant="identity", epsilon=epsilon)


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class _NoConvergence(Exception):
    def __init__(self, grad_norm: float, reason: str) -> None:
        super().__init__(reason)
        self.grad_norm = grad_norm
        self.reason = reason


def _newton_max(X: np.ndarray, t: np.ndarray, opts: FitOptions,
                lam: float = 0.0, gram: np.ndarray | None = None):
    """Maximize sum(t*eta - log(1+e^eta)) - lam*w'Gw over w, eta = X @ w.

    Damped Newton: full step, halved until the objective does not decrease.
    Returns (w, objective, grad_max_abs); raises _NoConvergence otherwise.
    """

    def objective(w: np.ndarray):
        eta = X @ w
        val = float(eta @ t - np.logaddexp(0.0, eta).sum())
        if gram is not None:
            val -= lam * float(w @ gram @ w)
        return val, eta

    w = np.zeros(X.shape[1])
    value, eta = objective(w)
    grad_norm = math.inf
    best_grad = math.inf
    stalled = 0
    for _ in range(opts.max_iterations):
        p = _sigmoid(eta)
        grad = X.T @ (t - p)
        if gram is not None:
            grad -= 2.0 * lam * (gram @ w)
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= opts.gradient_tolerance:
            return w, value, grad_norm
        progressing = grad_norm <= 0.5 * best_grad
        best_grad = min(best_grad, grad_norm)
        weights = p * (1.0 - p)
        hess = (X * weights[:, None]).T @ X
        if gram is not None:
            hess = hess + 2.0 * lam * gram
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise _NoConvergence(grad_norm, "singular curvature matrix") from None
        if not np.all(np.isfinite(step)):
            raise _NoConvergence(grad_norm, "non-finite update step") from None
        # Near the optimum the true per-step gain sinks below the
        # objective's own rounding noise, so insisting on a measured
        # increase would reject genuine Newton steps; accept within slack.
        slack = 1e-12 * (1.0 + abs(value))
        scale = 1.0
        for _ in range(60):
            new_value, new_eta = objective(w + scale * step)
            if math.isfinite(new_value) and new_value >= value - slack:
                break
            scale *= 0.5
        else:
            raise _NoConvergence(
                grad_norm, "backtracking could not improve the likelihood")
        # Flat objective on its own is normal endgame behavior, but when
        # the gradient has also stopped shrinking the iteration is pinned
        # at an ill-conditioned noise floor and will not recover.
        if new_value <= value + slack and not progressing:
            stalled += 1
            if stalled >= 3:
                raise _NoConvergence(
                    grad_norm, "iteration stalled at numerical precision")
        else:
            stalled = 0
        w = w + scale * step
        value, eta = new_value, new_eta
    raise _NoConvergence(
        grad_norm,
        f"gradient tolerance not reached in {opts.max_iterations} iterations")


def _clamped_scores(s: ScoreSet, eps: float) -> np.ndarray:
    return np.clip(np.ascontiguousarray(s.scores, dtype=np.float64),
                   eps, 1.0 - eps)


def _require_both_classes(s: ScoreSet, method: str) -> None:
    if s.positive_count == 0 or s.negative_count == 0:
        raise ComputationError(f"{method} fit degenerate: single class")


def fit_platt(fit: ScoreSet, opts: FitOptions = FitOptions()) -> CalibrationMap:
    """Maximum-likelihood sigmoid rescaling p = sigmoid(alpha + beta_coef*z).

    With ``platt_target_smoothing`` on (default), labels are replaced by the
    smoothed targets (N+ + 1)/(N+ + 2) and 1/(N- + 2), which regularizes the
    fit and keeps separable data from driving beta_coef unbounded.
    """
    _require_both_classes(fit, "platt")
    z = _clamped_scores(fit, opts.epsilon)
    y = fit.labels.astype(np.float64)
    if opts.platt_target_smoothing:
        n_pos = fit.positive_count
        n_neg = fit.negative_count
        t_pos = (n_pos + 1.0) / (n_pos + 2.0)
        t_neg = 1.0 / (n_neg + 2.0)
        t = np.where(y == 1.0, t_pos, t_neg)
    else:
        t = y
    X = np.column_stack([np.ones_like(z), z])
    try:
        w, _, _ = _newton_max(X, t, opts)
    except _NoConvergence as exc:
        raise ComputationError(
            f"platt fit failed to converge: {exc.reason} "
            f"(final gradient max-abs {exc.grad_norm:.3e})") from None
    return CalibrationMap(variant="platt", epsilon=opts.epsilon,
                          monotone_verified=bool(w[1] >= 0.0),
                          alpha=float(w[0]), beta_coef=float(w[1]))


def fit_beta(fit: ScoreSet, opts: FitOptions = FitOptions()) -> CalibrationMap:
    """Beta-family calibration via logistic MLE on (ln z, -ln(1-z)).

    A negative coefficient would make the map non-monotone, so the offending
    feature is dropped and the model refit (that coefficient becomes 0); the
    result always satisfies a, b >= 0.
    """
    _require_both_classes(fit, "beta")
    z = _clamped_scores(fit, opts.epsilon)
    y = fit.labels.astype(np.float64)
    x1 = np.log(z)
    x2 = -np.log1p(-z)

    def solve(columns: list[np.ndarray]) -> np.ndarray:
        X = np.column_stack([np.ones_like(z)] + columns)
        try:
            w, _, _ = _newton_max(X, y, opts)
        except _NoConvergence as exc:
            raise ComputationError(
                f"beta fit failed to converge: {exc.reason} "
                f"(final gradient max-abs {exc.grad_norm:.3e})") from None
        return w

    w = solve([x1, x2])
    c, a, b = float(w[0]), float(w[1]), float(w[2])
    if a < 0.0:
        w = solve([x2])
        c, a, b = float(w[0]), 0.0, float(w[1])
        if b < 0.0:
            c, b = float(solve([])[0]), 0.0
    elif b < 0.0:
        w = solve([x1])
        c, a, b = float(w[0]), float(w[1]), 0.0
        if a < 0.0:
            c, a = float(solve([])[0]), 0.0
    return CalibrationMap(variant="beta", epsilon=opts.epsilon,
                          monotone_verified=True, a=a, b=b, c=c)


def _default_knot_count(distinct_scores: int) -> int:
    return min(20, max(4, distinct_scores // 10))


def _basis_second_derivative(x: np.ndarray, knots: np.ndarray) -> np.ndarray:
    """Second derivative of each natural-spline basis column at points x."""
    nk = knots.shape[0]
    out = np.zeros((x.shape[0], nk))
    last = knots[nk - 1]
    ramp_last = np.maximum(x - last, 0.0)
    penult = knots[nk - 2]
    d2_penult = (6.0 * np.maximum(x - penult, 0.0) - 6.0 * ramp_last) / (last - penult)
    for j in range(nk - 2):
        d2_j = (6.0 * np.maximum(x - knots[j], 0.0) - 6.0 * ramp_last) / (last - knots[j])
        out[:, j + 2] = d2_j - d2_penult
    return out


def _penalty_gram(knots: np.ndarray) -> np.ndarray:
    """Gram matrix of basis second derivatives: G[i,j] = ∫ Ni'' Nj'' dt.

    The integrands are piecewise quadratic between consecutive knots (second
    derivatives are piecewise linear) and vanish outside the knot span, so
    per-interval Simpson evaluation is exact.
    """
    nk = knots.shape[0]
    gram = np.zeros((nk, nk))
    for i in range(nk - 1):
        a, b = knots[i], knots[i + 1]
        h = b - a
        nodes = np.array([a, 0.5 * (a + b), b])
        weights = (h / 6.0, 4.0 * h / 6.0, h / 6.0)
        deriv = _basis_second_derivative(nodes, knots)
        for node_idx in range(3):
            v = deriv[node_idx]
            gram += weights[node_idx] * np.outer(v, v)
    return gram


def _fold_assignment(labels: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Per-class round-robin fold ids after a seeded per-class shuffle."""
    rng = np.random.Generator(np.random.PCG64(seed))
    fold_of = np.empty(labels.shape[0], dtype=np.int64)
    for cls in (0, 1):
        positions = np.nonzero(labels == cls)[0]
        perm = rng.permutation(positions.size)
        fold_of[positions[perm]] = np.arange(positions.size) % folds
    return fold_of


def fit_spline(fit: ScoreSet, opts: FitOptions = FitOptions()) -> CalibrationMap:
    """Penalized natural-cubic-spline calibration on the pre-sigmoid scale.

    Knots sit at equally spaced quantiles of the distinct clamped scores.
    Each lambda on the grid is scored by cross-validated log-loss with
    seeded, stratified fold assignment; lambdas whose fits do not converge
    are skipped with a warning, and ties prefer the larger (smoother) value.
    """
    _require_both_classes(fit, "spline")
    z = _clamped_scores(fit, opts.epsilon)
    y = fit.labels.astype(np.float64)
    distinct = np.unique(z)
    knot_count = (opts.spline_knot_count if opts.spline_knot_count is not None
                  else _default_knot_count(distinct.size))
    if distinct.size < knot_count + 2:
        raise ValidationError(
            f"spline fit needs at least {knot_count + 2} distinct scores, "
            f"found {distinct.size}")
    knots = np.quantile(distinct, np.linspace(0.0, 1.0, knot_count))
    if np.any(np.diff(knots) <= 0.0):
        raise ValidationError("quantile knots are not strictly ascending")

    basis = _kernels.natural_spline_basis(z, knots)
    gram = _penalty_gram(knots)
    fold_of = _fold_assignment(fit.labels, opts.cv_folds, opts.seed)
    fold_data = []
    for f in range(opts.cv_folds):
        held = fold_of == f
        fold_data.append((np.ascontiguousarray(basis[~held]), y[~held],
                          np.ascontiguousarray(basis[held]), y[held]))

    tiny = 1e-15
    best: tuple[float, float, np.ndarray] | None = None
    for lam in opts.spline_lambda_grid:
        try:
            total_nll = 0.0
            for basis_tr, y_tr, basis_va, y_va in fold_data:
                w, _, _ = _newton_max(basis_tr, y_tr, opts, lam=lam, gram=gram)
                p_va = np.clip(_sigmoid(basis_va @ w), tiny, 1.0 - tiny)
                total_nll -= float(y_va @ np.log(p_va)
                                   + (1.0 - y_va) @ np.log1p(-p_va))
            w_full, _, _ = _newton_max(basis, y, opts, lam=lam, gram=gram)
        except _NoConvergence as exc:
            warnings.warn(
                f"spline fit skipped lambda {lam:g}: {exc.reason}",
                RuntimeWarning, stacklevel=2)
            continue
        if best is None or total_nll <= best[0]:
            best = (total_nll, lam, w_full)
    if best is None:
        raise ComputationError(
            "spline fit failed to converge at every lambda on the grid")

    _, lam, coefs = best
    result = CalibrationMap(
        variant="spline", epsilon=opts.epsilon, monotone_verified=True,
        knots=tuple(float(v) for v in knots),
        basis_coefficients=tuple(float(v) for v in coefs),
        smoothing_lambda=float(lam))
    return replace(result, monotone_verified=is_monotone(result))


def apply_map(m: CalibrationMap, scores) -> np.ndarray:
    """Apply the map elementwise; positional order is preserved.

    Inputs must lie in [0, 1]; the beta and spline variants clamp them to
    [epsilon, 1 - epsilon] before taking logs / evaluating the basis.
    Output is a float64 array within [0, 1].
    """
    z = np.atleast_1d(np.asarray(scores, dtype=np.float64))
    if z.size and (not np.all(np.isfinite(z)) or z.min() < 0.0 or z.max() > 1.0):
        raise ValidationError("scores to calibrate must lie in [0, 1]")
    if m.variant == "identity":
        return z.copy()
    if m.variant == "platt":
        return _sigmoid(m.alpha + m.beta_coef * z)
    zc = np.clip(z, m.epsilon, 1.0 - m.epsilon)
    if m.variant == "beta":
        eta = m.c + m.a * np.log(zc) - m.b * np.log1p(-zc)
        return _sigmoid(eta)
    basis = _kernels.natural_spline_basis(
        np.ascontiguousarray(zc), np.asarray(m.knots, dtype=np.float64))
    return _sigmoid(basis @ np.asarray(m.basis_coefficients, dtype=np.float64))


def is_monotone(m: CalibrationMap, grid_size: int = 4097) -> bool:
    """True iff the map is nondecreasing on an even grid over [0, 1].

    Differences down to -1e-12 are tolerated as floating noise.
    """
    if grid_size < 2:
        raise ValidationError("grid_size must be at least 2")
    values = apply_map(m, np.linspace(0.0, 1.0, grid_size))
    return bool(np.all(np.diff(values) >= -1e-12))


def log_likelihood(m: CalibrationMap, s: ScoreSet) -> float:
    """Bernoulli log-likelihood of the labels under the mapped scores.

    Probabilities are clamped to [1e-15, 1 - 1e-15] so label/probability
    disagreements at the boundary stay finite.
    """
    p = np.clip(apply_map(m, s.scores), 1e-15, 1.0 - 1e-15)
    y = s.labels.astype(np.float64)
    return float(y @ np.log(p) + (1.0 - y) @ np.log1p(-p))


def serialize_map(m: CalibrationMap) -> str:
    """Render a map as a JSON document that round-trips exactly.

    Floats are written with repr semantics (shortest decimal that parses
    back to the identical double).
    """
    doc: dict = {
        "variant": m.variant,
        "epsilon": m.epsilon,
        "monotone_verified": m.monotone_verified,
        "toolkit_version": __version__,
    }
    if m.variant == "platt":
        doc["alpha"] = m.alpha
        doc["beta_coef"] = m.beta_coef
    elif m.variant == "beta":
        doc["a"] = m.a
        doc["b"] = m.b
        doc["c"] = m.c
    elif m.variant == "spline":
        doc["knots"] = list(m.knots)
        doc["basis_coefficients"] = list(m.basis_coefficients)
        doc["lambda"] = m.smoothing_lambda
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def deserialize_map(doc) -> CalibrationMap:
    """Parse ``serialize_map`` output (a str/bytes document or parsed dict)."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"calibration map is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("calibration map document must be a JSON object")
    variant = doc.get("variant")
    if variant not in _VARIANTS:
        raise ValidationError(f"unknown variant '{variant}'")

    def need(key: str):
        if key not in doc:
            raise ValidationError(f"{variant} map document missing '{key}'")
        return doc[key]

    common = {
        "epsilon": float(doc.get("epsilon", 1e-6)),
        "monotone_verified": bool(doc.get("monotone_verified", False)),
    }
    try:
        if variant == "identity":
            return CalibrationMap(variant="identity", **common)
        if variant == "platt":
            return CalibrationMap(variant="platt", alpha=float(need("alpha")),
                                  beta_coef=float(need("beta_coef")), **common)
        if variant == "beta":
            return CalibrationMap(variant="beta", a=float(need("a")),
                                  b=float(need("b")), c=float(need("c")),
                                  **common)
        return CalibrationMap(
            variant="spline",
            knots=tuple(float(v) for v in need("knots")),
            basis_coefficients=tuple(float(v) for v in
                                     need("basis_coefficients")),
            smoothing_lambda=float(need("lambda")), **common)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed calibration map document: {exc}") from None
