"""Command-line front end: fit, apply, eval, simulate, run, version.

Exit codes are a stable contract: 0 on success, 2 on usage or input
validation failures, 3 on computation failures (a fit that cannot
converge, a degenerate single-class input, an unattainable resampling
target, or any failed experiment cell).  Error detail goes to standard
error; reports and fitted parameters go to standard output or the
requested files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from ._version import __version__
from .calibrate import (FitOptions, apply_map, deserialize_map, fit_beta,
                        fit_platt, fit_spline, log_likelihood, serialize_map)
from .core import (ComputationError, ValidationError, load_scores_csv,
                   save_scores_csv)
from .experiment import (ExperimentConfig, load_config, metric_summary,
                         run_experiment)
from .metrics import (ThresholdChoice, confusion_at, ece, gmeans_threshold,
                      mce, optimal_threshold_pr, pr_curve, reliability_bins,
                      roc_curve, youden_threshold)
from .simlab import SynthSpec, save_truth_csv, synth_scores
from .svg import emit_pr_svg, emit_reliability_svg

_FITTERS = {"platt": fit_platt, "beta": fit_beta, "spline": fit_spline}


def _bool_text(flag: bool) -> str:
    return "true" if flag else "false"


def _cmd_fit(args: argparse.Namespace) -> int:
    scores = load_scores_csv(args.input)
    opts = FitOptions(epsilon=args.epsilon,
                      platt_target_smoothing=not args.no_target_smoothing,
                      spline_knot_count=args.knots,
                      cv_folds=args.folds,
                      seed=args.seed)
    fitted = _FITTERS[args.method](scores, opts)
    Path(args.output).write_text(serialize_map(fitted), encoding="utf-8")
    if fitted.variant == "platt":
        print(f"platt: alpha={fitted.alpha!r} beta_coef={fitted.beta_coef!r}")
    elif fitted.variant == "beta":
        print(f"beta: a={fitted.a!r} b={fitted.b!r} c={fitted.c!r}")
    else:
        print(f"spline: knots={len(fitted.knots)} "
              f"lambda={fitted.smoothing_lambda!r}")
    print(f"monotone_verified: {_bool_text(fitted.monotone_verified)}")
    print(f"fit log-likelihood: {log_likelihood(fitted, scores)!r}")
    print(f"wrote {args.output}")
    return 0


def _cmd_apply(args: argparse.Namespace) -> int:
    try:
        map_text = Path(args.map).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read map file: {exc}") from None
    fitted = deserialize_map(map_text)
    scores = load_scores_csv(args.input)
    recalibrated = scores.with_scores(apply_map(fitted, scores.scores))
    save_scores_csv(recalibrated, args.output)
    print(f"wrote {len(recalibrated)} records to {args.output}")
    return 0


def _na(value):
    return "NA" if value is None else value


def _cmd_eval(args: argparse.Namespace) -> int:
    scores = load_scores_csv(args.input)
    curve = pr_curve(scores)
    roc = roc_curve(scores)
    if args.threshold_policy:
        choice = {
            "pr_fmax": optimal_threshold_pr(curve),
            "youden": youden_threshold(roc),
            "gmeans": gmeans_threshold(roc),
        }[args.threshold_policy]
    else:
        threshold = 0.5 if args.threshold is None else args.threshold
        if not (0.0 <= threshold <= 1.0):
            raise ValidationError("threshold must lie in [0, 1]")
        choice = ThresholdChoice(threshold=threshold, criterion="fixed",
                                 criterion_value=math.nan)
    bins = reliability_bins(scores, args.bins)
    cm = confusion_at(scores, choice.threshold)
    values, intervals = metric_summary(scores, choice.threshold,
                                       args.ci_level, args.ci)
    report: dict = {
        "input": scores.name,
        "n": len(scores),
        "positives": scores.positive_count,
        "negatives": scores.negative_count,
        "threshold": choice.threshold,
        "threshold_criterion": choice.criterion,
        "confusion": {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn},
        "bins": args.bins,
        "ece": ece(bins),
        "mce": mce(bins),
        "auprc": curve.auprc,
        "auroc": roc.auroc,
        "ci_method": args.ci,
        "ci_level": args.ci_level,
    }
    for name, value in values.items():
        report[name] = _na(value)
        iv = intervals[name]
        report[f"{name}_ci"] = [iv.lower, iv.upper] if iv else "NA"
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if args.svg_dir:
        svg_dir = Path(args.svg_dir)
        svg_dir.mkdir(parents=True, exist_ok=True)
        emit_reliability_svg(bins, svg_dir / "reliability.svg",
                             title=scores.name)
        emit_pr_svg(curve, choice, svg_dir / "pr_curve.svg",
                    title=scores.name)
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    coefficients = ()
    if args.coefficients:
        try:
            coefficients = tuple(float(v) for v in args.coefficients.split(":"))
        except ValueError:
            raise ValidationError(
                "coefficients must be colon-separated numbers, "
                "e.g. 0:1.2:0:0.05") from None
    spec = SynthSpec(n=args.n, low=args.low, high=args.high,
                     distortion=args.distortion, g=args.g, d=args.d,
                     coefficients=coefficients,
                     positive_rate_target=args.target, seed=args.seed)
    scores, truth = synth_scores(spec)
    save_scores_csv(scores, args.output)
    if args.truth:
        save_truth_csv(scores, truth, args.truth)
    print(f"wrote {len(scores)} records to {args.output} "
          f"(positives {scores.positive_count}, "
          f"negatives {scores.negative_count})")
    if args.truth:
        print(f"wrote true probabilities to {args.truth}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, output_dir=args.output_dir)
    report = run_experiment(cfg)
    out_dir = Path(cfg.output_dir)
    print(f"rows: {len(report['rows'])}")
    print(f"report: {out_dir / 'report.json'}")
    print(f"csv: {out_dir / 'report.csv'}")
    failures = report["failures"]
    if failures:
        for failure in failures:
            print(f"failed cell source={failure['source']} "
                  f"percent={failure['percent']} "
                  f"calibrator={failure['calibrator']}: {failure['error']}",
                  file=sys.stderr)
        print(f"error: {len(failures)} cell(s) failed", file=sys.stderr)
        return 3
    return 0


def _cmd_version(args: argparse.Namespace) -> int:
    print(__version__)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calibkit",
        description="Probability calibration toolkit: fit calibration maps, "
                    "evaluate calibration and classification metrics, and "
                    "run imbalance x calibrator x threshold experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a calibration map to a score CSV")
    p_fit.add_argument("--method", required=True, choices=sorted(_FITTERS))
    p_fit.add_argument("--input", required=True, help="scores CSV (id,score,label)")
    p_fit.add_argument("--output", required=True, help="calibration map JSON")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--epsilon", type=float, default=1e-6)
    p_fit.add_argument("--knots", type=int, default=None,
                       help="spline knot count (default: data-driven)")
    p_fit.add_argument("--folds", type=int, default=5,
                       help="spline cross-validation folds")
    p_fit.add_argument("--no-target-smoothing", action="store_true",
                       help="platt: fit raw 0/1 labels instead of smoothed targets")
    p_fit.set_defaults(handler=_cmd_fit)

    p_apply = sub.add_parser("apply", help="recalibrate a score CSV with a map")
    p_apply.add_argument("--map", required=True, help="calibration map JSON")
    p_apply.add_argument("--input", required=True)
    p_apply.add_argument("--output", required=True)
    p_apply.set_defaults(handler=_cmd_apply)

    p_eval = sub.add_parser("eval", help="evaluate calibration and "
                                         "classification metrics")
    p_eval.add_argument("--input", required=True)
    group = p_eval.add_mutually_exclusive_group()
    group.add_argument("--threshold", type=float, default=None,
                       help="fixed operating threshold (default 0.5)")
    group.add_argument("--threshold-policy",
                       choices=("pr_fmax", "youden", "gmeans"),
                       help="derive the threshold from the named criterion")
    p_eval.add_argument("--bins", type=int, default=10)
    p_eval.add_argument("--ci", choices=("wilson", "wald"), default="wilson")
    p_eval.add_argument("--ci-level", type=float, default=0.95)
    p_eval.add_argument("--output", default=None,
                        help="write the JSON report here instead of stdout")
    p_eval.add_argument("--svg-dir", default=None,
                        help="also write reliability.svg and pr_curve.svg")
    p_eval.set_defaults(handler=_cmd_eval)

    p_sim = sub.add_parser("simulate", help="generate a synthetic score CSV "
                                            "with known true probabilities")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--low", type=float, default=0.02)
    p_sim.add_argument("--high", type=float, default=0.98)
    p_sim.add_argument("--distortion", default="none",
                       choices=("none", "affine_logit", "cubic_logit"))
    p_sim.add_argument("--g", type=float, default=1.0,
                       help="affine_logit gain (> 0)")
    p_sim.add_argument("--d", type=float, default=0.0,
                       help="affine_logit offset")
    p_sim.add_argument("--coefficients", default=None,
                       help="cubic_logit coefficients c0:c1:c2:c3")
    p_sim.add_argument("--target", type=float, default=None,
                       help="thin to this positive fraction (within 0.01)")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--output", required=True)
    p_sim.add_argument("--truth", default=None,
                       help="also write an id,true_p sidecar CSV")
    p_sim.set_defaults(handler=_cmd_simulate)

    p_run = sub.add_parser("run", help="run an experiment grid from a config")
    p_run.add_argument("--config", required=True,
                       help="flat key=value or JSON config file")
    p_run.add_argument("--output-dir", default=None,
                       help="override the config's output_dir")
    p_run.set_defaults(handler=_cmd_run)

    p_version = sub.add_parser("version", help="print the toolkit version")
    p_version.set_defaults(handler=_cmd_version)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ComputationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "run_experiment", "ExperimentConfig"]
