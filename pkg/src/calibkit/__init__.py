"""calibkit: fit and evaluate probability-calibration maps for binary
classifiers, with imbalance simulation, threshold selection, confidence
intervals, an experiment-grid runner, and dependency-free SVG plots.

``BACKEND`` reports whether the compiled kernels ("native") or the pure
NumPy fallback ("python") is active; set CALIBKIT_PURE_PYTHON=1 before
import to force the fallback.  Both produce bitwise-identical results.
"""

from ._kernels import BACKEND
from ._version import __version__
from .calibrate import (CalibrationMap, FitOptions, apply_map,
                        deserialize_map, fit_beta, fit_platt, fit_spline,
                        identity_map, is_monotone, log_likelihood,
                        serialize_map)
from .core import (ComputationError, ScoreRecord, ScoreSet, SplitSpec,
                   ValidationError, load_scores_csv, save_scores_csv,
                   stratified_split)
from .experiment import (CSV_COLUMNS, SCHEMA_VERSION, ExperimentConfig,
                         build_config, derived_seed, load_config, load_pool,
                         metric_summary, parse_config_text,
                         parse_synth_source, run_experiment)
from .metrics import (BasicMetrics, ConfusionMatrix, PRCurve, PRPoint,
                      ROCCurve, ROCPoint, ReliabilityBin, ReliabilityBins,
                      ThresholdChoice, basic_metrics, confusion_at, ece,
                      gmeans_threshold, mcc, mce, optimal_threshold_pr,
                      pr_curve, reliability_bins, roc_curve,
                      youden_threshold)
from .simlab import (ImbalanceSpec, SynthSpec, distort, make_imbalanced,
                     save_truth_csv, synth_scores)
from .stats import IntervalEstimate, normal_quantile, proportion_interval, \
    significant_difference
from .svg import emit_pr_svg, emit_reliability_svg

__all__ = [
    "__version__", "BACKEND",
    # core
    "ValidationError", "ComputationError", "ScoreRecord", "ScoreSet",
    "SplitSpec", "load_scores_csv", "save_scores_csv", "stratified_split",
    # calibrate
    "FitOptions", "CalibrationMap", "fit_platt", "fit_beta", "fit_spline",
    "apply_map", "is_monotone", "log_likelihood", "identity_map",
    "serialize_map", "deserialize_map",
    # metrics
    "ConfusionMatrix", "BasicMetrics", "PRPoint", "PRCurve", "ROCPoint",
    "ROCCurve", "ReliabilityBin", "ReliabilityBins", "ThresholdChoice",
    "confusion_at", "basic_metrics", "mcc", "pr_curve", "roc_curve",
    "reliability_bins", "ece", "mce", "optimal_threshold_pr",
    "youden_threshold", "gmeans_threshold",
    # stats
    "IntervalEstimate", "normal_quantile", "proportion_interval",
    "significant_difference",
    # simlab
    "ImbalanceSpec", "SynthSpec", "make_imbalanced", "synth_scores",
    "distort", "save_truth_csv",
    # experiment + svg
    "ExperimentConfig", "run_experiment", "load_config", "build_config",
    "parse_config_text", "load_pool", "parse_synth_source", "derived_seed",
    "metric_summary", "SCHEMA_VERSION", "CSV_COLUMNS",
    "emit_reliability_svg", "emit_pr_svg",
]
