"""Experiment grid: imbalance x calibrator x threshold-policy sweeps.

For every (source, percent) the runner builds one Set-percent sample and
one fit/eval split, shared by ALL calibrators of that cell group so their
rows are directly comparable.  Each calibrator is fit on the fit split and
evaluated on the eval split before and after recalibration, at every
configured threshold policy; policy thresholds are derived separately from
the uncalibrated and the calibrated eval scores (a policy is a recipe, not
a number, so recalibration may legitimately move the cutoff).

Configs are flat ``key = value`` text (lists comma-separated, ``#`` lines
are comments) or a JSON object with identical keys:

    sources       (required) comma-separated source specs:
                  ``csv:PATH`` or ``synth:k=v;k=v;...`` with keys
                  n (required), low, high, distortion, g, d,
                  coefficients (colon-separated), target, seed
                  (seed defaults to a hash of the master seed + spec)
    percents      Set-N percents, default ``20, 40, 60, 80, 100``
    calibrators   subset of platt, beta, spline, none (default all)
    policies      subset of default_half, pr_fmax, youden, gmeans
                  (default ``default_half, pr_fmax``)
    bins          reliability bin count, default 10
    ci_level      default 0.95
    ci_method     wilson or wald, default wilson
    fit_fraction  fit-split share, default 0.5
    seed          master seed, default 0
    output_dir    where report.json / report.csv / plots/ go

Pools are balanced before Set-percent construction by trimming the larger
class to the smaller one's size (earliest records win), so the percent
parameter has its exact all-negatives-kept meaning for any input.

Determinism: every random draw is seeded by sha256(master seed + a cell
key), so reports are byte-identical across reruns, execution orders, and
worker counts (CALIBKIT_THREADS); the only run-varying output is the
single ``generated_at`` field.  Proportion confidence intervals use the
natural denominator per metric (total n for accuracy and F, predicted
positives for precision, actual positives for recall, total n for a
nonnegative MCC); an undefined metric or a negative MCC gets "NA" in
place of an interval.  The per-metric ``*_significant`` flag is strict
CI non-overlap of the before and after intervals.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ._version import __version__
from .calibrate import (FitOptions, apply_map, fit_beta, fit_platt,
                        fit_spline, identity_map)
from .core import (ComputationError, ScoreSet, SplitSpec, ValidationError,
                   load_scores_csv, stratified_split)
from .metrics import (basic_metrics, confusion_at, ece, gmeans_threshold,
                      mcc, mce, optimal_threshold_pr, pr_curve,
                      reliability_bins, roc_curve, youden_threshold)
from .simlab import ImbalanceSpec, SynthSpec, make_imbalanced, synth_scores
from .stats import proportion_interval, significant_difference
from .svg import emit_pr_svg, emit_reliability_svg

SCHEMA_VERSION = 1

_CALIBRATORS = ("platt", "beta", "spline", "none")
_POLICIES = ("default_half", "pr_fmax", "youden", "gmeans")
_METRICS = ("accuracy", "precision", "recall", "fscore", "mcc")

CSV_COLUMNS = tuple(
    ["source", "percent", "calibrator", "policy",
     "n_fit", "n_eval", "eval_positives", "eval_negatives",
     "monotone_verified", "threshold_before", "threshold_after",
     "ece_before", "ece_after", "mce_before", "mce_after",
     "auprc_before", "auprc_after", "auroc_before", "auroc_after"]
    + [f"{m}_{part}" for m in _METRICS for part in
       ("before", "ci_lower_before", "ci_upper_before",
        "after", "ci_lower_after", "ci_upper_after", "significant")])


@dataclass(frozen=True)
class ExperimentConfig:
    sources: tuple[str, ...]
    percents: tuple[int, ...] = (20, 40, 60, 80, 100)
    calibrators: tuple[str, ...] = _CALIBRATORS
    policies: tuple[str, ...] = ("default_half", "pr_fmax")
    bins: int = 10
    ci_level: float = 0.95
    ci_method: str = "wilson"
    fit_fraction: float = 0.5
    seed: int = 0
    output_dir: str = "calibkit-run"

    def __post_init__(self) -> None:
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "percents", tuple(self.percents))
        object.__setattr__(self, "calibrators", tuple(self.calibrators))
        object.__setattr__(self, "policies", tuple(self.policies))
        for label, values in (("sources", self.sources),
                              ("percents", self.percents),
                              ("calibrators", self.calibrators),
                              ("policies", self.policies)):
            if not values:
                raise ValidationError(f"{label} must not be empty")
            if len(set(values)) != len(values):
                raise ValidationError(f"{label} contains duplicates")
        for p in self.percents:
            if not isinstance(p, int) or isinstance(p, bool) or not (1 <= p <= 100):
                raise ValidationError("percents must be integers in 1..100")
        for c in self.calibrators:
            if c not in _CALIBRATORS:
                raise ValidationError(
                    f"unknown calibrator '{c}'; choose from "
                    f"{', '.join(_CALIBRATORS)}")
        for p in self.policies:
            if p not in _POLICIES:
                raise ValidationError(
                    f"unknown policy '{p}'; choose from {', '.join(_POLICIES)}")
        if self.bins < 2:
            raise ValidationError("bins must be at least 2")
        if not (0.0 < self.ci_level < 1.0):
            raise ValidationError("ci_level must lie strictly in (0, 1)")
        if self.ci_method not in ("wilson", "wald"):
            raise ValidationError("ci_method must be 'wilson' or 'wald'")
        if not (0.0 < self.fit_fraction < 1.0):
            raise ValidationError("fit_fraction must lie strictly in (0, 1)")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")


def derived_seed(master: int, *parts: str) -> int:
    """Stable 64-bit seed from the master seed and a cell key."""
    text = "|".join([str(master), *parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _parse_int(value, label: str) -> int:
    try:
        return int(str(value).strip())
    except ValueError:
        raise ValidationError(f"{label} must be an integer, got '{value}'") from None


def _parse_float(value, label: str) -> float:
    try:
        return float(str(value).strip())
    except ValueError:
        raise ValidationError(f"{label} must be a number, got '{value}'") from None


def parse_synth_source(params: str, default_seed: int = 0) -> SynthSpec:
    """Build a SynthSpec from ``k=v;k=v`` text (the part after ``synth:``)."""
    kwargs: dict = {}
    for part in params.split(";"):
        part = part.strip()
        if not part:
            continue
        key, eq, value = part.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise ValidationError(
                f"synth parameter '{part}' is not of the form key=value")
        if key == "n":
            kwargs["n"] = _parse_int(value, "synth n")
        elif key in ("low", "high", "g", "d"):
            kwargs[key] = _parse_float(value, f"synth {key}")
        elif key == "distortion":
            kwargs["distortion"] = value
        elif key == "coefficients":
            kwargs["coefficients"] = tuple(
                _parse_float(v, "synth coefficient")
                for v in value.split(":"))
        elif key == "target":
            kwargs["positive_rate_target"] = _parse_float(value, "synth target")
        elif key == "seed":
            kwargs["seed"] = _parse_int(value, "synth seed")
        else:
            raise ValidationError(f"unknown synth parameter '{key}'")
    if "n" not in kwargs:
        raise ValidationError("synth source requires n")
    kwargs.setdefault("seed", default_seed)
    return SynthSpec(**kwargs)


def load_pool(source: str, master_seed: int = 0) -> ScoreSet:
    """Materialize a source spec: ``csv:PATH`` or ``synth:k=v;...``."""
    scheme, sep, rest = source.partition(":")
    if not sep or not rest:
        raise ValidationError(
            f"source '{source}' must look like csv:PATH or synth:k=v;...")
    if scheme == "csv":
        return load_scores_csv(rest)
    if scheme == "synth":
        spec = parse_synth_source(
            rest, default_seed=derived_seed(master_seed, "source", source))
        pool, _ = synth_scores(spec)
        return pool
    raise ValidationError(f"unknown source scheme '{scheme}'")


def _balanced(pool: ScoreSet) -> ScoreSet:
    """Trim the larger class to the smaller one's size, keeping the
    earliest records, so Set-percent construction is feasible for every
    percent and percent 100 means a truly balanced set."""
    if pool.positive_count == pool.negative_count:
        return pool
    smaller = min(pool.positive_count, pool.negative_count)
    larger_label = 1 if pool.positive_count > pool.negative_count else 0
    keep = np.ones(len(pool), dtype=bool)
    positions = np.nonzero(pool.labels == larger_label)[0]
    keep[positions[smaller:]] = False
    return pool.subset(np.nonzero(keep)[0], name=f"{pool.name}:balanced")


def _source_label(source: str, index: int) -> str:
    scheme, _, rest = source.partition(":")
    stem = Path(rest).stem if scheme == "csv" else "synth"
    safe = "".join(ch if ch.isalnum() or ch in "-_" else "-" for ch in stem)
    return f"s{index}-{safe}"


def _fit_calibrator(calibrator: str, fit_set: ScoreSet,
                    opts: FitOptions):
    if calibrator == "none":
        return identity_map(opts.epsilon)
    fitter = {"platt": fit_platt, "beta": fit_beta, "spline": fit_spline}[calibrator]
    return fitter(fit_set, opts)


def _policy_threshold(policy: str, curve, roc) -> float:
    if policy == "default_half":
        return 0.5
    if policy == "pr_fmax":
        return optimal_threshold_pr(curve).threshold
    if policy == "youden":
        return youden_threshold(roc).threshold
    return gmeans_threshold(roc).threshold


def metric_summary(s: ScoreSet, threshold: float, ci_level: float = 0.95,
                   ci_method: str = "wilson"):
    """Threshold metrics with proportion CIs: (values, intervals) dicts.

    Each metric's interval uses its natural denominator (see the module
    docstring); an undefined metric, an empty denominator, or a negative
    MCC yields None in place of an interval.
    """
    cm = confusion_at(s, threshold)
    bm = basic_metrics(cm)
    values = {"accuracy": bm.accuracy, "precision": bm.precision,
              "recall": bm.recall, "fscore": bm.fscore, "mcc": mcc(cm)}
    denominators = {"accuracy": len(s), "precision": cm.tp + cm.fp,
                    "recall": cm.tp + cm.fn, "fscore": len(s),
                    "mcc": len(s)}
    intervals = {}
    for name in _METRICS:
        value = values[name]
        if value is None or denominators[name] < 1 or (
                name == "mcc" and value < 0.0):
            intervals[name] = None
        else:
            intervals[name] = proportion_interval(
                value, denominators[name], ci_level, ci_method)
    return values, intervals


def _cell_rows(cfg: ExperimentConfig, source: str, percent: int,
               calibrator: str, fit_set: ScoreSet, eval_set: ScoreSet,
               before_state, plots_dir: Path, label: str) -> list[dict]:
    ece_b, mce_b, pr_b, roc_b, thresholds_b = before_state
    opts = FitOptions(
        seed=derived_seed(cfg.seed, "fit", source, str(percent), calibrator))
    fitted = _fit_calibrator(calibrator, fit_set, opts)
    after_set = eval_set.with_scores(apply_map(fitted, eval_set.scores),
                                     name=f"{eval_set.name}:{calibrator}")
    bins_a = reliability_bins(after_set, cfg.bins)
    pr_a = pr_curve(after_set)
    roc_a = roc_curve(after_set)

    emit_reliability_svg(
        bins_a, plots_dir / f"{label}_set{percent}_{calibrator}_reliability.svg",
        title=f"{label} set{percent} {calibrator}")
    emit_pr_svg(
        pr_a, optimal_threshold_pr(pr_a),
        plots_dir / f"{label}_set{percent}_{calibrator}_pr.svg",
        title=f"{label} set{percent} {calibrator}")

    rows = []
    for policy in cfg.policies:
        thr_b = thresholds_b[policy]
        thr_a = _policy_threshold(policy, pr_a, roc_a)
        values_b, ci_b = metric_summary(eval_set, thr_b,
                                        cfg.ci_level, cfg.ci_method)
        values_a, ci_a = metric_summary(after_set, thr_a,
                                        cfg.ci_level, cfg.ci_method)
        row = {
            "source": source, "percent": percent, "calibrator": calibrator,
            "policy": policy, "n_fit": len(fit_set), "n_eval": len(eval_set),
            "eval_positives": eval_set.positive_count,
            "eval_negatives": eval_set.negative_count,
            "monotone_verified": fitted.monotone_verified,
            "threshold_before": thr_b, "threshold_after": thr_a,
            "ece_before": ece_b, "ece_after": ece(bins_a),
            "mce_before": mce_b, "mce_after": mce(bins_a),
            "auprc_before": pr_b.auprc, "auprc_after": pr_a.auprc,
            "auroc_before": roc_b.auroc, "auroc_after": roc_a.auroc,
        }
        for name in _METRICS:
            iv_b, iv_a = ci_b[name], ci_a[name]
            row[f"{name}_before"] = values_b[name]
            row[f"{name}_ci_lower_before"] = iv_b.lower if iv_b else None
            row[f"{name}_ci_upper_before"] = iv_b.upper if iv_b else None
            row[f"{name}_after"] = values_a[name]
            row[f"{name}_ci_lower_after"] = iv_a.lower if iv_a else None
            row[f"{name}_ci_upper_after"] = iv_a.upper if iv_a else None
            row[f"{name}_significant"] = (
                significant_difference(iv_b, iv_a)
                if iv_b is not None and iv_a is not None else None)
        rows.append(row)
    return rows


def _run_unit(cfg: ExperimentConfig, index: int, source: str, percent: int,
              pool: ScoreSet, plots_dir: Path):
    """All calibrators for one (source, percent); returns (rows, failures)."""
    rows: list[dict] = []
    failures: list[dict] = []
    label = _source_label(source, index)
    try:
        set_n = make_imbalanced(pool, ImbalanceSpec(
            percent, derived_seed(cfg.seed, "imbalance", source, str(percent))))
        fit_set, eval_set = stratified_split(set_n, SplitSpec(
            cfg.fit_fraction,
            derived_seed(cfg.seed, "split", source, str(percent))))
        bins_b = reliability_bins(eval_set, cfg.bins)
        pr_b = pr_curve(eval_set)
        roc_b = roc_curve(eval_set)
        thresholds_b = {policy: _policy_threshold(policy, pr_b, roc_b)
                        for policy in cfg.policies}
        before_state = (ece(bins_b), mce(bins_b), pr_b, roc_b, thresholds_b)
    except (ValidationError, ComputationError) as exc:
        failures.append({"source": source, "percent": percent,
                         "calibrator": "NA", "error": str(exc)})
        return rows, failures
    for calibrator in cfg.calibrators:
        try:
            rows.extend(_cell_rows(cfg, source, percent, calibrator,
                                   fit_set, eval_set, before_state,
                                   plots_dir, label))
        except (ValidationError, ComputationError) as exc:
            failures.append({"source": source, "percent": percent,
                             "calibrator": calibrator, "error": str(exc)})
        except Exception as exc:  # a genuine bug should still be visible
            failures.append({"source": source, "percent": percent,
                             "calibrator": calibrator,
                             "error": f"{type(exc).__name__}: {exc}"})
    return rows, failures


def _thread_cap() -> int:
    raw = os.environ.get("CALIBKIT_THREADS", "").strip()
    if not raw:
        return min(4, os.cpu_count() or 1)
    try:
        cap = int(raw)
    except ValueError:
        raise ValidationError(
            f"CALIBKIT_THREADS must be a positive integer, got '{raw}'") from None
    if cap < 1:
        raise ValidationError("CALIBKIT_THREADS must be a positive integer")
    return cap


def _best_calibrators(cfg: ExperimentConfig, rows: list[dict]) -> list[dict]:
    """Lowest ECE-after per (source, percent) among real calibrators;
    ties break in the fixed order platt < beta < spline."""
    rank = {"platt": 0, "beta": 1, "spline": 2}
    best: list[dict] = []
    for source in cfg.sources:
        for percent in cfg.percents:
            candidates = {}
            for row in rows:
                if (row["source"] == source and row["percent"] == percent
                        and row["calibrator"] in rank):
                    candidates[row["calibrator"]] = row["ece_after"]
            if not candidates:
                continue
            winner = min(candidates,
                         key=lambda c: (candidates[c], rank[c]))
            best.append({"source": source, "percent": percent,
                         "calibrator": winner,
                         "ece_after": candidates[winner]})
    return best


def _json_ready(value):
    if value is None:
        return "NA"
    return value


def _csv_ready(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run the grid; write report.json, report.csv, and plots/; return the
    report dict.  Per-cell failures are recorded, not raised."""
    out_dir = Path(cfg.output_dir)
    plots_dir = out_dir / "plots"
    plots_dir.mkdir(parents=True, exist_ok=True)

    rows: list[dict] = []
    failures: list[dict] = []
    pools: dict[int, ScoreSet] = {}
    for i, source in enumerate(cfg.sources):
        try:
            pools[i] = _balanced(load_pool(source, cfg.seed))
        except (ValidationError, ComputationError) as exc:
            failures.append({"source": source, "percent": "NA",
                             "calibrator": "NA", "error": str(exc)})

    units = [(i, source, percent)
             for i, source in enumerate(cfg.sources) if i in pools
             for percent in cfg.percents]
    with ThreadPoolExecutor(max_workers=_thread_cap()) as pool_exec:
        futures = [pool_exec.submit(_run_unit, cfg, i, source, percent,
                                    pools[i], plots_dir)
                   for i, source, percent in units]
        for future in futures:
            unit_rows, unit_failures = future.result()
            rows.extend(unit_rows)
            failures.extend(unit_failures)

    report = {
        "schema_version": SCHEMA_VERSION,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "toolkit_version": __version__,
        "config": asdict(cfg),
        "rows": [{k: _json_ready(v) for k, v in row.items()} for row in rows],
        "best_calibrators": _best_calibrators(cfg, rows),
        "failures": failures,
    }
    json_text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    (out_dir / "report.json").write_text(json_text, encoding="utf-8")

    with open(out_dir / "report.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_csv_ready(row[col]) for col in CSV_COLUMNS])
    return report


def parse_config_text(text: str) -> dict:
    """Raw key/value mapping from flat ``key = value`` or JSON text."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            mapping = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from None
        if not isinstance(mapping, dict):
            raise ValidationError("JSON config must be an object")
        return mapping
    mapping = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ValidationError(
                f"config line {lineno} is not of the form key = value")
        mapping[key.strip()] = value.strip()
    return mapping


_LIST_KEYS = ("sources", "calibrators", "policies")


def build_config(mapping: dict, output_dir: str | None = None) -> ExperimentConfig:
    """Typed ExperimentConfig from a raw mapping (flat-file or JSON)."""
    known = {"sources", "percents", "calibrators", "policies", "bins",
             "ci_level", "ci_method", "fit_fraction", "seed", "output_dir"}
    unknown = set(mapping) - known
    if unknown:
        raise ValidationError(
            f"unknown config keys: {', '.join(sorted(unknown))}")
    if "sources" not in mapping:
        raise ValidationError("config requires a sources entry")
    kwargs: dict = {}
    for key in _LIST_KEYS:
        if key in mapping:
            value = mapping[key]
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            kwargs[key] = tuple(str(v) for v in value)
    if "percents" in mapping:
        value = mapping["percents"]
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        kwargs["percents"] = tuple(_parse_int(v, "percents entry")
                                   for v in value)
    if "bins" in mapping:
        kwargs["bins"] = _parse_int(mapping["bins"], "bins")
    if "ci_level" in mapping:
        kwargs["ci_level"] = _parse_float(mapping["ci_level"], "ci_level")
    if "ci_method" in mapping:
        kwargs["ci_method"] = str(mapping["ci_method"]).strip()
    if "fit_fraction" in mapping:
        kwargs["fit_fraction"] = _parse_float(mapping["fit_fraction"],
                                              "fit_fraction")
    if "seed" in mapping:
        kwargs["seed"] = _parse_int(mapping["seed"], "seed")
    if output_dir is not None:
        kwargs["output_dir"] = output_dir
    elif "output_dir" in mapping:
        kwargs["output_dir"] = str(mapping["output_dir"]).strip()
    return ExperimentConfig(**kwargs)


def load_config(path, output_dir: str | None = None) -> ExperimentConfig:
    """Read and validate a config file (flat key=value or JSON)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config file: {exc}") from None
    return build_config(parse_config_text(text), output_dir=output_dir)


__all__ = [
    "ExperimentConfig", "run_experiment", "load_config", "build_config",
    "parse_config_text", "parse_synth_source", "load_pool", "derived_seed",
    "metric_summary", "SCHEMA_VERSION", "CSV_COLUMNS",
]
