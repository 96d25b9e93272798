"""Scored-prediction containers, CSV ingestion, and deterministic splits.

The CSV schema is fixed: header line exactly ``id,score,label``, LF or CRLF
line endings, no quoting (ids must not contain commas), scores as decimal
reals in [0,1], labels 0 or 1.  Parse errors cite 1-based physical line
numbers (the header is line 1).
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

HEADER = "id,score,label"


class ValidationError(ValueError):
    """Invalid input data, options, or file contents (CLI exit code 2)."""


class ComputationError(RuntimeError):
    """A well-formed computation failed, e.g. non-convergence (CLI exit 3)."""


@dataclass(frozen=True)
class ScoreRecord:
    """One scored prediction: the positive-class probability and the truth."""

    id: str
    score: float
    label: int


@dataclass(frozen=True)
class ScoreSet:
    """Immutable, ordered collection of ScoreRecords with unique ids."""

    records: tuple[ScoreRecord, ...]
    name: str = "scores"

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValidationError("empty dataset")
        n = len(self.records)
        scores = np.fromiter((r.score for r in self.records), dtype=np.float64,
                             count=n)
        labels = np.fromiter((r.label for r in self.records), dtype=np.int64,
                             count=n)
        if not np.all(np.isfinite(scores)):
            raise ValidationError("scores must be finite")
        if scores.min() < 0.0 or scores.max() > 1.0:
            raise ValidationError("scores must lie in [0, 1]")
        bad = (labels != 0) & (labels != 1)
        if bad.any():
            raise ValidationError("labels must be 0 or 1")
        ids = [r.id for r in self.records]
        if len(set(ids)) != n:
            raise ValidationError("duplicate ids in score set")
        object.__setattr__(self, "_scores", scores)
        object.__setattr__(self, "_labels", labels)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def scores(self) -> np.ndarray:
        """Scores as a read-only float64 array, in record order."""
        a = self._scores.view()  # type: ignore[attr-defined]
        a.flags.writeable = False
        return a

    @property
    def labels(self) -> np.ndarray:
        """Labels as a read-only int64 array, in record order."""
        a = self._labels.view()  # type: ignore[attr-defined]
        a.flags.writeable = False
        return a

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)

    @property
    def positive_count(self) -> int:
        return int(np.count_nonzero(self._labels))  # type: ignore[attr-defined]

    @property
    def negative_count(self) -> int:
        return len(self.records) - self.positive_count

    def subset(self, indices: Sequence[int] | np.ndarray, name: str | None = None) -> "ScoreSet":
        """New set containing the given record positions, in the given order."""
        recs = tuple(self.records[int(i)] for i in indices)
        return ScoreSet(recs, name if name is not None else self.name)

    def with_scores(self, scores: Sequence[float] | np.ndarray,
                    name: str | None = None) -> "ScoreSet":
        """Same ids/labels with replaced scores (e.g. after recalibration)."""
        if len(scores) != len(self.records):
            raise ValidationError("replacement scores must match record count")
        recs = tuple(ScoreRecord(r.id, float(z), r.label)
                     for r, z in zip(self.records, scores))
        return ScoreSet(recs, name if name is not None else self.name)


@dataclass(frozen=True)
class SplitSpec:
    """Parameters for a stratified fit/eval split."""

    fit_fraction: float
    seed: int

    def __post_init__(self) -> None:
        if not (0.0 < self.fit_fraction < 1.0):
            raise ValidationError("fit_fraction must lie strictly in (0, 1)")
        if self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")


Source = Union[str, os.PathLike, io.IOBase]


def _read_text(source) -> str:
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ValidationError(f"cannot read input: {exc}") from None
    else:
        raw = source.read()
    if isinstance(raw, bytes):
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ValidationError(f"input is not valid UTF-8: {exc}") from None
    return raw


def load_scores_csv(source: Source, name: str | None = None) -> ScoreSet:
    """Parse the ``id,score,label`` CSV schema into a ScoreSet.

    ``source`` may be a path or an open (byte or text) stream.  Every parse
    error names the offending 1-based line; the header is line 1.
    """
    text = _read_text(source)
    lines = text.splitlines()
    if not lines or lines[0] != HEADER:
        found = lines[0] if lines else "<empty file>"
        raise ValidationError(
            f"missing or incorrect header at line 1: expected '{HEADER}', "
            f"found '{found}'")

    records = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != 3:
            raise ValidationError(
                f"expected 3 fields at line {lineno}, found {len(fields)}")
        rid, score_text, label_text = fields
        if not rid:
            raise ValidationError(f"empty id at line {lineno}")
        if rid in seen:
            raise ValidationError(f"duplicate id '{rid}' at line {lineno}")
        seen.add(rid)
        try:
            score = float(score_text)
        except ValueError:
            raise ValidationError(
                f"non-numeric score at line {lineno}") from None
        if not (0.0 <= score <= 1.0):  # also rejects NaN
            raise ValidationError(f"score out of range at line {lineno}")
        if label_text == "0":
            label = 0
        elif label_text == "1":
            label = 1
        else:
            raise ValidationError(f"label not in {{0, 1}} at line {lineno}")
        records.append(ScoreRecord(rid, score, label))

    if not records:
        raise ValidationError("empty dataset")
    if name is None and isinstance(source, (str, os.PathLike)):
        name = os.path.splitext(os.path.basename(os.fspath(source)))[0]
    return ScoreSet(tuple(records), name or "scores")


def save_scores_csv(s: ScoreSet, sink) -> None:
    """Write a ScoreSet in the ingestion schema (LF endings, repr scores).

    ``repr`` emits the shortest decimal that parses back to the same float,
    so a save/load round trip is exact on (id, score, label).
    """
    lines = [HEADER]
    lines.extend(f"{r.id},{r.score!r},{r.label}" for r in s.records)
    payload = "\n".join(lines) + "\n"
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            fh.write(payload)
    elif hasattr(sink, "write"):
        try:
            sink.write(payload)
        except TypeError:
            sink.write(payload.encode("utf-8"))
    else:
        raise ValidationError("sink must be a path or a writable stream")


def stratified_split(s: ScoreSet, spec: SplitSpec) -> tuple[ScoreSet, ScoreSet]:
    """Split into (fit, eval) with per-class proportional membership.

    Algorithm (pinned for reproducibility): one numpy PCG64 generator seeded
    with ``spec.seed``; classes are processed in ascending label order; each
    class's record positions are permuted by the generator and the first
    ``round(fit_fraction * n_class)`` (round-half-even) go to the fit part.
    Both outputs preserve the input record order.
    """
    labels = s.labels
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    in_fit = np.zeros(len(s), dtype=bool)
    for cls in sorted(set(int(v) for v in np.unique(labels))):
        positions = np.nonzero(labels == cls)[0]
        n_cls = positions.size
        if n_cls < 2:
            raise ValidationError(
                f"class {cls} has fewer than 2 records; cannot split")
        k = round(spec.fit_fraction * n_cls)
        if k == 0 or k == n_cls:
            raise ValidationError(
                f"fit_fraction {spec.fit_fraction} would leave class {cls} "
                f"empty in one part")
        perm = rng.permutation(n_cls)
        in_fit[positions[perm[:k]]] = True

    fit_idx = np.nonzero(in_fit)[0]
    eval_idx = np.nonzero(~in_fit)[0]
    return (s.subset(fit_idx, f"{s.name}:fit"),
            s.subset(eval_idx, f"{s.name}:eval"))
