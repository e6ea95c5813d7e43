"""Detection metrics: point-wise F1, composite F1 (event-wise recall with
point-wise precision) and point-adjusted F1."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, fields

import numpy as np

from .errors import ArgumentError, DimensionError

REPORT_FILE_TAG = "cgad-report"
REPORT_FILE_VERSION = "v1"


def _as_binary(values, name: str) -> np.ndarray:
    a = np.asarray(values, dtype=np.int64).ravel()
    if not np.isin(a, (0, 1)).all():
        raise ArgumentError(f"{name} must contain only 0 and 1")
    return a


@dataclass(frozen=True)
class LabeledRun:
    decisions: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        decisions = _as_binary(self.decisions, "decisions")
        labels = _as_binary(self.labels, "labels")
        if decisions.shape != labels.shape:
            raise DimensionError(
                f"decisions length {decisions.size} vs labels length {labels.size}"
            )
        object.__setattr__(self, "decisions", decisions)
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class PointwiseStats:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    event_recall: float
    f1_composite: float
    f1_point_adjusted: float
    gt_event_count: int
    detected_event_count: int


def segments(labels) -> list[tuple[int, int]]:
    """Maximal runs of consecutive 1s as inclusive (start, end) index pairs."""
    a = _as_binary(labels, "labels")
    if a.size == 0:
        return []
    padded = np.diff(np.concatenate(([0], a, [0])))
    starts = np.flatnonzero(padded == 1)
    ends = np.flatnonzero(padded == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def f1_pointwise(run: LabeledRun) -> PointwiseStats:
    """Per-timestamp confusion counts and the derived precision/recall/F1;
    zero denominators yield 0."""
    d = run.decisions
    l = run.labels
    tp = int(((d == 1) & (l == 1)).sum())
    fp = int(((d == 1) & (l == 0)).sum())
    fn = int(((d == 0) & (l == 1)).sum())
    tn = int(((d == 0) & (l == 0)).sum())
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    return PointwiseStats(tp, fp, fn, tn, precision, recall, f1)


def event_recall(run: LabeledRun) -> float:
    """Fraction of ground-truth segments containing at least one positive
    decision; 0 when there are no segments."""
    segs = segments(run.labels)
    if not segs:
        return 0.0
    hit = sum(1 for s, e in segs if run.decisions[s : e + 1].any())
    return hit / len(segs)


def f1_composite(run: LabeledRun) -> float:
    """Harmonic mean of point-wise precision and event-wise recall."""
    if not segments(run.labels):
        warnings.warn("no ground-truth anomaly events; composite F1 defined as 0")
        return 0.0
    p = f1_pointwise(run).precision
    re = event_recall(run)
    return _safe_div(2 * p * re, p + re)


def point_adjust(run: LabeledRun) -> np.ndarray:
    """Expand every hit inside a ground-truth segment to cover the whole
    segment; decisions outside segments are unchanged."""
    adjusted = run.decisions.copy()
    for s, e in segments(run.labels):
        if adjusted[s : e + 1].any():
            adjusted[s : e + 1] = 1
    return adjusted


def f1_point_adjusted(run: LabeledRun) -> float:
    return f1_pointwise(LabeledRun(point_adjust(run), run.labels)).f1


def evaluate(decisions, labels) -> EvalReport:
    """All metrics for one detection run."""
    run = LabeledRun(decisions, labels)
    stats = f1_pointwise(run)
    return EvalReport(
        tp=stats.tp,
        fp=stats.fp,
        fn=stats.fn,
        tn=stats.tn,
        precision=stats.precision,
        recall=stats.recall,
        f1=stats.f1,
        event_recall=event_recall(run),
        f1_composite=f1_composite(run) if segments(run.labels) else 0.0,
        f1_point_adjusted=f1_point_adjusted(run),
        gt_event_count=len(segments(run.labels)),
        detected_event_count=len(segments(run.decisions)),
    )


def load_report(text_path) -> EvalReport:
    """Inverse of :func:`save_report` for the key/value text form."""
    with open(text_path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != f"{REPORT_FILE_TAG}\t{REPORT_FILE_VERSION}":
        raise ArgumentError(f"{text_path}: missing or unsupported report header")
    if lines[-1] != "end":
        raise ArgumentError(f"{text_path}: truncated report file")
    values = dict(line.split("\t", 1) for line in lines[1:-1])
    kwargs = {}
    for f in fields(EvalReport):
        try:
            raw = values[f.name]
        except KeyError:
            raise ArgumentError(f"{text_path}: missing field {f.name}") from None
        kwargs[f.name] = int(raw) if f.type == "int" else float(raw)
    return EvalReport(**kwargs)


def save_report(report: EvalReport, text_path, csv_path=None) -> None:
    """Write the report as key/value text, optionally also as a one-row CSV."""
    lines = [f"{REPORT_FILE_TAG}\t{REPORT_FILE_VERSION}"]
    for f in fields(EvalReport):
        value = getattr(report, f.name)
        rendered = f"{value:.17g}" if isinstance(value, float) else str(value)
        lines.append(f"{f.name}\t{rendered}")
    lines.append("end")
    with open(text_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            names = [f.name for f in fields(EvalReport)]
            writer.writerow(names)
            writer.writerow(
                [
                    f"{getattr(report, n):.17g}"
                    if isinstance(getattr(report, n), float)
                    else getattr(report, n)
                    for n in names
                ]
            )
