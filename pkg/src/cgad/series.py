"""Multivariate time-series data model: CSV ingestion, min-max scaling,
train/validation splitting and sliding-window extraction."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DimensionError, ParseError


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultivariateSeries:
    """N aligned sensor channels over T timestamps, optionally labeled.

    ``values`` has shape (N, T); ``labels``, when present, has length T with
    entries in {0, 1}. Instances are immutable and safe to share.
    """

    values: np.ndarray
    sensor_names: tuple[str, ...]
    labels: np.ndarray | None = None
    t0: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DimensionError(f"values must be 2-D (N, T), got ndim={values.ndim}")
        n, t = values.shape
        if n < 1 or t < 1:
            raise DimensionError(f"need N >= 1 and T >= 1, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ArgumentError("series values must all be finite")
        if len(self.sensor_names) != n:
            raise DimensionError(
                f"{len(self.sensor_names)} sensor names for {n} rows"
            )
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "sensor_names", tuple(self.sensor_names))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (t,):
                raise DimensionError(
                    f"labels length {labels.shape} does not match T={t}"
                )
            if not np.isin(labels, (0, 1)).all():
                raise ArgumentError("labels must contain only 0 and 1")
            object.__setattr__(self, "labels", _readonly(labels))

    @property
    def n_sensors(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-sensor extrema fitted on training data."""

    per_sensor_min: np.ndarray
    per_sensor_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.per_sensor_min, dtype=np.float64)
        hi = np.asarray(self.per_sensor_max, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("min/max must be 1-D arrays of equal length")
        if (lo > hi).any():
            raise ArgumentError("per-sensor min may not exceed max")
        object.__setattr__(self, "per_sensor_min", _readonly(lo))
        object.__setattr__(self, "per_sensor_max", _readonly(hi))


@dataclass(frozen=True)
class WindowBatch:
    """A batch of (history window, next value) training pairs.

    ``inputs`` is (B, N, w), ``targets`` is (B, N) and ``end_times`` holds the
    0-based timestamp index of each target inside the source series.
    """

    inputs: np.ndarray
    targets: np.ndarray
    end_times: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]


def load_csv(path, label_path=None) -> MultivariateSeries:
    """Load a header-first CSV of per-timestamp sensor rows.

    The optional label file carries one 0/1 value per line and must match the
    number of data rows.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty file")
        names = tuple(h.strip() for h in header)
        if any(not n for n in names):
            raise ParseError(f"{path}: blank column name in header")
        n = len(names)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != n:
                raise ParseError(
                    f"{path}: row {lineno}: expected {n} columns, got {len(row)}"
                )
            parsed = []
            for col, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {lineno}, column {names[col]!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise ParseError(
                        f"{path}: row {lineno}, column {names[col]!r}: "
                        f"non-finite value {cell!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=np.float64).T

    labels = None
    if label_path is not None:
        labels = load_labels(label_path)
        if len(labels) != values.shape[1]:
            raise DimensionError(
                f"{label_path}: {len(labels)} labels for {values.shape[1]} rows"
            )
    return MultivariateSeries(values, names, labels)


def save_csv(series: MultivariateSeries, path) -> None:
    """Write one row per timestamp with a sensor-name header; values carry 17
    significant digits so a reload is bit-exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(series.sensor_names)
        for t in range(series.length):
            writer.writerow([f"{v:.17g}" for v in series.values[:, t]])


def save_labels(labels, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(labels, dtype=np.int64):
            fh.write(f"{v}\n")


def load_labels(path) -> np.ndarray:
    """Read one 0/1 integer per line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text not in ("0", "1"):
                raise ParseError(f"{path}: line {lineno}: expected 0 or 1, got {text!r}")
            out.append(int(text))
    return np.asarray(out, dtype=np.int64)


def fit_minmax(train: MultivariateSeries) -> NormalizationSpec:
    """Per-sensor min/max over the training values only."""
    return NormalizationSpec(train.values.min(axis=1), train.values.max(axis=1))


def apply_minmax(series: MultivariateSeries, spec: NormalizationSpec) -> MultivariateSeries:
    """Map each value to (x - min) / (max - min) with the training extrema.

    Constant sensors map to 0. Values outside the training range are not
    clamped, so test data may fall outside [0, 1].
    """
    if spec.per_sensor_min.shape[0] != series.n_sensors:
        raise DimensionError(
            f"spec for {spec.per_sensor_min.shape[0]} sensors applied to "
            f"series with {series.n_sensors}"
        )
    span = spec.per_sensor_max - spec.per_sensor_min
    safe = np.where(span > 0, span, 1.0)
    scaled = (series.values - spec.per_sensor_min[:, None]) / safe[:, None]
    scaled[span == 0, :] = 0.0
    return MultivariateSeries(scaled, series.sensor_names, series.labels, series.t0)


def split_train_val(
    series: MultivariateSeries, val_fraction: float
) -> tuple[MultivariateSeries, MultivariateSeries]:
    """Contiguous prefix/suffix split; training length = floor((1-f) * T)."""
    if not 0.0 < val_fraction < 1.0:
        raise ArgumentError(f"val_fraction must be in (0, 1), got {val_fraction}")
    t = series.length
    train_len = int(math.floor((1.0 - val_fraction) * t))
    if train_len < 1 or train_len >= t:
        raise ArgumentError(
            f"split of T={t} at val_fraction={val_fraction} leaves an empty part"
        )
    labels = series.labels

    def piece(sl, offset):
        return MultivariateSeries(
            series.values[:, sl],
            series.sensor_names,
            None if labels is None else labels[sl],
            series.t0 + offset,
        )

    return piece(slice(0, train_len), 0), piece(slice(train_len, t), train_len)


def make_windows(
    series: MultivariateSeries, w: int, batch_size: int
) -> list[WindowBatch]:
    """Sliding single-step windows, grouped into batches of at most batch_size.

    One (input, target) pair is produced for every target position
    t in [w, T-1] (0-based); the final partial batch is retained.
    """
    t = series.length
    if not 1 <= w < t:
        raise ArgumentError(f"window size w={w} must satisfy 1 <= w < T={t}")
    if batch_size < 1:
        raise ArgumentError(f"batch_size must be >= 1, got {batch_size}")
    values = series.values
    targets = np.arange(w, t)
    batches = []
    for start in range(0, len(targets), batch_size):
        idx = targets[start : start + batch_size]
        inputs = np.stack([values[:, i - w : i] for i in idx])
        batches.append(WindowBatch(inputs, values[:, idx].T.copy(), idx.copy()))
    return batches
