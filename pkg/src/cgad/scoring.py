"""Anomaly scoring: absolute forecast errors, median/MAD modified z-scores,
max aggregation across nodes, and an extreme-value threshold fitted to the
peaks over an initial empirical quantile."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ArgumentError, ConfigError, DimensionError, ParseError

MAD_FLOOR = 1e-9
XI_ZERO_TOL = 1e-8

SCORES_FILE_TAG = "cgad-scores"
SCORES_FILE_VERSION = "v1"


@dataclass(frozen=True)
class PotConfig:
    initial_quantile: float = 0.98
    risk_q: float = 1e-4
    min_peaks: int = 10

    def __post_init__(self):
        if not 0.0 < self.initial_quantile < 1.0:
            raise ArgumentError(
                f"initial_quantile must be in (0, 1), got {self.initial_quantile}"
            )
        if self.risk_q <= 0:
            raise ArgumentError(f"risk_q must be > 0, got {self.risk_q}")
        if self.min_peaks < 1:
            raise ArgumentError(f"min_peaks must be >= 1, got {self.min_peaks}")


@dataclass(frozen=True)
class ScoreSeries:
    """Per-node and collective anomaly scores with threshold and decisions."""

    per_node_scores: np.ndarray
    collective: np.ndarray
    threshold: float
    decisions: np.ndarray
    per_node_median: np.ndarray
    per_node_mad: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.per_node_scores, dtype=np.float64)
        collective = np.asarray(self.collective, dtype=np.float64)
        decisions = np.asarray(self.decisions, dtype=np.int64)
        if scores.ndim != 2:
            raise DimensionError("per_node_scores must be 2-D (N, Tt)")
        if collective.shape != (scores.shape[1],) or decisions.shape != collective.shape:
            raise DimensionError("collective/decision lengths must match Tt")
        if not np.array_equal(collective, scores.max(axis=0)):
            raise ArgumentError("collective scores must be the per-timestamp maxima")
        if not np.array_equal(decisions, (collective > self.threshold).astype(np.int64)):
            raise ArgumentError("decisions must equal collective > threshold")
        object.__setattr__(self, "per_node_scores", scores)
        object.__setattr__(self, "collective", collective)
        object.__setattr__(self, "decisions", decisions)
        object.__setattr__(
            self, "per_node_median", np.asarray(self.per_node_median, dtype=np.float64)
        )
        object.__setattr__(
            self, "per_node_mad", np.asarray(self.per_node_mad, dtype=np.float64)
        )


def forecast_errors(pred, actual) -> np.ndarray:
    """Elementwise absolute difference between forecasts and observations."""
    p = np.asarray(pred, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise DimensionError(f"shape mismatch: {p.shape} vs {a.shape}")
    return np.abs(p - a)


def mad_zscore(
    errors, median: np.ndarray | None = None, mad: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Modified z-score per node: (error - median) / MAD.

    Statistics default to the given error rows; precomputed ``median``/``mad``
    (e.g. from validation errors) may be supplied instead. MAD values below
    1e-9 are replaced by 1e-9 to guard degenerate rows.
    """
    e = np.atleast_2d(np.asarray(errors, dtype=np.float64))
    if median is None:
        median = np.median(e, axis=1)
    if mad is None:
        mad = np.median(np.abs(e - median[:, None]), axis=1)
    median = np.asarray(median, dtype=np.float64)
    mad = np.asarray(mad, dtype=np.float64)
    if median.shape != (e.shape[0],) or mad.shape != (e.shape[0],):
        raise DimensionError("median/mad must have one entry per node")
    guarded = np.where(mad < MAD_FLOOR, MAD_FLOOR, mad)
    return (e - median[:, None]) / guarded[:, None], median, guarded


def collective_score(per_node_scores) -> np.ndarray:
    """Columnwise maximum across nodes."""
    scores = np.atleast_2d(np.asarray(per_node_scores, dtype=np.float64))
    return scores.max(axis=0)


def _gpd_log_likelihood(excess: np.ndarray, xi: float, sigma: float) -> float:
    n = excess.size
    if sigma <= 0 or not math.isfinite(sigma):
        return -math.inf
    if abs(xi) < XI_ZERO_TOL:
        return -n * math.log(sigma) - float(excess.sum()) / sigma
    z = 1.0 + xi * excess / sigma
    if (z <= 0).any():
        return -math.inf
    return -n * math.log(sigma) - (1.0 + 1.0 / xi) * float(np.log(z).sum())


def _fit_gpd_moments(excess: np.ndarray) -> tuple[float, float]:
    mean = float(excess.mean())
    var = float(excess.var())
    if var <= 0:
        return 0.0, max(mean, MAD_FLOOR)
    xi = 0.5 * (1.0 - mean * mean / var)
    sigma = 0.5 * mean * (mean * mean / var + 1.0)
    return xi, sigma


def _fit_gpd_grimshaw(excess: np.ndarray, n_grid: int = 48) -> tuple[float, float]:
    """Maximum-likelihood generalized Pareto fit via the one-dimensional root
    reformulation; falls back to method-of-moments if no candidate survives.

    Candidate roots of w(x) = u(x) v(x) - 1 are bracketed on log-spaced grids
    over (-1/max, 0) and (0, 2 (mean - min) / min^2]; the searched lobes can be
    narrow and close to zero, so both grids extend down to a tiny fraction of
    the data scale.
    """
    y = np.asarray(excess, dtype=np.float64)
    y_min = float(y.min())
    y_max = float(y.max())
    y_mean = float(y.mean())

    def w(x: float) -> float:
        u = float(np.mean(1.0 / (1.0 + x * y)))
        v = 1.0 + float(np.mean(np.log1p(x * y)))
        return u * v - 1.0

    def refine(grid: np.ndarray) -> list[float]:
        roots = []
        vals = [w(x) for x in grid]
        for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if fa == 0.0:
                roots.append(float(a))
            elif fa * fb < 0:
                try:
                    roots.append(float(brentq(w, a, b)))
                except (ValueError, RuntimeError):
                    continue
        return roots

    candidates: list[tuple[float, float]] = [(0.0, y_mean)]  # exponential limit
    tiny = 1e-8 / y_mean if y_mean > 0 else 1e-8
    lo_mag = 1.0 / y_max
    left = -np.geomspace(lo_mag * (1.0 - 1e-9), min(tiny, lo_mag * 1e-9), n_grid)
    hi = 2.0 * (y_mean - y_min) / (y_min * y_min) if y_min > 0 else 1.0 / y_mean
    hi = max(hi, 1.0 / y_mean)
    right = np.geomspace(tiny, hi, n_grid)
    for x in refine(left) + refine(right):
        if x == 0.0:
            continue
        v = 1.0 + float(np.mean(np.log1p(x * y)))
        xi = v - 1.0
        sigma = xi / x
        if sigma > 0 and math.isfinite(sigma):
            candidates.append((xi, sigma))

    best = None
    best_ll = -math.inf
    for xi, sigma in candidates:
        ll = _gpd_log_likelihood(y, xi, sigma)
        if ll > best_ll:
            best_ll = ll
            best = (xi, sigma)
    if best is None or not math.isfinite(best_ll):
        return _fit_gpd_moments(y)
    return best


def pot_threshold(scores, cfg: PotConfig) -> float:
    """Risk-calibrated threshold from a generalized Pareto fit to the excesses
    over the ``initial_quantile`` empirical quantile.

    With L observations and N_peaks excesses the returned threshold is the
    level exceeded with probability ``risk_q`` under the fitted tail.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    length = s.size
    needed = cfg.min_peaks / (1.0 - cfg.initial_quantile)
    if length < needed:
        raise ConfigError(
            f"need at least {math.ceil(needed)} scores for initial_quantile="
            f"{cfg.initial_quantile} and min_peaks={cfg.min_peaks}, got {length}"
        )
    u = float(np.quantile(s, cfg.initial_quantile))
    excess = s[s > u] - u
    n_peaks = excess.size
    if n_peaks < cfg.min_peaks:
        raise ConfigError(
            f"only {n_peaks} scores exceed the initial quantile (need "
            f"{cfg.min_peaks}); lower initial_quantile"
        )
    xi, sigma = _fit_gpd_grimshaw(excess)
    ratio = cfg.risk_q * length / n_peaks
    if abs(xi) < XI_ZERO_TOL:
        return u - sigma * math.log(ratio)
    return u + sigma / xi * (ratio ** (-xi) - 1.0)


def detect(collective, threshold: float) -> np.ndarray:
    """Binary decisions: 1 where the collective score strictly exceeds the
    threshold."""
    s = np.asarray(collective, dtype=np.float64)
    return (s > threshold).astype(np.int64)


def score_and_detect(
    pred,
    actual,
    pot_cfg: PotConfig,
    median: np.ndarray | None = None,
    mad: np.ndarray | None = None,
) -> ScoreSeries:
    """Full scoring pass: errors -> modified z-scores -> max aggregation ->
    threshold fit -> decisions."""
    errors = forecast_errors(pred, actual)
    scores, med, mad_values = mad_zscore(errors, median, mad)
    coll = collective_score(scores)
    tau = pot_threshold(coll, pot_cfg)
    return ScoreSeries(scores, coll, tau, detect(coll, tau), med, mad_values)


def _fmt_list(values: np.ndarray) -> str:
    return ",".join(f"{v:.17g}" for v in values)


def save_scores(
    series: ScoreSeries,
    node_names,
    time_index,
    path,
    meta: dict[str, str] | None = None,
) -> None:
    """CSV with one row per scored timestamp; the threshold and the per-node
    median/MAD statistics are recorded in header comment lines."""
    n, tt = series.per_node_scores.shape
    time_index = np.asarray(time_index, dtype=np.int64)
    if len(node_names) != n or time_index.shape != (tt,):
        raise DimensionError("node_names/time_index do not match the score shape")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {SCORES_FILE_TAG} {SCORES_FILE_VERSION}\n")
        fh.write(f"# threshold={series.threshold:.17g}\n")
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write(f"# per_node_median={_fmt_list(series.per_node_median)}\n")
        fh.write(f"# per_node_mad={_fmt_list(series.per_node_mad)}\n")
        writer = csv.writer(fh)
        writer.writerow(["time_index", *(f"a_{name}" for name in node_names), "collective", "decision"])
        for t in range(tt):
            writer.writerow(
                [
                    int(time_index[t]),
                    *(f"{v:.17g}" for v in series.per_node_scores[:, t]),
                    f"{series.collective[t]:.17g}",
                    int(series.decisions[t]),
                ]
            )


def load_scores(path) -> tuple[ScoreSeries, tuple[str, ...], np.ndarray]:
    """Inverse of :func:`save_scores`."""
    header: dict[str, str] = {}
    rows = []
    columns = None
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {SCORES_FILE_TAG} {SCORES_FILE_VERSION}":
            raise ParseError(f"{path}: missing or unsupported scores header")
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    header[key] = value
                continue
            parts = line.split(",")
            if columns is None:
                columns = parts
                continue
            rows.append(parts)
    if columns is None or not rows:
        raise ParseError(f"{path}: no score rows")
    if columns[0] != "time_index" or columns[-2:] != ["collective", "decision"]:
        raise ParseError(f"{path}: unexpected score columns {columns!r}")
    names = tuple(c[2:] for c in columns[1:-2])
    try:
        threshold = float(header["threshold"])
        median = np.fromiter(
            (float(v) for v in header["per_node_median"].split(",")), dtype=np.float64
        )
        mad = np.fromiter(
            (float(v) for v in header["per_node_mad"].split(",")), dtype=np.float64
        )
        data = np.asarray([[float(v) for v in row] for row in rows])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: malformed scores file: {exc}") from None
    time_index = data[:, 0].astype(np.int64)
    per_node = data[:, 1 : 1 + len(names)].T
    series = ScoreSeries(
        per_node,
        data[:, -2],
        threshold,
        data[:, -1].astype(np.int64),
        median,
        mad,
    )
    return series, names, time_index
