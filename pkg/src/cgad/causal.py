"""Pairwise transfer-entropy estimation and causal-graph assembly.

The reference estimator symbolizes each sequence with equal-width histogram
bins and plugs empirical probabilities into the entropy formulas (log base 2,
so every result is in bits). A k-nearest-neighbour estimator is available as
an optional alternative for continuous data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .errors import ArgumentError, DimensionError, ParseError
from .series import MultivariateSeries

ESTIMATORS = ("histogram-plugin", "knn-kraskov")

GRAPH_FILE_TAG = "cgad-graph"
GRAPH_FILE_VERSION = "v1"


@dataclass(frozen=True)
class HistogramEncoding:
    """Equal-width symbolization of a real sequence.

    Symbol s means the value fell in [edges[s], edges[s+1]); the last bin is
    right-closed.
    """

    bin_count: int
    bin_edges: np.ndarray
    symbols: np.ndarray


@dataclass(frozen=True)
class TEConfig:
    """Settings for transfer-entropy estimation and graph sampling.

    ``q`` and ``o`` are the history lengths of the target and source series,
    ``chunk_window`` and ``sample_count`` control the random-chunk averaging,
    and entries of the averaged matrix at or below ``prune_threshold`` are
    dropped.
    """

    estimator: str = "histogram-plugin"
    bin_count: int = 8
    q: int = 1
    o: int = 1
    knn_k: int = 4
    chunk_window: int = 2000
    sample_count: int = 5
    prune_threshold: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ArgumentError(
                f"unknown estimator {self.estimator!r}; expected one of {ESTIMATORS}"
            )
        if self.bin_count < 2:
            raise ArgumentError(f"bin_count must be >= 2, got {self.bin_count}")
        if self.q < 1 or self.o < 1:
            raise ArgumentError(f"history lengths must be >= 1, got q={self.q} o={self.o}")
        if self.knn_k < 1:
            raise ArgumentError(f"knn_k must be >= 1, got {self.knn_k}")
        if self.chunk_window < self.q + self.o + 1:
            raise ArgumentError(
                f"chunk_window must be >= q + o + 1 = {self.q + self.o + 1}, "
                f"got {self.chunk_window}"
            )
        if self.sample_count < 1:
            raise ArgumentError(f"sample_count must be >= 1, got {self.sample_count}")
        if self.prune_threshold < 0:
            raise ArgumentError(
                f"prune_threshold must be >= 0, got {self.prune_threshold}"
            )


@dataclass(frozen=True)
class CausalGraph:
    """Weighted directed adjacency; entry (i, j) is the influence of series j
    on series i, in bits. All weights are nonnegative, the diagonal is zero."""

    adjacency: np.ndarray
    node_names: tuple[str, ...]

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.float64)
        n = len(self.node_names)
        if adj.shape != (n, n):
            raise DimensionError(
                f"adjacency shape {adj.shape} does not match {n} node names"
            )
        if (adj < 0).any():
            raise ArgumentError("adjacency weights must be nonnegative")
        if np.diag(adj).any():
            raise ArgumentError("adjacency diagonal must be zero")
        adj = adj.copy()
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "node_names", tuple(self.node_names))

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)


def encode_histogram(series, bin_count: int) -> HistogramEncoding:
    """Assign each value to one of ``bin_count`` equal-width bins spanning the
    sequence's own range. A constant sequence maps everything to bin 0."""
    values = np.asarray(series, dtype=np.float64).ravel()
    if values.size < 1:
        raise ArgumentError("cannot encode an empty sequence")
    if bin_count < 2:
        raise ArgumentError(f"bin_count must be >= 2, got {bin_count}")
    lo = values.min()
    hi = values.max()
    if hi == lo:
        # degenerate range: synthesize a unit-width grid so edges stay increasing
        edges = lo + np.linspace(0.0, 1.0, bin_count + 1)
        symbols = np.zeros(values.size, dtype=np.int64)
    else:
        edges = np.linspace(lo, hi, bin_count + 1)
        raw = np.floor((values - lo) / (hi - lo) * bin_count).astype(np.int64)
        symbols = np.clip(raw, 0, bin_count - 1)
    return HistogramEncoding(bin_count, edges, symbols)


def _entropy_from_counts(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _joint_entropy_cols(cols: list[np.ndarray]) -> float:
    stacked = np.column_stack(cols)
    _, counts = np.unique(stacked, axis=0, return_counts=True)
    return _entropy_from_counts(counts)


def entropy(symbols, bin_count: int) -> float:
    """Plug-in Shannon entropy of a symbol sequence, in bits."""
    s = np.asarray(symbols, dtype=np.int64).ravel()
    if s.size == 0:
        raise ArgumentError("entropy of an empty sequence is undefined")
    if s.min() < 0 or s.max() >= bin_count:
        raise ArgumentError(f"symbols must lie in [0, {bin_count})")
    return _entropy_from_counts(np.bincount(s, minlength=bin_count))


def joint_entropy(a, b) -> float:
    """Plug-in joint entropy H(A, B) in bits."""
    a = np.asarray(a, dtype=np.int64).ravel()
    b = np.asarray(b, dtype=np.int64).ravel()
    if a.size != b.size:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    if a.size == 0:
        raise ArgumentError("joint entropy of empty sequences is undefined")
    return _joint_entropy_cols([a, b])


def conditional_entropy(a, given) -> float:
    """Plug-in conditional entropy H(A | B) = H(A, B) - H(B), in bits."""
    a = np.asarray(a, dtype=np.int64).ravel()
    g = np.asarray(given, dtype=np.int64).ravel()
    if a.size != g.size:
        raise DimensionError(f"length mismatch: {a.size} vs {g.size}")
    if a.size == 0:
        raise ArgumentError("conditional entropy of empty sequences is undefined")
    return _joint_entropy_cols([a, g]) - _joint_entropy_cols([g])


def _history_columns(symbols: np.ndarray, depth: int, start: int) -> list[np.ndarray]:
    # column d holds the value d steps before each sample time t = start..L-1
    length = symbols.size
    return [symbols[start - d : length - d] for d in range(1, depth + 1)]


def _te_histogram(target: np.ndarray, source: np.ndarray, cfg: TEConfig) -> float:
    length = target.size
    if length < cfg.q + cfg.o + 1:
        raise ArgumentError(
            f"need at least q + o + 1 = {cfg.q + cfg.o + 1} samples, got {length}"
        )
    ti = encode_histogram(target, cfg.bin_count).symbols
    si = encode_histogram(source, cfg.bin_count).symbols
    start = max(cfg.q, cfg.o)
    now = [ti[start:]]
    t_hist = _history_columns(ti, cfg.q, start)
    s_hist = _history_columns(si, cfg.o, start)
    te = (
        _joint_entropy_cols(now + t_hist)
        - _joint_entropy_cols(t_hist)
        - _joint_entropy_cols(now + t_hist + s_hist)
        + _joint_entropy_cols(t_hist + s_hist)
    )
    return max(te, 0.0)


def _strict_neighbor_counts(points: np.ndarray, radii: np.ndarray) -> np.ndarray:
    tree = cKDTree(points)
    counts = tree.query_ball_point(
        points, np.nextafter(radii, 0.0), p=np.inf, return_length=True
    )
    return np.maximum(counts - 1, 0)  # drop the point itself


def _te_knn(target: np.ndarray, source: np.ndarray, cfg: TEConfig) -> float:
    length = target.size
    if length < cfg.knn_k + 2:
        raise ArgumentError(
            f"need at least knn_k + 2 = {cfg.knn_k + 2} samples, got {length}"
        )
    if length < cfg.q + cfg.o + 1:
        raise ArgumentError(
            f"need at least q + o + 1 = {cfg.q + cfg.o + 1} samples, got {length}"
        )
    start = max(cfg.q, cfg.o)
    now = target[start:][:, None]
    t_hist = np.column_stack(_history_columns(target, cfg.q, start))
    s_hist = np.column_stack(_history_columns(source, cfg.o, start))

    joint = np.hstack([now, t_hist, s_hist])
    tree = cKDTree(joint)
    k = min(cfg.knn_k, joint.shape[0] - 1)
    dist, _ = tree.query(joint, k=k + 1, p=np.inf)
    eps = dist[:, -1]

    n_xz = _strict_neighbor_counts(np.hstack([now, t_hist]), eps)
    n_yz = _strict_neighbor_counts(np.hstack([s_hist, t_hist]), eps)
    n_z = _strict_neighbor_counts(t_hist, eps)
    nats = digamma(k) - np.mean(
        digamma(n_xz + 1) + digamma(n_yz + 1) - digamma(n_z + 1)
    )
    return max(float(nats) / np.log(2.0), 0.0)


def transfer_entropy(target, source, cfg: TEConfig) -> float:
    """Directed information flow from ``source`` to ``target`` in bits.

    The histogram estimator is exactly nonnegative; the k-NN estimator may
    come out slightly negative and is floored at 0.
    """
    target = np.asarray(target, dtype=np.float64).ravel()
    source = np.asarray(source, dtype=np.float64).ravel()
    if target.size != source.size:
        raise DimensionError(
            f"length mismatch: target {target.size} vs source {source.size}"
        )
    if cfg.estimator == "histogram-plugin":
        return _te_histogram(target, source, cfg)
    return _te_knn(target, source, cfg)


def generate_graph(train: MultivariateSeries, cfg: TEConfig) -> CausalGraph:
    """Averaged pairwise transfer entropy over randomly placed chunks.

    For each of ``sample_count`` draws a chunk start is sampled from a stream
    seeded by (rng_seed, draw index), the full pairwise matrix is estimated on
    that chunk, and the per-draw matrices are averaged before pruning weak
    entries. Identical seeds and inputs give bit-identical output.
    """
    values = train.values
    n, t = values.shape
    w = cfg.chunk_window
    if t < w + 1:
        raise ArgumentError(
            f"series length {t} too short for chunk_window {w} (need T >= chunk_window + 1)"
        )
    acc = np.zeros((n, n))
    for g in range(cfg.sample_count):
        rng = np.random.default_rng([cfg.rng_seed, g])
        start = int(rng.integers(0, t - w))
        chunk = values[:, start : start + w]
        for i in range(n):
            for j in range(n):
                if i != j:
                    acc[i, j] += transfer_entropy(chunk[i], chunk[j], cfg)
    adjacency = acc / cfg.sample_count
    adjacency[adjacency <= cfg.prune_threshold] = 0.0
    return CausalGraph(adjacency, tuple(train.sensor_names))


def degree_histogram(graph: CausalGraph) -> dict[int, int]:
    """Map out-degree -> number of nodes with that out-degree."""
    out_degrees = (graph.adjacency > 0).sum(axis=0)
    hist: dict[int, int] = {}
    for d in out_degrees:
        hist[int(d)] = hist.get(int(d), 0) + 1
    return dict(sorted(hist.items()))


def save_graph(graph: CausalGraph, path, meta: dict[str, str] | None = None) -> None:
    """Write the graph as versioned text: node list plus nonzero edge triples
    (source, target, weight) with 17-significant-digit weights."""
    for name in graph.node_names:
        if "\t" in name or "\n" in name:
            raise ArgumentError(f"node name {name!r} may not contain tabs or newlines")
    lines = [f"{GRAPH_FILE_TAG}\t{GRAPH_FILE_VERSION}"]
    for key, value in (meta or {}).items():
        lines.append(f"meta\t{key}\t{value}")
    lines.append("nodes\t" + "\t".join(graph.node_names))
    adj = graph.adjacency
    names = graph.node_names
    for j in range(graph.n_nodes):  # source-major order
        for i in range(graph.n_nodes):
            if adj[i, j] > 0:
                lines.append(f"edge\t{names[j]}\t{names[i]}\t{adj[i, j]:.17g}")
    lines.append("end")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph(path) -> CausalGraph:
    """Inverse of :func:`save_graph`; weights round-trip bit-exactly."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != f"{GRAPH_FILE_TAG}\t{GRAPH_FILE_VERSION}":
        raise ParseError(f"{path}: missing or unsupported graph header")
    names: tuple[str, ...] | None = None
    index: dict[str, int] = {}
    adjacency: np.ndarray | None = None
    seen: set[tuple[str, str]] = set()
    ended = False
    for lineno, line in enumerate(lines[1:], start=2):
        if ended:
            raise ParseError(f"{path}: line {lineno}: content after end marker")
        parts = line.split("\t")
        kind = parts[0]
        if kind == "meta":
            continue
        if kind == "nodes":
            if names is not None:
                raise ParseError(f"{path}: line {lineno}: duplicate nodes line")
            names = tuple(parts[1:])
            if not names:
                raise ParseError(f"{path}: line {lineno}: empty node list")
            index = {name: i for i, name in enumerate(names)}
            if len(index) != len(names):
                raise ParseError(f"{path}: line {lineno}: duplicate node name")
            adjacency = np.zeros((len(names), len(names)))
        elif kind == "edge":
            if adjacency is None:
                raise ParseError(f"{path}: line {lineno}: edge before nodes line")
            if len(parts) != 4:
                raise ParseError(f"{path}: line {lineno}: malformed edge line")
            _, src, dst, raw = parts
            for name in (src, dst):
                if name not in index:
                    raise ParseError(f"{path}: line {lineno}: unknown node {name!r}")
            if (src, dst) in seen:
                raise ParseError(
                    f"{path}: line {lineno}: duplicate edge {src!r} -> {dst!r}"
                )
            seen.add((src, dst))
            try:
                weight = float(raw)
            except ValueError:
                raise ParseError(
                    f"{path}: line {lineno}: bad weight {raw!r}"
                ) from None
            if not np.isfinite(weight) or weight <= 0:
                raise ParseError(
                    f"{path}: line {lineno}: weight must be finite and positive"
                )
            adjacency[index[dst], index[src]] = weight
        elif kind == "end":
            ended = True
        else:
            raise ParseError(f"{path}: line {lineno}: unknown record {kind!r}")
    if not ended or adjacency is None:
        raise ParseError(f"{path}: truncated graph file (missing end marker)")
    return CausalGraph(adjacency, names)


def read_graph_meta(path) -> dict[str, str]:
    """Header metadata of a graph file, without loading the edges."""
    meta: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "meta" and len(parts) >= 3:
                meta[parts[1]] = parts[2]
            elif parts[0] in ("nodes", "edge", "end"):
                break
    return meta
