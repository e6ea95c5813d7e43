"""Seeded synthetic benchmark generator: lag-coupled autoregressive series
with injected test-period anomalies and a ground-truth edge list."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .causal import CausalGraph
from .errors import ArgumentError, NumericError
from .series import MultivariateSeries

BURN_IN = 200


@dataclass(frozen=True)
class Coupling:
    source: int
    target: int
    lag: int
    gain: float


@dataclass(frozen=True)
class AnomalyWindow:
    start: int
    end: int
    node: int
    offset: float


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings.

    ``timesteps`` is the length of each emitted segment: the training series
    and the test series are consecutive stretches of one process, and anomaly
    windows are indexed within the test segment.
    """

    n_nodes: int
    timesteps: int
    couplings: tuple[Coupling, ...]
    noise_sigma: float = 0.3
    anomalies: tuple[AnomalyWindow, ...] = ()
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "anomalies", tuple(self.anomalies))
        if self.n_nodes < 1:
            raise ArgumentError(f"n_nodes must be >= 1, got {self.n_nodes}")
        if self.timesteps < 2:
            raise ArgumentError(f"timesteps must be >= 2, got {self.timesteps}")
        if self.noise_sigma < 0:
            raise ArgumentError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        for c in self.couplings:
            if not (0 <= c.source < self.n_nodes and 0 <= c.target < self.n_nodes):
                raise ArgumentError(f"coupling {c} references a node out of range")
            if c.lag < 1:
                raise ArgumentError(f"coupling {c} must have lag >= 1")
        for a in self.anomalies:
            if not (0 <= a.start <= a.end < self.timesteps):
                raise ArgumentError(
                    f"anomaly window {a} must satisfy 0 <= start <= end < timesteps"
                )
            if not 0 <= a.node < self.n_nodes:
                raise ArgumentError(f"anomaly window {a} references a node out of range")


def sensor_names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(n))


def truth_graph(spec: SyntheticSpec) -> CausalGraph:
    """Cross-node couplings as a nonnegative adjacency; self terms omitted."""
    adj = np.zeros((spec.n_nodes, spec.n_nodes))
    for c in spec.couplings:
        if c.source != c.target:
            adj[c.target, c.source] = max(adj[c.target, c.source], abs(c.gain))
    return CausalGraph(adj, sensor_names(spec.n_nodes))


def generate(spec: SyntheticSpec) -> tuple[MultivariateSeries, MultivariateSeries]:
    """Simulate the process and return (train, test); the test series carries
    labels marking the injected anomaly windows."""
    max_lag = max((c.lag for c in spec.couplings), default=1)
    total = BURN_IN + max_lag + 2 * spec.timesteps
    rng = np.random.default_rng(spec.rng_seed)
    x = rng.normal(0.0, spec.noise_sigma, size=(spec.n_nodes, total))
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(max_lag, total):
            for c in spec.couplings:
                x[c.target, t] += c.gain * x[c.source, t - c.lag]
    if not np.isfinite(x).all():
        raise NumericError("coupling gains produce an unstable process")

    offset = BURN_IN + max_lag
    train_values = x[:, offset : offset + spec.timesteps]
    test_values = x[:, offset + spec.timesteps : offset + 2 * spec.timesteps].copy()
    labels = np.zeros(spec.timesteps, dtype=np.int64)
    for a in spec.anomalies:
        test_values[a.node, a.start : a.end + 1] += a.offset
        labels[a.start : a.end + 1] = 1

    names = sensor_names(spec.n_nodes)
    train = MultivariateSeries(train_values, names)
    test = MultivariateSeries(test_values, names, labels, t0=spec.timesteps)
    return train, test
