"""Static SVG report emission: degree-histogram comparisons, score plots and
windowed transfer-entropy overlays for a chosen node pair."""

from __future__ import annotations

import csv
import math

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "cgad"

import matplotlib.pyplot as plt
import numpy as np

from .causal import CausalGraph, TEConfig, degree_histogram, transfer_entropy
from .errors import ArgumentError
from .evaluation import segments

_SVG_META = {"Date": None}  # keep emitted SVG byte-stable across runs


def save_figure(fig, path) -> None:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def top_k_histogram(graph: CausalGraph) -> dict[int, int]:
    """Out-degree histogram of a top-k structure derived from the same weight
    matrix: every node keeps its k strongest outgoing edges."""
    n = graph.n_nodes
    if n < 2:
        return {0: n}
    nnz = int((graph.adjacency > 0).sum())
    k = min(n - 1, max(1, round(nnz / n)))
    return {k: n}


def fully_connected_histogram(n_nodes: int) -> dict[int, int]:
    return {n_nodes - 1: n_nodes}


def gumbel_reference_histogram(n_nodes: int, density: float, seed: int) -> dict[int, int]:
    """Bell-shaped reference: out-degrees sampled from a binomial with the
    causal graph's edge density."""
    rng = np.random.default_rng([seed, 7])
    p = min(max(density, 0.0), 1.0)
    degrees = rng.binomial(max(n_nodes - 1, 1), p, size=n_nodes)
    hist: dict[int, int] = {}
    for d in degrees:
        hist[int(d)] = hist.get(int(d), 0) + 1
    return dict(sorted(hist.items()))


def reference_histograms(graph: CausalGraph, seed: int) -> dict[str, dict[int, int]]:
    n = graph.n_nodes
    possible = n * (n - 1)
    density = (graph.adjacency > 0).sum() / possible if possible else 0.0
    return {
        "causal": degree_histogram(graph),
        "fully_connected": fully_connected_histogram(n),
        "top_k": top_k_histogram(graph),
        "gumbel_reference": gumbel_reference_histogram(n, density, seed),
    }


def write_degree_histogram_csv(path, histograms: dict[str, dict[int, int]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["structure", "out_degree", "node_count"])
        for structure in sorted(histograms):
            for degree, count in sorted(histograms[structure].items()):
                writer.writerow([structure, degree, count])


def degree_histogram_figure(histograms: dict[str, dict[int, int]]):
    names = sorted(histograms)
    fig, axes = plt.subplots(1, len(names), figsize=(3.2 * len(names), 3.0), sharey=True)
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        hist = histograms[name]
        degrees = sorted(hist)
        ax.bar(degrees, [hist[d] for d in degrees], width=0.8)
        ax.set_title(name.replace("_", " "))
        ax.set_xlabel("out-degree")
    axes[0].set_ylabel("node count")
    fig.tight_layout()
    return fig


def per_node_scores_figure(per_node_scores: np.ndarray, node_names, labels=None):
    n = per_node_scores.shape[0]
    fig, axes = plt.subplots(n, 1, figsize=(9, 1.4 * n), sharex=True, squeeze=False)
    for i in range(n):
        ax = axes[i][0]
        ax.plot(per_node_scores[i], linewidth=0.7)
        ax.set_ylabel(node_names[i], rotation=0, ha="right", fontsize=8)
        if labels is not None:
            for s, e in segments(labels):
                ax.axvspan(s, e + 1, color="red", alpha=0.2, linewidth=0)
    axes[-1][0].set_xlabel("time step")
    fig.suptitle("per-node anomaly scores")
    fig.tight_layout()
    return fig


def collective_figure(collective: np.ndarray, threshold: float, labels=None):
    fig, ax = plt.subplots(figsize=(9, 3))
    ax.plot(collective, color="green", linewidth=0.8, label="collective score")
    ax.axhline(threshold, color="red", linestyle="--", label="threshold")
    if labels is not None:
        for s, e in segments(labels):
            ax.axvspan(s, e + 1, color="red", alpha=0.2, linewidth=0)
    ax.set_xlabel("time step")
    ax.set_ylabel("score")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return fig


def windowed_te(target, source, cfg: TEConfig, block_size: int) -> np.ndarray:
    """Transfer entropy of consecutive non-overlapping blocks; the trailing
    partial block is dropped."""
    target = np.asarray(target, dtype=np.float64).ravel()
    source = np.asarray(source, dtype=np.float64).ravel()
    if block_size < cfg.q + cfg.o + 2:
        raise ArgumentError(f"block_size {block_size} too small for the history lengths")
    n_blocks = target.size // block_size
    if n_blocks == 0:
        raise ArgumentError(
            f"series of length {target.size} has no complete block of {block_size}"
        )
    values = []
    for b in range(n_blocks):
        sl = slice(b * block_size, (b + 1) * block_size)
        values.append(transfer_entropy(target[sl], source[sl], cfg))
    return np.asarray(values)


def highlighted_blocks(block_te: np.ndarray, top_events: int) -> list[int]:
    """Indices of the strongest blocks: the top decile, capped at
    ``top_events`` and never fewer than one."""
    n = block_te.size
    k = max(1, min(top_events, math.ceil(n / 10)))
    order = np.argsort(-block_te, kind="stable")
    return sorted(int(i) for i in order[:k])


def causal_events_figure(
    target, source, block_te: np.ndarray, highlighted: list[int], block_size: int,
    pair_names=("target", "source"),
):
    fig, (ax0, ax1) = plt.subplots(
        2, 1, figsize=(9, 4.5), sharex=True, gridspec_kw={"height_ratios": [2, 1]}
    )
    ax0.plot(np.asarray(target), linewidth=0.7, label=pair_names[0])
    ax0.plot(np.asarray(source), linewidth=0.7, label=pair_names[1])
    for b in highlighted:
        ax0.axvspan(b * block_size, (b + 1) * block_size, color="orange", alpha=0.3, linewidth=0)
        ax1.axvspan(b * block_size, (b + 1) * block_size, color="orange", alpha=0.3, linewidth=0)
    ax0.legend(loc="upper right", fontsize=8)
    centers = (np.arange(block_te.size) + 0.5) * block_size
    ax1.step(centers, block_te, where="mid")
    ax1.set_ylabel("TE (bits)")
    ax1.set_xlabel("time step")
    fig.tight_layout()
    return fig
