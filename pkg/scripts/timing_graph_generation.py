#!/usr/bin/env python3
"""Measure how causal-graph generation cost scales with the node count.

Pairwise estimation over G chunks of length w costs O(G * N^2 * w), so
doubling N should roughly quadruple the wall time at fixed G and w.

    python scripts/timing_graph_generation.py [--nodes 4 8 16] [--chunk 3000]
"""

import argparse
import time

import numpy as np

from cgad.causal import TEConfig, generate_graph
from cgad.series import MultivariateSeries


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, nargs="+", default=[4, 8, 16])
    parser.add_argument("--chunk", type=int, default=3000)
    parser.add_argument("--samples", type=int, default=3)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    n_max = max(args.nodes)
    rng = np.random.default_rng(0)
    t = 2 * args.chunk
    values = rng.normal(size=(n_max, t)).cumsum(axis=1) * 0.01 + rng.normal(size=(n_max, t))
    cfg = TEConfig(chunk_window=args.chunk, sample_count=args.samples, rng_seed=1)

    previous = None
    for n in sorted(args.nodes):
        series = MultivariateSeries(values[:n], tuple(f"x{i}" for i in range(n)))
        best = min(
            _timed(lambda: generate_graph(series, cfg)) for _ in range(args.repeats)
        )
        line = f"N={n:3d}  best of {args.repeats}: {best:7.3f}s"
        if previous is not None:
            line += f"  ratio vs previous N: {best / previous:.2f}"
        print(line)
        previous = best


def _timed(fn) -> float:
    start = time.perf_counter()
    fn()
    return time.perf_counter() - start


if __name__ == "__main__":
    main()
