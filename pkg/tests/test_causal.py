import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgad.causal import (
    CausalGraph,
    TEConfig,
    conditional_entropy,
    degree_histogram,
    encode_histogram,
    entropy,
    generate_graph,
    joint_entropy,
    load_graph,
    read_graph_meta,
    save_graph,
    transfer_entropy,
)
from cgad.errors import ArgumentError, DimensionError, ParseError
from cgad.series import MultivariateSeries


def brute_entropy(rows):
    """Independent oracle: entropy of tuples via dict counting and math.log2."""
    counts = Counter(map(tuple, rows))
    total = sum(counts.values())
    return -sum(c / total * math.log2(c / total) for c in counts.values())


class TestEncode:
    def test_two_bins(self):
        enc = encode_histogram([0.0, 0.5, 1.0], 2)
        assert enc.symbols.tolist() == [0, 1, 1]

    def test_constant_sequence(self):
        enc = encode_histogram([3.0, 3.0, 3.0], 4)
        assert enc.symbols.tolist() == [0, 0, 0]
        assert np.all(np.diff(enc.bin_edges) > 0)

    def test_one_value_per_bin(self):
        enc = encode_histogram([0.0, 1.0, 2.0, 3.0], 4)
        assert enc.symbols.tolist() == [0, 1, 2, 3]

    def test_edges_cover_range(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=100)
        enc = encode_histogram(x, 8)
        assert enc.bin_edges[0] == x.min() and enc.bin_edges[-1] == x.max()
        assert enc.symbols.min() >= 0 and enc.symbols.max() <= 7


class TestEntropy:
    def test_uniform_two_symbols(self):
        assert entropy([0, 1, 0, 1], 2) == pytest.approx(1.0)

    def test_deterministic(self):
        assert entropy([0, 0, 0, 0], 2) == 0.0

    def test_uniform_four_symbols(self):
        assert entropy([0, 0, 1, 1, 2, 2, 3, 3], 4) == pytest.approx(2.0)

    def test_empty_rejected(self):
        with pytest.raises(ArgumentError):
            entropy([], 2)

    def test_joint_self(self):
        a = [0, 1, 0, 1]
        assert joint_entropy(a, a) == pytest.approx(entropy(a, 2))

    def test_joint_independent_uniform(self):
        a = [0, 1, 0, 1]
        b = [0, 0, 1, 1]
        expected = brute_entropy(zip(a, b))  # 4 equiprobable outcomes
        assert expected == pytest.approx(2.0)
        assert joint_entropy(a, b) == pytest.approx(expected)

    def test_joint_deterministic_pair(self):
        assert joint_entropy([0, 0], [1, 1]) == 0.0

    def test_joint_length_mismatch(self):
        with pytest.raises(DimensionError):
            joint_entropy([0, 1], [0])

    def test_conditional_self(self):
        a = [0, 1, 1, 0]
        assert conditional_entropy(a, a) == pytest.approx(0.0)

    def test_conditional_independent(self):
        a = [0, 1, 0, 1]
        b = [0, 0, 1, 1]
        assert conditional_entropy(a, b) == pytest.approx(1.0)

    def test_conditional_on_constant(self):
        a = [0, 1, 0, 1]
        c = [0, 0, 0, 0]
        assert conditional_entropy(a, c) == pytest.approx(entropy(a, 2))

    @settings(max_examples=100)
    @given(
        st.lists(st.integers(0, 3), min_size=1, max_size=60),
        st.data(),
    )
    def test_chain_rule(self, a, data):
        b = data.draw(st.lists(st.integers(0, 3), min_size=len(a), max_size=len(a)))
        lhs = joint_entropy(a, b)
        rhs = conditional_entropy(a, b) + brute_entropy([(x,) for x in b])
        assert lhs == pytest.approx(rhs, abs=1e-12)


CFG = TEConfig(bin_count=2, chunk_window=100)


class TestTransferEntropy:
    def test_copy_channel_approaches_one_bit(self):
        rng = np.random.default_rng(42)
        source = rng.integers(0, 2, 100_000).astype(float)
        target = np.roll(source, 1)
        # oracle: exact TE of the copy channel equals H(source) = 1 bit
        assert transfer_entropy(target, source, CFG) == pytest.approx(1.0, abs=0.05)

    def test_independent_pair_near_zero(self):
        rng = np.random.default_rng(43)
        source = rng.integers(0, 2, 100_000).astype(float)
        target = rng.integers(0, 2, 100_000).astype(float)
        assert transfer_entropy(target, source, CFG) <= 0.01

    def test_identical_sequences_zero(self):
        rng = np.random.default_rng(44)
        x = rng.normal(size=500)
        assert transfer_entropy(x, x, TEConfig(chunk_window=100)) == 0.0

    def test_shuffled_source_not_more_informative(self):
        rng = np.random.default_rng(45)
        source = rng.integers(0, 2, 100_000).astype(float)
        target = np.roll(source, 1) + 0.01 * rng.normal(size=100_000)
        te_true = transfer_entropy(target, source, CFG)
        shuffled = source.copy()
        rng.shuffle(shuffled)
        te_shuffled = transfer_entropy(target, shuffled, CFG)
        assert te_shuffled <= te_true + 0.02

    def test_nonnegative_on_arbitrary_inputs(self):
        rng = np.random.default_rng(46)
        cfg = TEConfig(q=2, o=3, chunk_window=100)
        for _ in range(20):
            a = rng.normal(size=60)
            b = rng.normal(size=60)
            assert transfer_entropy(a, b, cfg) >= 0.0

    def test_too_short_rejected(self):
        cfg = TEConfig(q=2, o=2, chunk_window=100)
        with pytest.raises(ArgumentError):
            transfer_entropy([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], cfg)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            transfer_entropy([1.0, 2.0], [1.0, 2.0, 3.0], CFG)

    def test_te_matches_entropy_decomposition(self):
        # same quantity assembled from the public entropy operations
        rng = np.random.default_rng(47)
        target = rng.normal(size=400)
        source = np.roll(target, 1) + rng.normal(size=400)
        cfg = TEConfig(bin_count=4, chunk_window=100)
        ti = encode_histogram(target, 4).symbols
        si = encode_histogram(source, 4).symbols
        it, ih, jh = ti[1:], ti[:-1], si[:-1]
        expected = (
            brute_entropy(zip(it, ih))
            - brute_entropy(zip(ih))
            - brute_entropy(zip(it, ih, jh))
            + brute_entropy(zip(ih, jh))
        )
        assert transfer_entropy(target, source, cfg) == pytest.approx(
            max(expected, 0.0), abs=1e-12
        )


class TestKnnEstimator:
    CFGK = TEConfig(estimator="knn-kraskov", chunk_window=100)

    def test_coupled_beats_independent(self):
        rng = np.random.default_rng(48)
        n = 2000
        source = rng.normal(size=n)
        target = np.roll(source, 1) + 0.1 * rng.normal(size=n)
        other = rng.normal(size=n)
        te_coupled = transfer_entropy(target, source, self.CFGK)
        te_indep = transfer_entropy(other, source, self.CFGK)
        assert te_coupled > te_indep + 0.5
        assert te_indep >= 0.0  # floored

    def test_too_short_rejected(self):
        with pytest.raises(ArgumentError):
            transfer_entropy([1.0, 2.0], [3.0, 4.0], self.CFGK)


def coupled_pair_series(t=4000, seed=0, noise=0.05):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=t)
    x1 = np.roll(x0, 1) + noise * rng.normal(size=t)
    return MultivariateSeries(np.vstack([x0, x1]), ("x0", "x1"))


class TestGenerateGraph:
    def test_recovers_direction(self):
        series = coupled_pair_series()
        cfg = TEConfig(chunk_window=1000, sample_count=3, prune_threshold=0.3, rng_seed=1)
        graph = generate_graph(series, cfg)
        # oracle: direct TE on the full series shows the same asymmetry
        full = transfer_entropy(series.values[1], series.values[0], TEConfig(chunk_window=100))
        assert full > 1.0
        assert graph.adjacency[1, 0] > 0.0
        assert graph.adjacency[0, 1] == 0.0

    def test_deterministic_under_seed(self):
        series = coupled_pair_series(seed=5)
        cfg = TEConfig(chunk_window=500, sample_count=4, rng_seed=9)
        a = generate_graph(series, cfg).adjacency
        b = generate_graph(series, cfg).adjacency
        assert np.array_equal(a, b)

    def test_single_full_chunk_matches_direct_te(self):
        series = coupled_pair_series(t=600, seed=2)
        t = series.length
        cfg = TEConfig(chunk_window=t - 1, sample_count=1, prune_threshold=0.0, rng_seed=0)
        graph = generate_graph(series, cfg)
        chunk = series.values[:, : t - 1]  # the only possible chunk start is 0
        expected01 = transfer_entropy(chunk[0], chunk[1], cfg)
        expected10 = transfer_entropy(chunk[1], chunk[0], cfg)
        assert graph.adjacency[0, 1] == expected01
        assert graph.adjacency[1, 0] == expected10

    def test_total_pruning(self):
        series = coupled_pair_series(t=400, seed=3)
        cfg = TEConfig(chunk_window=200, sample_count=2, prune_threshold=100.0, rng_seed=0)
        graph = generate_graph(series, cfg)
        assert np.array_equal(graph.adjacency, np.zeros((2, 2)))

    def test_pruning_monotone(self):
        series = MultivariateSeries(
            np.random.default_rng(6).normal(size=(4, 800)), tuple("abcd")
        )
        nnz = []
        for c in (0.0, 0.05, 0.1, 0.5):
            cfg = TEConfig(chunk_window=300, sample_count=2, prune_threshold=c, rng_seed=2)
            nnz.append(int((generate_graph(series, cfg).adjacency > 0).sum()))
        assert nnz == sorted(nnz, reverse=True)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        values = rng.normal(size=(4, 900))
        values[2] += 0.8 * np.roll(values[0], 1)
        names = ("a", "b", "c", "d")
        cfg = TEConfig(chunk_window=400, sample_count=2, prune_threshold=0.0, rng_seed=3)
        base = generate_graph(MultivariateSeries(values, names), cfg).adjacency
        perm = np.array([2, 0, 3, 1])
        permuted = generate_graph(
            MultivariateSeries(values[perm], tuple(names[i] for i in perm)), cfg
        ).adjacency
        assert np.array_equal(permuted, base[np.ix_(perm, perm)])

    def test_chunk_window_too_long(self):
        series = coupled_pair_series(t=100)
        with pytest.raises(ArgumentError):
            generate_graph(series, TEConfig(chunk_window=100, rng_seed=0))


class TestDegreeHistogram:
    def test_zero_matrix(self):
        g = CausalGraph(np.zeros((3, 3)), ("a", "b", "c"))
        assert degree_histogram(g) == {0: 3}

    def test_complete_digraph(self):
        adj = np.ones((3, 3)) - np.eye(3)
        g = CausalGraph(adj, ("a", "b", "c"))
        assert degree_histogram(g) == {2: 3}

    def test_single_edge(self):
        adj = np.zeros((2, 2))
        adj[1, 0] = 0.7
        g = CausalGraph(adj, ("a", "b"))
        assert degree_histogram(g) == {0: 1, 1: 1}


class TestGraphFile:
    def graph(self):
        adj = np.zeros((3, 3))
        adj[1, 0] = 0.123456789012345678
        adj[0, 2] = 1.0 / 3.0
        return CausalGraph(adj, ("n0", "n1", "n2"))

    def test_round_trip_bit_exact(self, tmp_path):
        g = self.graph()
        p = tmp_path / "g.txt"
        save_graph(g, p, meta={"config-hash": "abc123"})
        back = load_graph(p)
        assert np.array_equal(back.adjacency, g.adjacency)
        assert back.node_names == g.node_names
        assert read_graph_meta(p) == {"config-hash": "abc123"}

    def test_duplicate_edge_rejected(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text(
            "cgad-graph\tv1\nnodes\ta\tb\nedge\ta\tb\t0.5\nedge\ta\tb\t0.6\nend\n"
        )
        with pytest.raises(ParseError, match="duplicate edge"):
            load_graph(p)

    def test_unknown_node_rejected(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("cgad-graph\tv1\nnodes\ta\tb\nedge\ta\tz\t0.5\nend\n")
        with pytest.raises(ParseError, match="unknown node"):
            load_graph(p)

    def test_truncated_file_rejected(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("cgad-graph\tv1\nnodes\ta\tb\nedge\ta\tb\t0.5\n")
        with pytest.raises(ParseError, match="truncated"):
            load_graph(p)

    def test_wrong_version_rejected(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("cgad-graph\tv9\nnodes\ta\nend\n")
        with pytest.raises(ParseError, match="header"):
            load_graph(p)

    def test_bad_weight_names_line(self, tmp_path):
        p = tmp_path / "g.txt"
        p.write_text("cgad-graph\tv1\nnodes\ta\tb\nedge\ta\tb\tnope\nend\n")
        with pytest.raises(ParseError, match="line 3"):
            load_graph(p)


class TestConfigValidation:
    def test_chunk_window_floor(self):
        with pytest.raises(ArgumentError):
            TEConfig(q=3, o=3, chunk_window=6)

    def test_unknown_estimator(self):
        with pytest.raises(ArgumentError):
            TEConfig(estimator="magic")

    def test_negative_prune(self):
        with pytest.raises(ArgumentError):
            TEConfig(prune_threshold=-0.1)
