import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgad.errors import ArgumentError, DimensionError
from cgad.evaluation import (
    LabeledRun,
    evaluate,
    event_recall,
    f1_composite,
    f1_point_adjusted,
    f1_pointwise,
    load_report,
    point_adjust,
    save_report,
    segments,
)

binary_lists = st.lists(st.integers(0, 1), min_size=1, max_size=80)


class TestSegments:
    def test_two_runs(self):
        assert segments([0, 1, 1, 0, 1]) == [(1, 2), (4, 4)]

    def test_all_zeros(self):
        assert segments([0, 0, 0]) == []

    def test_all_ones(self):
        assert segments([1] * 5) == [(0, 4)]

    @settings(max_examples=80)
    @given(binary_lists)
    def test_round_trip(self, labels):
        rebuilt = np.zeros(len(labels), dtype=int)
        for s, e in segments(labels):
            rebuilt[s : e + 1] = 1
        assert rebuilt.tolist() == labels


class TestPointwise:
    def test_perfect_match(self):
        run = LabeledRun([0, 1, 0], [0, 1, 0])
        assert f1_pointwise(run).f1 == 1.0

    def test_no_positives(self):
        run = LabeledRun([0, 0, 0], [0, 1, 1])
        assert f1_pointwise(run).f1 == 0.0

    def test_half_half(self):
        # oracle: enumerate the four cells -> tp=1 fp=1 fn=1 tn=1
        run = LabeledRun([1, 1, 0, 0], [1, 0, 1, 0])
        stats = f1_pointwise(run)
        assert (stats.tp, stats.fp, stats.fn, stats.tn) == (1, 1, 1, 1)
        assert stats.precision == 0.5 and stats.recall == 0.5 and stats.f1 == 0.5

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            LabeledRun([0, 1], [0, 1, 0])

    def test_non_binary_rejected(self):
        with pytest.raises(ArgumentError):
            LabeledRun([0, 2], [0, 1])


def run_with_segment(t=10, seg=(3, 6), hits=(4,), extra_fp=()):
    labels = np.zeros(t, dtype=int)
    labels[seg[0] : seg[1] + 1] = 1
    decisions = np.zeros(t, dtype=int)
    for h in hits:
        decisions[h] = 1
    for f in extra_fp:
        decisions[f] = 1
    return LabeledRun(decisions, labels)


class TestComposite:
    def test_single_hit_no_fp_is_one(self):
        run = run_with_segment()
        assert f1_composite(run) == 1.0

    def test_all_positive_short_labels(self):
        run = LabeledRun([1, 1, 1], [0, 0, 1])
        # precision 1/3, event recall 1 -> harmonic mean 0.5
        assert f1_composite(run) == pytest.approx(0.5)

    def test_all_zero_decisions(self):
        run = LabeledRun([0, 0, 0], [0, 1, 1])
        assert f1_composite(run) == 0.0

    def test_no_events_warns_and_returns_zero(self):
        run = LabeledRun([0, 1, 0], [0, 0, 0])
        with pytest.warns(UserWarning):
            assert f1_composite(run) == 0.0

    def test_precision_one_relation(self):
        # with precision 1, composite F1 reduces to 2 Re / (1 + Re)
        labels = np.zeros(20, dtype=int)
        labels[2:5] = 1
        labels[10:15] = 1
        decisions = np.zeros(20, dtype=int)
        decisions[3] = 1  # hit the first segment only
        run = LabeledRun(decisions, labels)
        re = event_recall(run)
        assert re == 0.5
        assert f1_composite(run) == pytest.approx(2 * re / (1 + re))


class TestPointAdjust:
    def test_expands_hit_segment(self):
        run = run_with_segment()
        adjusted = point_adjust(run)
        assert adjusted[3:7].tolist() == [1, 1, 1, 1]
        assert adjusted.sum() == 4

    def test_preserves_outside_fp(self):
        run = run_with_segment(extra_fp=(8,))
        adjusted = point_adjust(run)
        assert adjusted[8] == 1

    def test_no_trigger_no_change(self):
        run = run_with_segment(hits=())
        assert np.array_equal(point_adjust(run), run.decisions)

    def test_adjusted_f1_is_one_for_hit_case(self):
        assert f1_point_adjusted(run_with_segment()) == 1.0

    def test_all_zero_decisions_zero(self):
        run = LabeledRun([0, 0, 0, 0], [0, 1, 1, 0])
        assert f1_point_adjusted(run) == 0.0

    @settings(max_examples=150)
    @given(binary_lists, st.data())
    def test_adjustment_never_hurts(self, labels, data):
        decisions = data.draw(
            st.lists(st.integers(0, 1), min_size=len(labels), max_size=len(labels))
        )
        run = LabeledRun(decisions, labels)
        assert f1_point_adjusted(run) >= f1_pointwise(run).f1 - 1e-12


class TestEvaluate:
    def test_fields_consistent(self):
        run_labels = [0, 1, 1, 0, 1, 0, 0]
        run_decisions = [0, 1, 0, 1, 0, 0, 0]
        report = evaluate(run_decisions, run_labels)
        assert report.tp + report.fp + report.fn + report.tn == len(run_labels)
        assert report.gt_event_count == 2
        assert report.detected_event_count == 2  # two runs of 1s in decisions
        assert 0 <= report.f1 <= report.f1_point_adjusted <= 1

    def test_padding_with_matched_zeros(self):
        decisions = [0, 1, 0, 1]
        labels = [0, 1, 1, 0]
        base = evaluate(decisions, labels)
        padded = evaluate(decisions + [0] * 10, labels + [0] * 10)
        assert (base.tp, base.fp, base.fn) == (padded.tp, padded.fp, padded.fn)
        assert padded.tn == base.tn + 10
        assert padded.f1 == base.f1
        assert padded.f1_composite == base.f1_composite
        assert padded.f1_point_adjusted == base.f1_point_adjusted

    def test_report_file_round_trip(self, tmp_path):
        report = evaluate([0, 1, 1], [0, 1, 0])
        text = tmp_path / "r.txt"
        csv_path = tmp_path / "r.csv"
        save_report(report, text, csv_path)
        content = dict(
            line.split("\t")
            for line in text.read_text().splitlines()[1:-1]
        )
        assert int(content["tp"]) == report.tp
        assert float(content["f1"]) == report.f1
        header, row = csv_path.read_text().splitlines()
        assert header.split(",")[0] == "tp"
        assert row.split(",")[0] == "1"
        assert load_report(text) == report
