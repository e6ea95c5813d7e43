import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cgad.errors import ArgumentError, DimensionError, ParseError
from cgad.series import (
    MultivariateSeries,
    apply_minmax,
    fit_minmax,
    load_csv,
    load_labels,
    make_windows,
    save_csv,
    save_labels,
    split_train_val,
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_shapes(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,b,c\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n")
        s = load_csv(p)
        assert s.n_sensors == 3 and s.length == 4
        assert s.sensor_names == ("a", "b", "c")
        assert s.values[1, 2] == 8.0

    def test_header_only(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,b\n")
        with pytest.raises(ParseError, match="no data rows"):
            load_csv(p)

    def test_bad_cell_names_row_and_column(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,b\n1,2\n3,oops\n")
        with pytest.raises(ParseError, match=r"row 3.*'b'"):
            load_csv(p)

    def test_ragged_row(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,b\n1,2\n3\n")
        with pytest.raises(ParseError, match="row 3"):
            load_csv(p)

    def test_non_finite_rejected(self, tmp_path):
        p = write(tmp_path / "d.csv", "a,b\n1,2\nnan,4\n")
        with pytest.raises(ParseError, match="non-finite"):
            load_csv(p)

    def test_label_mismatch(self, tmp_path):
        p = write(tmp_path / "d.csv", "a\n1\n2\n3\n4\n")
        l = write(tmp_path / "l.txt", "0\n1\n0\n")
        with pytest.raises(DimensionError):
            load_csv(p, l)

    def test_labels_attached(self, tmp_path):
        p = write(tmp_path / "d.csv", "a\n1\n2\n3\n")
        l = write(tmp_path / "l.txt", "0\n1\n0\n")
        s = load_csv(p, l)
        assert s.labels.tolist() == [0, 1, 0]

    def test_bad_label_value(self, tmp_path):
        l = write(tmp_path / "l.txt", "0\n2\n")
        with pytest.raises(ParseError, match="line 2"):
            load_labels(l)

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        s = MultivariateSeries(rng.normal(size=(3, 7)), ("a", "b", "c"))
        save_csv(s, tmp_path / "o.csv")
        back = load_csv(tmp_path / "o.csv")
        assert np.array_equal(back.values, s.values)
        assert back.sensor_names == s.sensor_names

    def test_labels_round_trip(self, tmp_path):
        save_labels([0, 1, 1, 0], tmp_path / "l.txt")
        assert load_labels(tmp_path / "l.txt").tolist() == [0, 1, 1, 0]


class TestMinmax:
    def test_fit_single_row(self):
        s = MultivariateSeries(np.array([[2.0, 4.0, 6.0]]), ("a",))
        spec = fit_minmax(s)
        assert spec.per_sensor_min[0] == 2.0 and spec.per_sensor_max[0] == 6.0

    def test_fit_constant_row(self):
        s = MultivariateSeries(np.array([[5.0, 5.0, 5.0]]), ("a",))
        spec = fit_minmax(s)
        assert spec.per_sensor_min[0] == 5.0 and spec.per_sensor_max[0] == 5.0

    def test_fit_two_rows(self):
        s = MultivariateSeries(np.array([[0.0, 1.0], [-1.0, 3.0]]), ("a", "b"))
        spec = fit_minmax(s)
        assert spec.per_sensor_min.tolist() == [0.0, -1.0]
        assert spec.per_sensor_max.tolist() == [1.0, 3.0]

    def test_apply_midpoint(self, small_series):
        spec = fit_minmax(small_series)
        out = apply_minmax(small_series, spec)
        # sensor a: min 2 max 8 -> value 4 maps to 1/3; check the hand case min 2 max 6
        single = MultivariateSeries(np.array([[2.0, 4.0, 6.0]]), ("a",))
        out2 = apply_minmax(single, fit_minmax(single))
        assert out2.values[0, 1] == pytest.approx(0.5)
        assert out.values.min() == 0.0 and out.values.max() == 1.0

    def test_apply_constant_sensor_maps_to_zero(self):
        s = MultivariateSeries(np.array([[5.0, 5.0, 5.0]]), ("a",))
        out = apply_minmax(s, fit_minmax(s))
        assert np.array_equal(out.values, np.zeros((1, 3)))

    def test_apply_no_clamping(self):
        train = MultivariateSeries(np.array([[2.0, 6.0]]), ("a",))
        spec = fit_minmax(train)
        test = MultivariateSeries(np.array([[8.0, 0.0]]), ("a",))
        out = apply_minmax(test, spec)
        assert out.values[0, 0] == pytest.approx(1.5)
        assert out.values[0, 1] == pytest.approx(-0.5)

    def test_dimension_mismatch(self, small_series):
        spec = fit_minmax(small_series)
        other = MultivariateSeries(np.ones((3, 4)), ("a", "b", "c"))
        with pytest.raises(DimensionError):
            apply_minmax(other, spec)

    @settings(max_examples=50)
    @given(
        arrays(
            np.float64,
            st.tuples(st.integers(1, 5), st.integers(2, 20)),
            elements=st.floats(-1e6, 1e6, allow_nan=False),
        )
    )
    def test_training_values_land_in_unit_interval(self, values):
        s = MultivariateSeries(values, tuple(f"x{i}" for i in range(values.shape[0])))
        out = apply_minmax(s, fit_minmax(s))
        assert (out.values >= -1e-12).all() and (out.values <= 1 + 1e-12).all()


class TestSplit:
    def test_80_20(self):
        s = MultivariateSeries(np.arange(10.0)[None, :], ("a",))
        tr, va = split_train_val(s, 0.2)
        assert tr.length == 8 and va.length == 2

    def test_floor_semantics(self):
        s = MultivariateSeries(np.arange(5.0)[None, :], ("a",))
        tr, va = split_train_val(s, 0.2)
        assert tr.length == 4 and va.length == 1

    def test_fraction_bounds(self):
        s = MultivariateSeries(np.arange(5.0)[None, :], ("a",))
        with pytest.raises(ArgumentError):
            split_train_val(s, 1.0)
        with pytest.raises(ArgumentError):
            split_train_val(s, 0.0)

    def test_labels_split_with_values(self):
        s = MultivariateSeries(
            np.arange(6.0)[None, :], ("a",), labels=[0, 0, 1, 0, 1, 1]
        )
        tr, va = split_train_val(s, 0.5)
        assert tr.labels.tolist() == [0, 0, 1] and va.labels.tolist() == [0, 1, 1]

    @settings(max_examples=50)
    @given(st.integers(2, 40), st.floats(0.05, 0.95))
    def test_concat_reproduces_input(self, t, frac):
        values = np.arange(float(2 * t)).reshape(2, t)
        s = MultivariateSeries(values, ("a", "b"))
        try:
            tr, va = split_train_val(s, frac)
        except ArgumentError:
            return  # split would leave an empty part
        joined = np.concatenate([tr.values, va.values], axis=1)
        assert np.array_equal(joined, values)


class TestWindows:
    def test_count(self):
        s = MultivariateSeries(np.arange(20.0)[None, :], ("a",))
        batches = make_windows(s, 15, 32)
        assert sum(len(b) for b in batches) == 5

    def test_single_window(self):
        s = MultivariateSeries(np.arange(16.0)[None, :], ("a",))
        batches = make_windows(s, 15, 32)
        assert len(batches) == 1 and len(batches[0]) == 1

    def test_w_equal_t_rejected(self):
        s = MultivariateSeries(np.arange(20.0)[None, :], ("a",))
        with pytest.raises(ArgumentError):
            make_windows(s, 20, 32)

    def test_window_contents(self):
        values = np.vstack([np.arange(8.0), np.arange(8.0) * 10])
        s = MultivariateSeries(values, ("a", "b"))
        batches = make_windows(s, 3, 2)
        first = batches[0]
        assert np.array_equal(first.inputs[0], values[:, 0:3])
        assert np.array_equal(first.targets[0], values[:, 3])
        assert first.end_times[0] == 3

    @settings(max_examples=30)
    @given(st.integers(3, 30), st.integers(1, 8), st.integers(1, 7))
    def test_target_coverage(self, t, w, batch_size):
        if w >= t:
            return
        values = np.random.default_rng(0).normal(size=(2, t))
        s = MultivariateSeries(values, ("a", "b"))
        batches = make_windows(s, w, batch_size)
        targets = np.concatenate([b.targets for b in batches], axis=0).T
        assert np.array_equal(targets, values[:, w:])
        for b in batches:
            assert len(b) <= batch_size
            for row, t_end in enumerate(b.end_times):
                assert np.array_equal(b.inputs[row], values[:, t_end - w : t_end])


class TestSeriesType:
    def test_non_finite_rejected(self):
        with pytest.raises(ArgumentError):
            MultivariateSeries(np.array([[1.0, np.inf]]), ("a",))

    def test_label_values_checked(self):
        with pytest.raises(ArgumentError):
            MultivariateSeries(np.ones((1, 2)), ("a",), labels=[0, 2])

    def test_values_read_only(self, small_series):
        with pytest.raises(ValueError):
            small_series.values[0, 0] = 9.9
