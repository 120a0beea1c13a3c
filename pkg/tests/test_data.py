import numpy as np
import pytest

from tricast.data import (RawSeries, apply_few_shot, chronological_split, few_shot_subset,
                          load_csv, make_windows, render_chart, synthetic_sine_trend,
                          window_count, write_windows_manifest)
from tricast.errors import DataError, NumericError


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_happy_path(self, tmp_path):
        path = _write(tmp_path, "date,a,b\n2020-01-01,1.0,2.0\n2020-01-02,3.5,-4\n")
        series = load_csv(path)
        assert series.variable_names == ["a", "b"]
        assert series.timestamps == ["2020-01-01", "2020-01-02"]
        np.testing.assert_array_equal(series.values, [[1.0, 2.0], [3.5, -4.0]])

    def test_non_numeric_cell_names_location(self, tmp_path):
        path = _write(tmp_path, "date,a\n2020-01-01,1.0\n2020-01-02,oops\n")
        with pytest.raises(DataError, match=r"row 3.*column 2"):
            load_csv(path)

    def test_too_few_columns(self, tmp_path):
        path = _write(tmp_path, "date\n2020-01-01\n")
        with pytest.raises(DataError):
            load_csv(path)

    def test_ragged_row(self, tmp_path):
        path = _write(tmp_path, "date,a,b\n2020-01-01,1.0\n")
        with pytest.raises(DataError, match="row 2"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_csv(tmp_path / "absent.csv")


def _series(n=100, d=2, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(n, d))
    return RawSeries([f"t{i:04d}" for i in range(n)], vals, [f"v{j}" for j in range(d)])


class TestSplit:
    def test_ranges(self):
        split = chronological_split(_series(100))
        assert split.train == (0, 70)
        assert split.val == (70, 80)
        assert split.test == (80, 100)

    def test_stats_use_train_range_only(self):
        series = _series(100)
        split = chronological_split(series)
        np.testing.assert_allclose(split.mean, series.values[:70].mean(axis=0))
        np.testing.assert_allclose(split.std, series.values[:70].std(axis=0))

    def test_constant_train_variable_rejected(self):
        series = _series(100)
        series.values[:70, 1] = 3.0
        with pytest.raises(DataError, match="v1"):
            chronological_split(series)

    def test_too_short(self):
        with pytest.raises(DataError):
            chronological_split(_series(2))


class TestFewShot:
    def test_floor_rule(self):
        assert few_shot_subset((0, 1000), 0.05) == (0, 50)
        assert few_shot_subset((10, 1010), 0.05) == (10, 60)
        assert few_shot_subset((0, 99), 0.05) == (0, 4)

    def test_full_fraction_is_identity(self):
        assert few_shot_subset((3, 50), 1.0) == (3, 50)

    def test_bad_fraction(self):
        with pytest.raises(DataError):
            few_shot_subset((0, 100), 0.0)

    def test_apply_recomputes_stats(self):
        series = _series(400)
        split = chronological_split(series)
        shrunk = apply_few_shot(split, series, 0.25)
        assert shrunk.train == (0, 70)
        np.testing.assert_allclose(shrunk.mean, series.values[:70].mean(axis=0))
        assert shrunk.val == split.val and shrunk.test == split.test


class TestWindows:
    @pytest.mark.parametrize("n,lookback,horizon,stride",
                             [(50, 8, 4, 1), (50, 8, 4, 3), (13, 6, 7, 1),
                              (12, 6, 7, 1), (40, 10, 10, 7)])
    def test_count_matches_enumeration(self, n, lookback, horizon, stride):
        brute = sum(1 for off in range(0, n + 1, stride) if off + lookback + horizon <= n)
        assert window_count(n, lookback, horizon, stride) == brute

    def test_contiguity_and_standardization(self):
        series = _series(100)
        split = chronological_split(series)
        samples = make_windows(series, split, "train", lookback=8, horizon=4,
                               chart_height=16)
        z = (series.values - split.mean) / split.std
        assert len(samples) == window_count(70, 8, 4, 1)
        s = samples[5]
        assert s.start_index == 5 and s.abs_start == 5
        np.testing.assert_array_equal(s.x_enc, z[5:13])
        np.testing.assert_array_equal(s.target, z[13:17])

    def test_val_windows_offset_into_series(self):
        series = _series(200)
        split = chronological_split(series)
        samples = make_windows(series, split, "val", lookback=6, horizon=3,
                               chart_height=16)
        assert samples[0].abs_start == split.val[0]

    def test_split_too_short_raises(self):
        series = _series(100)
        split = chronological_split(series)
        with pytest.raises(DataError, match="val"):
            make_windows(series, split, "val", lookback=8, horizon=4, chart_height=16)


class TestRenderChart:
    def test_shape_and_dtype(self):
        chart = render_chart(np.linspace(0, 1, 32)[:, None], height=16, patch_count=3)
        assert chart.shape == (16, 48)
        assert chart.dtype == bool

    def test_one_pixel_per_column_per_variable(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(32, 1))
        chart = render_chart(x, height=32, patch_count=2)
        np.testing.assert_array_equal(chart.sum(axis=0), np.ones(64))

    def test_constant_window_draws_mid_height_line(self):
        chart = render_chart(np.full((24, 2), 7.5), height=64, patch_count=1)
        rows = chart.sum(axis=1)
        mid = int(np.rint(0.5 * 63))
        assert rows[mid] == 64
        assert chart.sum() == 64

    def test_two_constants_draw_two_distinct_lines(self):
        x = np.column_stack([np.full(16, -1.0), np.full(16, 4.0)])
        chart = render_chart(x, height=32, patch_count=1)
        assert chart[31].all()   # low constant hugs the bottom
        assert chart[0].all()    # high constant hugs the top
        assert chart.sum() == 2 * 32

    def test_increasing_line_has_monotone_rows(self):
        chart = render_chart(np.linspace(0, 1, 64)[:, None], height=32, patch_count=2)
        rows = np.array([np.flatnonzero(chart[:, c])[0] for c in range(64)])
        assert rows[0] == 31 and rows[-1] == 0
        assert np.all(np.diff(rows) <= 0)

    def test_non_finite_rejected(self):
        x = np.ones((8, 1))
        x[3, 0] = np.nan
        with pytest.raises(NumericError):
            render_chart(x, height=16, patch_count=1)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(20, 3))
        np.testing.assert_array_equal(render_chart(x, 32, 2), render_chart(x, 32, 2))


class TestSynthetic:
    def test_shape_and_determinism(self):
        a = synthetic_sine_trend(n_steps=500, n_vars=2, seed=3, noise_std=0.1)
        b = synthetic_sine_trend(n_steps=500, n_vars=2, seed=3, noise_std=0.1)
        assert a.values.shape == (500, 2)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.timestamps[1].endswith("01:00")

    def test_trains_end_to_end_shapes(self):
        series = synthetic_sine_trend(n_steps=300)
        split = chronological_split(series)
        samples = make_windows(series, split, "train", lookback=24, horizon=12,
                               chart_height=16, patch_count=2)
        assert samples[0].x_enc.shape == (24, 2)
        assert samples[0].chart.shape == (16, 32)


def test_manifest_round_trip(tmp_path):
    series = _series(120)
    split = chronological_split(series)
    samples = {part: make_windows(series, split, part, 6, 3, stride=4, chart_height=8)
               for part in ("train", "val", "test")}
    path = tmp_path / "windows.csv"
    write_windows_manifest(samples, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "start_index,split"
    assert lines[1] == "0,train"
    assert len(lines) == 1 + sum(len(v) for v in samples.values())
