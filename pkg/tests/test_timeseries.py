import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridtherm.timeseries import (
    ColumnSpec,
    FeatureGroup,
    TimeSeriesFrame,
    apply_standardizer,
    fit_standardizer,
    interpolate_missing,
    invert_standardizer,
    load_csv,
    read_schema,
    resample,
    split_train_test,
    write_csv,
    write_schema,
)

T0 = np.datetime64("2021-01-01T00:00")


def frame(values, names=("a",), step=1, categorical=()):
    values = np.asarray(values, dtype=float).reshape(len(values), -1)
    ts = T0 + np.arange(values.shape[0]) * np.timedelta64(step, "m")
    specs = [ColumnSpec(n, FeatureGroup.ROOM, "", n in categorical) for n in names]
    return TimeSeriesFrame(ts, specs, values, step)


SCHEMA = {
    "drybulb_temp": ColumnSpec("drybulb_temp", FeatureGroup.WEATHER, "degC"),
    "R1_temperature": ColumnSpec("R1_temperature", FeatureGroup.TARGET, "degC"),
}


def test_load_csv_three_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("timestamp,drybulb_temp,R1_temperature\n"
                 "2021-01-01T00:00:00Z,1.0,20\n2021-01-01T00:01:00Z,2.0,21\n2021-01-01T00:02:00Z,3.0,22\n")
    f = load_csv(p, SCHEMA)
    assert f.n_rows == 3
    assert f.step_minutes == 1
    np.testing.assert_array_equal(f.column("R1_temperature"), [20, 21, 22])


def test_load_csv_blank_cell_is_missing(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("timestamp,drybulb_temp,R1_temperature\n"
                 "2021-01-01T00:00:00Z,1.0,20\n2021-01-01T00:01:00Z,2.0,\n2021-01-01T00:02:00Z,3.0,22\n")
    f = load_csv(p, SCHEMA)
    assert np.isnan(f.column("R1_temperature")).sum() == 1
    assert f.missing_count() == 1


def test_load_csv_rejects_shuffled_timestamps(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("timestamp,drybulb_temp,R1_temperature\n"
                 "2021-01-01T00:01:00Z,1.0,20\n2021-01-01T00:00:00Z,2.0,21\n")
    with pytest.raises(ValueError, match="non-monotonic timestamps"):
        load_csv(p, SCHEMA)


def test_load_csv_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "none.csv", SCHEMA)
    p = tmp_path / "d.csv"
    p.write_text("timestamp,other\n2021-01-01T00:00:00Z,1\n")
    with pytest.raises(ValueError, match="not in schema"):
        load_csv(p, SCHEMA)


def test_csv_and_schema_round_trip(tmp_path):
    f = frame([[1.5, 0], [np.nan, 1], [2.25, 1]], names=("x", "w"), categorical=("w",))
    write_csv(f, tmp_path / "f.csv", tmp_path / "f.schema")
    g = load_csv(tmp_path / "f.csv", tmp_path / "f.schema")
    assert g.names == f.names
    assert g.spec("w").categorical
    np.testing.assert_array_equal(np.isnan(g.values), np.isnan(f.values))
    np.testing.assert_allclose(np.nan_to_num(g.values), np.nan_to_num(f.values))
    np.testing.assert_array_equal(g.timestamps, f.timestamps)


def test_schema_round_trip(tmp_path):
    write_schema(list(SCHEMA.values()), tmp_path / "s")
    assert read_schema(tmp_path / "s") == SCHEMA


def test_interpolate_midpoint():
    out = interpolate_missing(frame([20, np.nan, 22]))
    np.testing.assert_allclose(out.column("a"), [20, 21, 22])


def test_interpolate_no_gaps_is_identity():
    f = frame([1.0, 4.0, 2.0])
    np.testing.assert_array_equal(interpolate_missing(f).values, f.values)


def test_interpolate_leading_gap_takes_nearest():
    np.testing.assert_allclose(interpolate_missing(frame([np.nan, 5, 7])).column("a"), [5, 5, 7])


def test_interpolate_categorical_forward_fill():
    f = frame([0, np.nan, np.nan, 1, np.nan], names=("w",), categorical=("w",))
    np.testing.assert_array_equal(interpolate_missing(f).column("w"), [0, 0, 0, 1, 1])


def test_resample_mean_of_bin():
    out = resample(frame(np.arange(1, 16)), 15)
    assert out.n_rows == 1
    assert out.column("a")[0] == 8.0


def test_resample_identity_and_categorical_last():
    f = frame([0, 0, 1], names=("w",), categorical=("w",))
    assert resample(f, 1) is f
    assert resample(f, 3).column("w")[0] == 1


def test_resample_rejects_bad_step():
    with pytest.raises(ValueError):
        resample(frame(np.arange(10), step=2), 3)


def test_split_partition():
    ts = np.arange("2021-01-01", "2023-01-01", dtype="datetime64[D]").astype("datetime64[m]")
    f = TimeSeriesFrame(ts, [ColumnSpec("a", FeatureGroup.ROOM)], np.arange(len(ts), dtype=float))
    train, test = split_train_test(f, "2022-01-01")
    assert train.n_rows == 365 and test.n_rows == 365
    assert train.n_rows + test.n_rows == f.n_rows
    assert train.timestamps[-1] < np.datetime64("2022-01-01") <= test.timestamps[0]
    with pytest.raises(ValueError):
        split_train_test(f, ts[0])


def test_standardizer_population_std():
    f = frame([1.0, 2.0, 3.0])
    s = fit_standardizer(f, ["a"])
    np.testing.assert_allclose(apply_standardizer(s, f).column("a"), [-1.224744871, 0, 1.224744871], atol=1e-9)


def test_standardizer_constant_column_maps_to_zero():
    f = frame([5.0, 5.0, 5.0])
    s = fit_standardizer(f, ["a"])
    np.testing.assert_array_equal(apply_standardizer(s, f).column("a"), [0, 0, 0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30))
def test_standardizer_inverse_round_trip(vals):
    f = frame(vals)
    s = fit_standardizer(f, ["a"])
    back = invert_standardizer(s, apply_standardizer(s, f))
    np.testing.assert_allclose(back.column("a"), vals, atol=1e-9 * (1 + np.max(np.abs(vals))))


def test_frame_rejects_duplicate_columns():
    with pytest.raises(ValueError, match="duplicate column"):
        frame([[1, 2]], names=("a", "a"))
