import json

import numpy as np
import pytest

from hybridtherm.physics import target_column
from hybridtherm.synthetic import (
    WorldConfig,
    generate_dataset,
    generate_occupant_behaviour,
    generate_weather,
    ground_truth_model,
    room_names,
)
from hybridtherm.timeseries import FeatureGroup

SMALL = WorldConfig(years=1, step_minutes=5)


@pytest.fixture(scope="module")
def weather():
    return generate_weather(SMALL)


@pytest.fixture(scope="module")
def behaviour():
    return generate_occupant_behaviour(SMALL)


def test_weather_deterministic(weather):
    again = generate_weather(SMALL)
    np.testing.assert_array_equal(again.values, weather.values)
    other = generate_weather(WorldConfig(years=1, step_minutes=5, seed=1))
    assert not np.array_equal(other.values, weather.values)


def test_solar_zero_at_midnight(weather):
    hours = (weather.minutes // 60) % 24
    minutes = weather.minutes % 60
    at_midnight = (hours == 0) & (minutes == 0)
    assert at_midnight.any()
    for col in ("solar_direct", "solar_diffuse"):
        assert np.all(weather.column(col)[at_midnight] == 0)


def test_drybulb_clipped(weather):
    t = weather.column("drybulb_temp")
    assert t.min() >= -20 and t.max() <= 40


def test_occupancy_binary(behaviour):
    for r in room_names(SMALL.n_rooms):
        assert set(np.unique(behaviour.column(f"{r}_occupancy"))) <= {0.0, 1.0}


def test_long_march_window_episode(behaviour):
    march = behaviour.timestamps.astype("datetime64[M]") == np.datetime64("2021-03")
    need = 48 * 60 // SMALL.step_minutes
    longest = 0
    for r in room_names(SMALL.n_rooms):
        w = behaviour.column(f"{r}_window")[march] > 0.5
        run = 0
        for v in w:
            run = run + 1 if v else 0
            longest = max(longest, run)
    assert longest >= need


def test_behaviour_deterministic(behaviour):
    np.testing.assert_array_equal(generate_occupant_behaviour(SMALL).values, behaviour.values)


def test_missing_fraction_below_one_percent():
    f = generate_dataset(SMALL)
    assert 0 < f.missing_count() / f.values.size < 0.01


def test_row_count_two_years_one_minute():
    f = generate_weather(WorldConfig())
    assert f.n_rows == 2 * 365 * 24 * 60


def test_rooms_settle_toward_setpoint_in_heating_season():
    cfg = WorldConfig(years=1, sensor_noise_std=0.0, occupant_gains=False, missing_fraction=0.0, step_minutes=5)
    f = generate_dataset(cfg)
    jan = f.timestamps.astype("datetime64[M]") == np.datetime64("2021-01")
    for r in room_names(cfg.n_rooms):
        gap = f.column(target_column(r))[jan] - f.column(f"{r}_setpoint")[jan]
        lo, hi = np.percentile(gap, [5, 95])
        assert -1.0 < lo and hi < 0.5


def test_dataset_groups_and_targets():
    f = generate_dataset(WorldConfig(years=1, step_minutes=15, n_rooms=2))
    targets = f.names_in_groups({FeatureGroup.TARGET})
    assert targets == [target_column(r) for r in room_names(2)]
    assert "drybulb_temp" in f.names_in_groups({FeatureGroup.WEATHER})


def test_ground_truth_serializes():
    doc = json.loads(ground_truth_model(SMALL).to_json())
    assert doc


def test_config_validation():
    with pytest.raises(ValueError):
        WorldConfig(step_minutes=7)
    with pytest.raises(ValueError):
        WorldConfig(ar_coefficient=1.0)
    with pytest.raises(ValueError):
        WorldConfig(missing_fraction=0.05)
