import math

import numpy as np
import pytest

from hybridtherm.physics import (
    CalibrationOptions,
    PhysicsTier,
    RcNetwork,
    Zone,
    calibrate,
    make_tier,
    perturb_network,
    simulate,
    simulate_arrays,
    target_column,
)
from hybridtherm.synthetic import WorldConfig, generate_dataset
from hybridtherm.timeseries import ColumnSpec, FeatureGroup, TierKind, TimeSeriesFrame, interpolate_missing, resample

T0 = np.datetime64("2021-01-01T00:00")
TAU = 5 * 3600.0


def outdoor(values, step=1):
    values = np.asarray(values, dtype=float)
    ts = T0 + np.arange(values.size) * np.timedelta64(step, "m")
    return TimeSeriesFrame(ts, [ColumnSpec("drybulb_temp", FeatureGroup.WEATHER, "degC")], values[:, None], step)


def single_zone(t0=20.0, r=0.01, **kw):
    return RcNetwork((Zone("z", TAU / r, r, initial_temp=t0, **kw),))


def step_error(step_minutes: int) -> float:
    n = 24 * 60 // step_minutes
    T = simulate_arrays(single_zone(), outdoor(np.full(n + 1, 30.0), step_minutes))[:, 0]
    t = np.arange(n + 1) * step_minutes * 60.0
    exact = 30.0 + (20.0 - 30.0) * np.exp(-t / TAU)
    return float(np.abs(T - exact).max())


def test_equilibrium_constant():
    T = simulate(single_zone(), outdoor(np.full(600, 20.0))).values[:, 0]
    np.testing.assert_allclose(T, 20.0, atol=1e-12)


def test_step_response_matches_exponential():
    assert step_error(1) < 1e-3


def test_rk4_convergence_order():
    e = [step_error(s) for s in (120, 60, 30)]
    orders = [math.log2(e[0] / e[1]), math.log2(e[1] / e[2])]
    assert min(orders) >= 3.5


def test_symmetric_zones_identical():
    z = Zone("a", TAU / 0.01, 0.01, initial_temp=18.0)
    net = RcNetwork((z, Zone("b", TAU / 0.01, 0.01, initial_temp=18.0)), (("a", "b", 0.05),))
    T = simulate_arrays(net, outdoor(10 + 5 * np.sin(np.arange(2000) / 100)))
    np.testing.assert_array_equal(T[:, 0], T[:, 1])


def test_network_validation():
    with pytest.raises(ValueError):
        Zone("z", -1.0, 0.01)
    with pytest.raises(ValueError):
        RcNetwork((Zone("a", 1.0, 1.0), Zone("a", 1.0, 1.0)))
    with pytest.raises(ValueError):
        RcNetwork((Zone("a", 1.0, 1.0), Zone("b", 1.0, 1.0)), (("a", "b", 0.0),))


def test_network_json_round_trip():
    net = RcNetwork((Zone("a", 1e6, 0.02, heat_gain=3.0), Zone("b", 2e6, 0.03)), (("a", "b", 0.1),))
    back = RcNetwork.from_json(net.to_json())
    assert back == net
    assert back.digest() == net.digest()


def _drivers(n=3 * 24 * 60 // 10, step=10):
    t = np.arange(n) * step / 60.0
    return outdoor(5 + 6 * np.sin(2 * np.pi * t / 24), step)


def test_calibration_zero_cycles_is_identity():
    net = single_zone()
    drv = _drivers()
    targets = simulate(single_zone(r=0.02), drv)
    res = calibrate(net, drv, targets, CalibrationOptions(max_cycles=0))
    assert res.iterations == 0
    assert res.network.zones[0].r_out == net.zones[0].r_out
    assert res.rmse == pytest.approx(res.initial_rmse, rel=1e-12)


def test_calibration_recovers_doubled_resistance():
    truth = RcNetwork((Zone("z", TAU / 0.01, 0.02, initial_temp=20.0),))
    start = single_zone()
    drv = _drivers()
    res = calibrate(start, drv, simulate(truth, drv), CalibrationOptions(max_cycles=10))
    assert res.rmse <= 0.5 * res.initial_rmse
    assert res.history[-1] <= res.history[0]


@pytest.fixture(scope="module")
def small_world():
    data = resample(interpolate_missing(generate_dataset(WorldConfig(years=2, n_rooms=2, step_minutes=5))), 60)
    train = data.rows(data.timestamps < np.datetime64("2022-01-01"))
    return data, train


def test_archetype_rooms_identical(small_world):
    data, train = small_world
    tier = make_tier("Archetype", data, 0)
    sim = tier.simulate(train).values
    np.testing.assert_array_equal(sim[:, 0], sim[:, 1])


def test_same_seed_same_perturbation(small_world):
    data, _ = small_world
    a = make_tier("UncalibratedDetailed", data, 3)
    b = make_tier("UncalibratedDetailed", data, 3)
    c = make_tier("UncalibratedDetailed", data, 4)
    assert a.network == b.network
    assert a.network != c.network
    assert perturb_network(a.network, 1) == perturb_network(a.network, 1)


def test_calibrated_not_worse_than_uncalibrated(small_world):
    data, train = small_world
    opts = CalibrationOptions(max_cycles=3, golden_iters=6)
    unc = make_tier("UncalibratedDetailed", data, 0)
    cal = make_tier("CalibratedDetailed", data, 0, train, train, opts)
    Y = train.matrix([target_column(r) for r in unc.rooms])
    rmse_u = np.sqrt(np.mean((unc.simulate(train).values - Y) ** 2))
    rmse_c = np.sqrt(np.mean((cal.simulate(train).values - Y) ** 2))
    assert rmse_c <= rmse_u
    assert cal.tier == TierKind.CALIBRATED_DETAILED


def test_calibrated_tier_needs_training_data(small_world):
    with pytest.raises(ValueError):
        make_tier("CalibratedDetailed", small_world[0], 0)


def test_tier_round_trip(small_world):
    data, train = small_world
    tier = make_tier("UncalibratedDetailed", data, 2)
    back = PhysicsTier.from_dict(tier.to_dict())
    np.testing.assert_array_equal(back.simulate(train).values, tier.simulate(train).values)
