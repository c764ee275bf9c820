import warnings
from dataclasses import replace

import numpy as np
import pytest

from hybridtherm.evalharness import mape
from hybridtherm.hybrid import (
    HybridStrategy,
    LearnerConfig,
    SimulationCache,
    data_only_fit,
    feature_columns,
    hybrid_fit,
    hybrid_predict,
    load_bundle,
    physics_only_predict,
    pred_column,
    save_bundle,
    scenario_of,
    simulate_scenario,
)
from hybridtherm.learners import FfnnConfig, ForestConfig, LinearModel
from hybridtherm.physics import CalibrationOptions, make_tier, rooms_of, sim_column, target_column
from hybridtherm.synthetic import WorldConfig, generate_dataset
from hybridtherm.timeseries import ColumnSpec, FeatureGroup, interpolate_missing, resample, split_train_test

SMALL_FFNN = FfnnConfig(hidden=(16,), max_epochs=20)
LR = LearnerConfig("lr")


@pytest.fixture(scope="module")
def world():
    data = resample(interpolate_missing(generate_dataset(WorldConfig(n_rooms=2, step_minutes=5))), 60)
    train, test = split_train_test(data, "2022-01-01")
    return data, train, test, rooms_of(data)


@pytest.fixture(scope="module")
def wb_tier(world):
    return make_tier("UncalibratedDetailed", world[0], 0)


@pytest.fixture(scope="module")
def wbr_tier(world):
    data, train, _, _ = world
    return make_tier("CalibratedDetailed", data, 0, train, train, CalibrationOptions(max_cycles=4, golden_iters=6))


def quiet(fn, *a, **k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fn(*a, **k)


def targets_from_simulation(frame, tier, scenario, transform=lambda s: s):
    sim = simulate_scenario(tier, frame, scenario_of(scenario), SimulationCache())
    specs = [ColumnSpec(target_column(r), FeatureGroup.TARGET, "degC") for r in tier.rooms]
    return frame.with_columns(specs, transform(sim.values))


def test_residual_of_exact_physics_is_zero(world, wb_tier):
    train = targets_from_simulation(world[1], wb_tier, "WB")
    m = quiet(hybrid_fit, "residual", LR, wb_tier, train, "WB")
    assert np.abs(m.learner.W).max() < 1e-10
    assert np.abs(m.learner.intercept).max() < 1e-10


def test_assistant_feature_count(world, wb_tier):
    train = world[1]
    m = quiet(hybrid_fit, "assistant", LR, wb_tier, train, "WB")
    n_x = len(feature_columns(train, scenario_of("WB")))
    assert len(m.input_names) == n_x + len(wb_tier.rooms)
    assert m.learner.n_features == n_x + len(wb_tier.rooms)
    assert m.input_names[-len(wb_tier.rooms):] == tuple(sim_column(r) for r in wb_tier.rooms)


def test_surrogate_reproduces_affine_simulation(world, wb_tier):
    train = world[1]
    sim = simulate_scenario(wb_tier, train, scenario_of("WB"), SimulationCache())
    aux = [ColumnSpec(f"aux_{k}", FeatureGroup.BUILDING, "degC") for k in range(sim.values.shape[1])]
    train = train.with_columns(aux, 2 * sim.values + 1)
    m = quiet(hybrid_fit, "surrogate", LR, wb_tier, train, "WB")
    pred = hybrid_predict(m, train).values
    np.testing.assert_allclose(pred, sim.values, atol=1e-8)


def test_zero_residual_learner_returns_simulation(world, wb_tier):
    _, train, test, rooms = world
    m = quiet(hybrid_fit, "residual", LR, wb_tier, train, "WB")
    zero = LinearModel(np.zeros_like(m.learner.W), np.zeros_like(m.learner.intercept))
    pred = hybrid_predict(replace(m, learner=zero), test)
    sim = physics_only_predict(wb_tier, test, "WB")
    np.testing.assert_array_equal(pred.values, sim.values)
    assert pred.names == [pred_column(r) for r in rooms]


def test_simulation_shared_between_strategies(world, wb_tier):
    train = world[1]
    cache = SimulationCache()
    quiet(hybrid_fit, "assistant", LR, wb_tier, train, "WB", cache)
    quiet(hybrid_fit, "residual", LR, wb_tier, train, "WB", cache)
    assert cache.misses == 1 and cache.hits == 1


def test_residual_lr_beats_physics_on_wbr(world, wbr_tier):
    _, train, test, rooms = world
    m = quiet(hybrid_fit, "residual", LR, wbr_tier, train, "WBR")
    Y = test.matrix([target_column(r) for r in rooms])
    hybrid = mape(Y, hybrid_predict(m, test).values)
    physics = mape(Y, physics_only_predict(wbr_tier, test, "WBR").values)
    assert hybrid < physics


def test_physics_only_is_the_simulation(world, wb_tier):
    test = world[2]
    a = physics_only_predict(wb_tier, test)
    np.testing.assert_array_equal(a.values, wb_tier.simulate(test).values)
    np.testing.assert_array_equal(physics_only_predict(wb_tier, test).values, a.values)


def test_archetype_predictions_identical_across_rooms(world):
    tier = make_tier("Archetype", world[0], 0)
    v = physics_only_predict(tier, world[2], "W").values
    np.testing.assert_array_equal(v[:, 0], v[:, 1])


def test_tier_must_match_scenario(world, wb_tier):
    with pytest.raises(ValueError, match="tier"):
        hybrid_fit("residual", LR, wb_tier, world[1], "WBR")


def test_missing_target_rejected(world, wb_tier):
    train = world[1].drop([target_column(world[3][0])])
    with pytest.raises(ValueError, match="missing target"):
        hybrid_fit("residual", LR, wb_tier, train, "WB")


def test_scenario_hides_room_columns(world, wb_tier):
    m = quiet(hybrid_fit, "surrogate", LR, wb_tier, world[1], "WB")
    groups = {world[1].spec(n).group for n in m.feature_names}
    assert FeatureGroup.ROOM not in groups and FeatureGroup.TARGET not in groups


def test_augmentation_reports_both_stages(world, wb_tier):
    cfg = LearnerConfig("ffnn", ffnn=SMALL_FFNN)
    m = hybrid_fit("augmentation", cfg, wb_tier, world[1], "WB")
    assert m.pretrain_report is not None and m.pretrain_report.epochs_run > 0
    rf = hybrid_fit("augmentation", LearnerConfig("rf", forest=ForestConfig(n_trees=3), extra_trees=2),
                    wb_tier, world[1], "WB")
    assert rf.learner.n_trees == 5


@pytest.mark.parametrize("strategy", [s.value for s in HybridStrategy] + [None])
def test_bundle_round_trip(tmp_path, world, wb_tier, strategy):
    _, train, test, rooms = world
    cfg = LearnerConfig("ffnn", ffnn=replace(SMALL_FFNN, max_epochs=2))
    if strategy is None:
        m = data_only_fit(cfg, train, "WB", rooms)
    else:
        m = hybrid_fit(strategy, cfg, wb_tier, train, "WB")
    save_bundle(m, tmp_path / "b")
    back = load_bundle(tmp_path / "b")
    assert back.label == m.label
    np.testing.assert_array_equal(hybrid_predict(back, test).values, hybrid_predict(m, test).values)
