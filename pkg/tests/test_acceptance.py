"""Acceptance suite.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion. The scenario matrix on the default synthetic
world (five seeds) is shared by several criteria and takes tens of minutes.
"""

import json
import math
import time
import warnings
from pathlib import Path
from statistics import median

import numpy as np
import pytest
from oracles import brute_shapley, central_difference, max_relative_error, normal_equations

from hybridtherm.evalharness import (
    ExperimentPlan,
    build_tiers,
    explain_model,
    mae,
    mape,
    rmse,
    run_data_quantity_sweep,
    run_explain_study,
    run_scenario_matrix,
)
from hybridtherm.explain import (
    ClusterPartition,
    groupbar_table,
    owen_values,
    partition_from_dendrogram_export,
    shapley_oracle,
    top_k,
)
from hybridtherm.hybrid import LearnerConfig, hybrid_fit, hybrid_predict
from hybridtherm.learners import FfnnConfig, ForestConfig, ffnn_fit, init_model, loss_and_gradient, lr_fit, rf_fit
from hybridtherm.physics import (
    CalibrationOptions,
    RcNetwork,
    Zone,
    calibrate,
    documented_network,
    make_tier,
    perturb_network,
    rooms_of,
    simulate,
    simulate_arrays,
    target_column,
)
from hybridtherm.synthetic import WorldConfig, generate_dataset
from hybridtherm.timeseries import (
    ColumnSpec,
    FeatureGroup,
    TimeSeriesFrame,
    interpolate_missing,
    resample,
    split_train_test,
)

SEEDS = (0, 1, 2, 3, 4)
BOUNDARY = "2022-01-01T00:00"

# -- shared fixtures ---------------------------------------------------------


@pytest.fixture(scope="session")
def world():
    data = resample(interpolate_missing(generate_dataset(WorldConfig())), 15)
    train, test = split_train_test(data, BOUNDARY)
    return data, train, test


@pytest.fixture(scope="session")
def plan():
    cells = (("W", "residual", "ffnn"), ("WB", "residual", "ffnn"),
             *(("WBR", "residual", k) for k in ("lr", "ffnn", "rf")),
             *(("WBR", "surrogate", k) for k in ("lr", "ffnn", "rf")))
    return ExperimentPlan(cells=cells, baseline_learners=("ffnn",), seeds=SEEDS, boundary=BOUNDARY)


@pytest.fixture(scope="session")
def tiers(world, plan):
    return build_tiers(plan, world[0], world[1])


@pytest.fixture(scope="session")
def matrix(world, plan, tiers):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return run_scenario_matrix(plan, world[0], tiers)


@pytest.fixture(scope="session")
def sweep(world, plan, tiers):
    from dataclasses import replace

    p = replace(plan, cells=(("WBR", "residual", "ffnn"),), windows=(12, 2, 1))
    return run_data_quantity_sweep(p, world[0], tiers)


def med(reports, attr="mape", **meta):
    vals = [getattr(r, attr) for r in reports if all(r.metadata[k] == v for k, v in meta.items())]
    assert len(vals) == len(SEEDS), (meta, len(vals))
    return median(vals)


# -- 1: Owen reduces to Shapley ----------------------------------------------


def random_model(kind, d, r):
    X = r.normal(size=(60, d))
    Y = np.column_stack([np.sin(X @ r.normal(size=d)), X @ r.normal(size=d)])
    if kind == "lr":
        return lr_fit(X, Y).predict
    if kind == "ffnn":
        return ffnn_fit(X, Y, FfnnConfig(hidden=(8,), max_epochs=5, seed=int(r.integers(1000))))[0].predict
    return rf_fit(X, Y, ForestConfig(n_trees=5, seed=int(r.integers(1000)))).predict


@pytest.mark.criterion(1)
@pytest.mark.parametrize("kind", ["lr", "ffnn", "rf"])
def test_owen_reduces_to_shapley(kind):
    t0 = time.perf_counter()
    r = np.random.default_rng({"lr": 1, "ffnn": 2, "rf": 3}[kind])
    worst = 0.0
    for _ in range(20):
        d = int(r.integers(2, 9))
        f = random_model(kind, d, r)
        x, bg = r.normal(size=d), r.normal(size=(10, d))
        oracle = shapley_oracle(f, x, bg)
        np.testing.assert_allclose(oracle, brute_shapley(f, x, bg), atol=1e-12)
        for part in (ClusterPartition.singletons(d), ClusterPartition.one_cluster(d)):
            worst = max(worst, float(np.abs(owen_values(f, x, bg, part).values[0] - oracle).max()))
    assert worst < 1e-9
    assert time.perf_counter() - t0 < 120 / 3


# -- 2: efficiency on a fitted residual network ------------------------------


@pytest.fixture(scope="session")
def one_room():
    # one room keeps the residual model at 20 inputs, inside the exact limit
    data = resample(interpolate_missing(generate_dataset(WorldConfig(n_rooms=1))), 15)
    train, test = split_train_test(data, BOUNDARY)
    tier = make_tier("CalibratedDetailed", data, 0, train, train, CalibrationOptions(max_cycles=5))
    model = hybrid_fit("residual", LearnerConfig("ffnn", FfnnConfig(hidden=(32,))), tier, train, "WBR")
    return model, train, test


@pytest.mark.criterion(2)
def test_efficiency_exact(one_room):
    model, train, test = one_room
    t0 = time.perf_counter()
    res = explain_model(model, test, n_samples=100, n_background=10, estimator="exact", background=train)
    assert res.estimator == "exact" and res.n_samples == 100
    pred = hybrid_predict(model, test).values[res.metadata["rows"]]
    err = np.abs(res.values.sum(axis=1) + res.base - pred).max()
    assert err < 1e-6
    assert time.perf_counter() - t0 < 300


# -- 3: least squares --------------------------------------------------------


@pytest.mark.criterion(3)
def test_lr_matches_normal_equations():
    r = np.random.default_rng(33)
    for _ in range(20):
        X = r.normal(size=(200, 8))
        Y = X @ r.normal(size=(8, 3)) + r.normal(size=3) + 0.1 * r.normal(size=(200, 3))
        W, b = normal_equations(X, Y)
        m = lr_fit(X, Y)
        assert np.abs(m.W - W).max() < 1e-8
        assert np.abs(m.intercept - b).max() < 1e-8


# -- 4: network gradients ----------------------------------------------------


@pytest.mark.criterion(4)
def test_gradient_check_random_configs():
    r = np.random.default_rng(44)
    for k in range(10):
        d, K = int(r.integers(1, 6)), int(r.integers(1, 4))
        hidden = tuple(int(h) for h in r.integers(1, 7, size=int(r.integers(0, 3))))
        act = ("sigmoid", "tanh", "linear")[k % 3]
        m = init_model(d, K, FfnnConfig(hidden=hidden, activation=act, seed=k))
        X, Y = r.normal(size=(7, d)), r.normal(size=(7, K))
        _, g = loss_and_gradient(m.theta, m.shapes, m.activations, X, Y)
        num = central_difference(lambda t: loss_and_gradient(t, m.shapes, m.activations, X, Y)[0], m.theta.copy(),
                                 eps=1e-5)
        assert max_relative_error(g, num) < 1e-5, (hidden, act)


# -- 5: RC step response -----------------------------------------------------


def _step_error(step_minutes):
    tau, r_out = 5 * 3600.0, 0.01
    net = RcNetwork((Zone("z", tau / r_out, r_out, initial_temp=20.0),))
    n = 24 * 60 // step_minutes
    ts = np.datetime64("2021-01-01T00:00") + np.arange(n + 1) * np.timedelta64(step_minutes, "m")
    drv = TimeSeriesFrame(ts, [ColumnSpec("drybulb_temp", FeatureGroup.WEATHER, "degC")],
                          np.full((n + 1, 1), 30.0), step_minutes)
    T = simulate_arrays(net, drv)[:, 0]
    exact = 30.0 - 10.0 * np.exp(-np.arange(n + 1) * step_minutes * 60.0 / tau)
    return float(np.abs(T - exact).max())


@pytest.mark.criterion(5)
def test_step_response_and_order():
    assert _step_error(1) < 1e-3
    e = [_step_error(s) for s in (120, 60, 30)]
    assert min(math.log2(e[0] / e[1]), math.log2(e[1] / e[2])) >= 3.5


# -- 6: calibration ----------------------------------------------------------


@pytest.mark.criterion(6)
def test_calibration_self_consistency(world):
    train = world[1]
    truth = documented_network(rooms_of(train))
    targets = simulate(truth, train)
    res = calibrate(perturb_network(truth, 3), train, targets, CalibrationOptions(max_cycles=20))
    assert res.iterations <= 20
    assert res.rmse < 0.05


@pytest.mark.criterion(6)
def test_calibrated_not_worse_on_every_seed(world, tiers):
    data, train, _ = world
    rooms = rooms_of(data)
    Y = train.matrix([target_column(r) for r in rooms])
    for seed in SEEDS:
        cal = tiers[("WBR", seed)]
        unc = make_tier("UncalibratedDetailed", data, seed)
        assert rmse(Y, cal.simulate(train).values) <= rmse(Y, unc.simulate(train).values), seed


# -- 7: metric hand values ---------------------------------------------------


@pytest.mark.criterion(7)
def test_metric_hand_values():
    assert mae([20, 22], [21, 21]) == 1.0 and rmse([20, 22], [21, 21]) == 1.0
    assert abs(mape([20, 22], [21, 21]) - 0.047727) < 1e-6
    assert mae([10], [13]) == 3.0 and rmse([10], [13]) == 3.0
    assert mape([10], [13]) == pytest.approx(0.3, abs=1e-15)
    assert mae([21.5, 19], [21.5, 19]) == rmse([21.5, 19], [21.5, 19]) == mape([21.5, 19], [21.5, 19]) == 0


# -- 8 to 10: orderings on the default world ---------------------------------


@pytest.mark.criterion(8)
def test_scenario_ladder(matrix):
    w, wb, wbr = (med(matrix, scenario=s, strategy="residual", learner="ffnn") for s in ("W", "WB", "WBR"))
    print(f"\nResidual-FFNN median MAPE  W {w:.4%}  WB {wb:.4%}  WBR {wbr:.4%}")
    assert wbr <= wb <= w
    assert wbr <= 0.9 * w


@pytest.mark.criterion(9)
@pytest.mark.parametrize("learner", ["lr", "ffnn", "rf"])
def test_surrogate_worse_than_residual(matrix, learner):
    sur = med(matrix, scenario="WBR", strategy="surrogate", learner=learner)
    res = med(matrix, scenario="WBR", strategy="residual", learner=learner)
    print(f"\nWBR {learner}: surrogate {sur:.4%}  residual {res:.4%}")
    assert sur > res


@pytest.mark.criterion(9)
def test_residual_ffnn_not_worse_than_pure_ffnn(matrix):
    res = med(matrix, scenario="WBR", strategy="residual", learner="ffnn")
    pure = med(matrix, scenario="WBR", strategy="data", learner="ffnn")
    print(f"\nWBR residual-ffnn {res:.4%}  pure ffnn {pure:.4%}")
    assert res <= pure


@pytest.mark.criterion(10)
@pytest.mark.parametrize("strategy", ["residual", "data"])
def test_more_data_not_worse(sweep, strategy):
    m12 = med(sweep, scenario="WBR", strategy=strategy, learner="ffnn", window_months=12)
    m2 = med(sweep, scenario="WBR", strategy=strategy, learner="ffnn", window_months=2)
    print(f"\n{strategy}-ffnn MAPE 12 months {m12:.4%}  2 months {m2:.4%}")
    assert m12 <= m2


@pytest.mark.criterion(10)
def test_one_month_variation_coverage(sweep):
    res = med(sweep, "std_ratio", scenario="WBR", strategy="residual", learner="ffnn", window_months=1)
    pure = med(sweep, "std_ratio", scenario="WBR", strategy="data", learner="ffnn", window_months=1)
    print(f"\n1-month std ratio: residual {res:.3f}  pure {pure:.3f}")
    assert res >= 0.5
    assert pure < res


# -- 11: explanation exports -------------------------------------------------


@pytest.fixture(scope="session")
def study(one_room, tmp_path_factory):
    model, train, test = one_room
    out = tmp_path_factory.mktemp("explain")
    return run_explain_study([model], test, out, n_samples=50, n_background=20, background=train), out


@pytest.mark.criterion(11)
def test_beeswarm_holds_top_ten(study):
    st, out = study
    (res,) = st.results.values()
    rows = (out / f"{res.label}_beeswarm.csv").read_text().strip().splitlines()[1:]
    for t, name in enumerate(res.target_names):
        feats = {row.split(",")[3] for row in rows if row.split(",")[1] == name}
        assert feats == {res.feature_names[i] for i in top_k(res.mean_abs()[:, t], 10)}


@pytest.mark.criterion(11)
def test_groupbar_sums(study):
    st, out = study
    (res,) = st.results.values()
    np.testing.assert_allclose(groupbar_table(res).sum(axis=0), res.mean_abs().sum(axis=0), rtol=0, atol=1e-9)
    rows = (out / f"{res.label}_groupbar.csv").read_text().strip().splitlines()[1:]
    total = sum(float(r.split(",")[-1]) for r in rows)
    assert total == pytest.approx(res.mean_abs().sum(), abs=1e-6)


@pytest.mark.criterion(11)
def test_dendrogram_reconstructs_partition(study):
    st, out = study
    (res,) = st.results.values()
    doc = json.loads((out / f"{res.label}_dendrogram.json").read_text())
    assert partition_from_dendrogram_export(doc) == res.partition
    assert len(st.rank_table) == 5


# -- 12: determinism ---------------------------------------------------------


def _small_matrix(out: Path):
    data = resample(interpolate_missing(generate_dataset(WorldConfig(n_rooms=2, step_minutes=15))), 60)
    plan = ExperimentPlan(seeds=(0,), out_dir=str(out), ffnn=FfnnConfig(hidden=(8,), max_epochs=5),
                          forest=ForestConfig(n_trees=5), calibration=CalibrationOptions(max_cycles=2, golden_iters=5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        run_scenario_matrix(plan, data)
    return {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}


@pytest.mark.criterion(12)
def test_matrix_byte_identical(tmp_path):
    a = _small_matrix(tmp_path / "a")
    b = _small_matrix(tmp_path / "b")
    assert len(a) == 4
    assert a == b
