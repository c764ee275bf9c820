import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import central_difference, max_relative_error, normal_equations

from hybridtherm.learners import (
    FfnnConfig,
    FfnnModel,
    ForestConfig,
    ForestModel,
    LinearModel,
    TrainConfig,
    Tree,
    ffnn_finetune,
    ffnn_fit,
    init_model,
    load_model,
    loss_and_gradient,
    lr_finetune,
    lr_fit,
    predict,
    rf_fit,
    rf_warmstart_extend,
    save_model,
)

rng = np.random.default_rng(7)


# -- linear ------------------------------------------------------------------


def test_lr_hand_example():
    m = lr_fit([[1], [2], [3]], [[2], [4], [6]], fit_intercept=False)
    np.testing.assert_allclose(m.W, [[2.0]], atol=1e-12)


def test_lr_zero_targets():
    m = lr_fit(rng.normal(size=(20, 3)), np.zeros((20, 2)))
    assert np.all(m.W == 0) and np.all(m.intercept == 0)


def test_lr_decoupled_outputs():
    X = rng.normal(size=(40, 3))
    y = X @ [1.0, -2.0, 0.5] + rng.normal(size=40)
    m = lr_fit(X, np.column_stack([y, 3 * y]))
    np.testing.assert_allclose(m.W[:, 1], 3 * m.W[:, 0], atol=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_lr_matches_normal_equations(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(60, 4))
    Y = X @ r.normal(size=(4, 2)) + r.normal(size=(60, 2))
    W, b = normal_equations(X, Y)
    m = lr_fit(X, Y)
    np.testing.assert_allclose(m.W, W, atol=1e-9)
    np.testing.assert_allclose(m.intercept, b, atol=1e-9)


def test_lr_rank_deficient_warns():
    X = rng.normal(size=(30, 2))
    X = np.column_stack([X, X[:, 0]])
    with pytest.warns(RuntimeWarning, match="rank-deficient"):
        lr_fit(X, X[:, :1])


def test_lr_needs_more_rows_than_features():
    with pytest.raises(ValueError):
        lr_fit(np.ones((3, 3)), np.ones((3, 1)))


def test_affine_prediction():
    m = LinearModel(np.array([[2.0]]), np.array([1.0]))
    assert predict(m, [[3.0]])[0, 0] == 7.0
    with pytest.raises(ValueError):
        predict(m, [[1.0, 2.0]])


def test_lr_finetune_exact_fit_stays_put():
    X = rng.normal(size=(200, 2))
    Y = X @ [[1.0], [-1.0]] + 0.5
    m = lr_fit(X, Y)
    m2, _ = lr_finetune(m, X, Y)
    assert np.abs(m2.W - m.W).max() < 1e-6
    assert np.abs(m2.intercept - m.intercept).max() < 1e-6


def test_lr_finetune_zero_epochs_unchanged():
    m = LinearModel(np.array([[0.3]]), np.array([0.1]))
    x = rng.normal(size=(50, 1))
    m2, rep = lr_finetune(m, x, 2 * x, TrainConfig(max_epochs=0))
    np.testing.assert_array_equal(m2.W, m.W)
    assert rep.epochs_run == 0


def test_lr_finetune_converges_from_zero():
    x = rng.normal(size=(500, 1))
    m0 = LinearModel(np.zeros((1, 1)), np.zeros(1))
    m, _ = lr_finetune(m0, x, 2 * x, TrainConfig(patience=3, learning_rate=1e-2))
    assert abs(m.W[0, 0] - 2) < 1e-2


# -- network -----------------------------------------------------------------


@pytest.mark.parametrize("activation", ["sigmoid", "tanh", "linear"])
@pytest.mark.parametrize("hidden", [(), (4,), (4, 3)])
def test_ffnn_gradient_check(activation, hidden):
    model = init_model(3, 2, FfnnConfig(hidden=hidden, activation=activation, seed=3))
    X, Y = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
    _, g = loss_and_gradient(model.theta, model.shapes, model.activations, X, Y)
    num = central_difference(lambda t: loss_and_gradient(t, model.shapes, model.activations, X, Y)[0],
                             model.theta.copy())
    assert max_relative_error(g, num) < 1e-5


def test_ffnn_learns_linear_map():
    x = rng.uniform(-1, 1, size=(400, 1))
    m, rep = ffnn_fit(x, 2 * x, FfnnConfig(hidden=(), activation="linear", learning_rate=1e-2))
    W, _ = m.layers[0][:2]
    assert abs(W[0, 0] - 2) < 1e-2
    assert rep.epochs_run > 0


def test_ffnn_zero_epochs_returns_initial_model():
    cfg = FfnnConfig(hidden=(5,), max_epochs=0, seed=4)
    X, Y = rng.normal(size=(30, 2)), rng.normal(size=(30, 1))
    m, rep = ffnn_fit(X, Y, cfg)
    assert rep.epochs_run == 0
    init = init_model(2, 1, cfg, Y[: len(Y) - round(0.2 * len(Y))].mean(axis=0))
    np.testing.assert_allclose(m.predict(X), init.predict(X), atol=1e-12)


def test_ffnn_zero_weights_output_is_bias():
    m = init_model(3, 2, FfnnConfig(hidden=(4,)))
    theta = np.zeros_like(m.theta)
    theta[-2:] = [1.5, -2.0]
    z = FfnnModel(m.shapes, m.activations, theta, m.config)
    np.testing.assert_allclose(z.predict(rng.normal(size=(6, 3))), np.tile([1.5, -2.0], (6, 1)))


def test_ffnn_early_stopping_restores_best():
    X = rng.normal(size=(300, 3))
    Y = np.sin(X[:, :1]) + 0.5 * rng.normal(size=(300, 1))
    m, rep = ffnn_fit(X, Y, FfnnConfig(hidden=(32,), max_epochs=200, patience=5, learning_rate=1e-2))
    assert rep.val_loss[rep.best_epoch] == min(rep.val_loss)
    if rep.early_stopped:
        assert rep.epochs_run == rep.best_epoch + 5


def test_ffnn_finetune_shifts_toward_new_target():
    x = rng.uniform(-1, 1, size=(400, 1))
    m, _ = ffnn_fit(x, x, FfnnConfig(hidden=(8,), learning_rate=1e-2, seed=1))
    frozen = np.mean((m.predict(x) - (x + 1)) ** 2)
    tuned, _ = ffnn_finetune(m, x, x + 1, learning_rate=1e-2)
    assert np.mean((tuned.predict(x) - (x + 1)) ** 2) < frozen
    assert np.mean(tuned.predict(x) - m.predict(x)) > 0.5


def test_ffnn_finetune_zero_epochs_unchanged():
    x = rng.normal(size=(50, 1))
    m, _ = ffnn_fit(x, x, FfnnConfig(hidden=(3,), max_epochs=3))
    m2, rep = ffnn_finetune(m, x, x + 1, max_epochs=0)
    np.testing.assert_array_equal(m2.theta, m.theta)
    assert rep.epochs_run == 0


def test_ffnn_finetune_same_data_tiny_rate():
    x = rng.uniform(-1, 1, size=(300, 1))
    m, rep0 = ffnn_fit(x, x ** 2, FfnnConfig(hidden=(8,), learning_rate=1e-2))
    _, rep = ffnn_finetune(m, x, x ** 2, learning_rate=1e-7)
    assert min(rep.val_loss) <= rep.val_loss[0] + 1e-12


def test_ffnn_jacobian_of_affine_net():
    m = init_model(3, 2, FfnnConfig(hidden=(4,), activation="linear", seed=2))
    (W1, _, _), (W2, _, _) = m.layers
    J = m.jacobian(rng.normal(size=(5, 3)))
    np.testing.assert_allclose(J, np.broadcast_to((W1 @ W2).T, J.shape), atol=1e-12)


# -- forest ------------------------------------------------------------------


def test_single_tree_memorizes():
    X, Y = rng.normal(size=(50, 4)), rng.normal(size=(50, 2))
    f = rf_fit(X, Y, ForestConfig(n_trees=1, bootstrap=False))
    np.testing.assert_array_equal(f.predict(X), Y)


def test_constant_target():
    X = rng.normal(size=(30, 3))
    f = rf_fit(X, np.full((30, 1), 4.2), ForestConfig(n_trees=5))
    np.testing.assert_allclose(f.predict(rng.normal(size=(10, 3))), 4.2)


XOR_X = np.array([[0, 0], [0, 1], [1, 0], [1, 1.0]])
XOR_Y = np.array([0, 1, 1, 0.0])


def test_xor_without_bootstrap():
    f = rf_fit(XOR_X, XOR_Y, ForestConfig(n_trees=100, bootstrap=False))
    assert np.mean((f.predict(XOR_X)[:, 0] - XOR_Y) ** 2) < 0.05


def test_warmstart_extension():
    X, Y = rng.normal(size=(60, 3)), rng.normal(size=(60, 1))
    f = rf_fit(X, Y, ForestConfig(n_trees=4))
    assert rf_warmstart_extend(f, X, Y, 0) is f
    g = rf_warmstart_extend(f, X, Y)
    assert g.n_trees == 104
    for old, new in zip(f.trees, g.trees):
        np.testing.assert_array_equal(old.predict(X), new.predict(X))


def _leaf(v):
    a = np.array
    return Tree(a([-1]), a([0.0]), a([-1]), a([-1]), a([[v]]), a([1]), a([0.0]))


def test_forest_mean_of_trees():
    f = ForestModel((_leaf(4.0), _leaf(6.0)), 1, 1)
    assert f.predict([[0.0]])[0, 0] == 5.0


def test_unused_feature_has_zero_importance():
    X = np.column_stack([rng.normal(size=80), np.zeros(80)])
    f = rf_fit(X, X[:, :1] ** 2, ForestConfig(n_trees=10))
    imp = f.feature_importances()
    assert imp[1] == 0 and imp.sum() == pytest.approx(1.0)


def test_forest_seed_determinism():
    X, Y = rng.normal(size=(40, 3)), rng.normal(size=(40, 2))
    a = rf_fit(X, Y, ForestConfig(n_trees=5, seed=9))
    b = rf_fit(X, Y, ForestConfig(n_trees=5, seed=9))
    np.testing.assert_array_equal(a.predict(X), b.predict(X))


# -- persistence -------------------------------------------------------------


@pytest.mark.parametrize("kind", ["lr", "ffnn", "rf"])
def test_save_load_round_trip(tmp_path, kind):
    X, Y = rng.normal(size=(40, 3)), rng.normal(size=(40, 2))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = {"lr": lambda: lr_fit(X, Y),
                 "ffnn": lambda: ffnn_fit(X, Y, FfnnConfig(hidden=(4,), max_epochs=3))[0],
                 "rf": lambda: rf_fit(X, Y, ForestConfig(n_trees=3))}[kind]()
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(back.predict(X), model.predict(X))
