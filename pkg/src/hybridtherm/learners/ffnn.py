"""Fully connected feed-forward network trained with backpropagation and Adam."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._training import AdamState, FitReport, TrainConfig, adam_train, adam_update, check_x, check_xy, holdout_split


def _sigmoid(z):
    # tanh form avoids overflow warnings for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


ACTIVATIONS = {
    "sigmoid": (_sigmoid, lambda z, a: a * (1.0 - a)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "linear": (lambda z: z, lambda z, a: np.ones_like(z)),
}


@dataclass(frozen=True)
class FfnnConfig(TrainConfig):
    """Architecture and training setup.

    Defaults: two hidden layers of 128 sigmoid units, linear output, batch 32,
    up to 1000 epochs, patience 10, last 20 % of rows for validation, Adam
    with learning rate 1e-3.
    """

    hidden: tuple = (128, 128)
    activation: str = "sigmoid"

    def __post_init__(self):
        super().__post_init__()
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if any(int(h) < 1 for h in self.hidden):
            raise ValueError("hidden layer sizes must be >= 1")


@dataclass(frozen=True, eq=False)
class FfnnModel:
    """Layer stack ``a_k = act_k(a_{k-1} W_k + b_k)``.

    Parameters live in one flat vector ``theta``; ``shapes`` gives the
    (fan_in, fan_out) of each layer and ``activations`` the activation per
    layer (the last one is always ``"linear"``).
    """

    shapes: tuple
    activations: tuple
    theta: np.ndarray
    config: FfnnConfig = field(default_factory=FfnnConfig)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64)
        if theta.size != n_parameters(self.shapes):
            raise ValueError("parameter vector does not match layer shapes")
        for (_, o), (i, _) in zip(self.shapes[:-1], self.shapes[1:]):
            if o != i:
                raise ValueError("consecutive layer dimensions do not match")
        if self.activations[-1] != "linear":
            raise ValueError("the output layer must be linear")
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)

    @property
    def n_features(self) -> int:
        return self.shapes[0][0]

    @property
    def n_targets(self) -> int:
        return self.shapes[-1][1]

    @property
    def layers(self) -> list[tuple[np.ndarray, np.ndarray, str]]:
        """(W, b, activation) per layer, as read-only views of ``theta``."""
        return [(W, b, a) for (W, b), a in zip(_views(self.theta, self.shapes), self.activations)]

    def predict(self, X) -> np.ndarray:
        X = check_x(X, self.n_features)
        return _forward(self.theta, self.shapes, self.activations, X)[-1]

    def jacobian(self, X) -> np.ndarray:
        """Input gradients, shape (N, K, d)."""
        X = check_x(X, self.n_features)
        layers = _views(self.theta, self.shapes)
        acts = _forward(self.theta, self.shapes, self.activations, X)
        # propagate identity seeds from the output back to the input
        J = np.broadcast_to(np.eye(self.n_targets), (X.shape[0], self.n_targets, self.n_targets)).copy()
        for k in range(len(layers) - 1, -1, -1):
            W, b = layers[k]
            z = acts[k] @ W + b
            J = J * ACTIVATIONS[self.activations[k]][1](z, acts[k + 1])[:, None, :]
            J = J @ W.T
        return J


def n_parameters(shapes) -> int:
    return sum(i * o + o for i, o in shapes)


def _views(theta, shapes):
    out, pos = [], 0
    for i, o in shapes:
        W = theta[pos : pos + i * o].reshape(i, o)
        pos += i * o
        out.append((W, theta[pos : pos + o]))
        pos += o
    return out


def _forward(theta, shapes, activations, X):
    acts = [X]
    for (W, b), name in zip(_views(theta, shapes), activations):
        acts.append(ACTIVATIONS[name][0](acts[-1] @ W + b))
    return acts


def loss_and_gradient(theta, shapes, activations, X, Y) -> tuple[float, np.ndarray]:
    """Mean squared error over all entries and its gradient w.r.t. ``theta``."""
    layers = _views(theta, shapes)
    acts = [X]
    pre = []
    for (W, b), name in zip(layers, activations):
        z = acts[-1] @ W + b
        pre.append(z)
        acts.append(ACTIVATIONS[name][0](z))
    r = acts[-1] - Y
    grad = np.empty_like(theta)
    gviews = _views(grad, shapes)
    delta = 2.0 * r / r.size
    for k in range(len(layers) - 1, -1, -1):
        delta = delta * ACTIVATIONS[activations[k]][1](pre[k], acts[k + 1])
        gW, gb = gviews[k]
        gW[...] = acts[k].T @ delta
        gb[...] = delta.sum(axis=0)
        if k:
            delta = delta @ layers[k][0].T
    return float(np.mean(r * r)), grad


def init_model(n_features: int, n_targets: int, config: FfnnConfig = FfnnConfig(),
               output_bias=None) -> FfnnModel:
    """Uniform fan-in initialisation, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    ``output_bias`` (length K) seeds the output-layer bias, typically with the
    target mean; biases are zero otherwise.
    """
    dims = [n_features, *[int(h) for h in config.hidden], n_targets]
    shapes = tuple(zip(dims[:-1], dims[1:]))
    rng = np.random.default_rng([config.seed, 0x1A7])
    theta = np.zeros(n_parameters(shapes))
    views = _views(theta, shapes)
    for (W, b), (i, o) in zip(views, shapes):
        lim = 1.0 / np.sqrt(i)
        W[...] = rng.uniform(-lim, lim, size=(i, o))
    if output_bias is not None:
        views[-1][1][...] = output_bias
    acts = (config.activation,) * len(config.hidden) + ("linear",)
    return FfnnModel(shapes, acts, theta, config)


def _train(model: FfnnModel, X, Y, cfg: TrainConfig) -> tuple[FfnnModel, FitReport]:
    shapes, names = model.shapes, model.activations
    fns = [ACTIVATIONS[a] for a in names]

    def loss(theta, Xb, Yb):
        r = _forward(theta, shapes, names, Xb)[-1] - Yb
        return float(np.mean(r * r))

    def epoch(state: AdamState, Xt, Yt, order) -> float:
        # views into the in-place updated parameter and gradient buffers
        layers = _views(state.theta, shapes)
        grad = np.zeros_like(state.theta)
        glayers = _views(grad, shapes)
        total = 0.0
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            acts = [Xt[idx]]
            for (W, b), (f, _) in zip(layers, fns):
                acts.append(f(acts[-1] @ W + b))
            r = acts[-1] - Yt[idx]
            total += float(np.sum(r * r)) / Yt.shape[1]
            delta = (2.0 / r.size) * r
            for k in range(len(layers) - 1, -1, -1):
                if names[k] != "linear":
                    delta = delta * fns[k][1](None, acts[k + 1])
                gW, gb = glayers[k]
                np.matmul(acts[k].T, delta, out=gW)
                np.sum(delta, axis=0, out=gb)
                if k:
                    delta = delta @ layers[k][0].T
            state.t += 1
            adam_update(state, grad, cfg)
        return total / len(order)

    theta, report = adam_train(model.theta, epoch, loss, np.ascontiguousarray(X), np.ascontiguousarray(Y), cfg)
    return replace(model, theta=theta), report


def ffnn_fit(X, Y, config: FfnnConfig = FfnnConfig()) -> tuple[FfnnModel, FitReport]:
    """Train a fresh network; the best-validation weights are returned.

    Parameters
    ----------
    X : array_like, shape (N, d)
    Y : array_like, shape (N, K)
    config : FfnnConfig
    """
    X, Y = check_xy(X, Y, min_rows=10)
    # output bias from the training block only; validation rows stay unseen
    n_train = holdout_split(X.shape[0], config.validation_fraction)
    model = init_model(X.shape[1], Y.shape[1], config, output_bias=Y[:n_train].mean(axis=0))
    return _train(model, X, Y, config)


def ffnn_finetune(model: FfnnModel, X, Y, config: TrainConfig | None = None,
                  **overrides) -> tuple[FfnnModel, FitReport]:
    """Continue training from the current weights.

    Uses ``config`` if given, otherwise the model's own training setup with a
    patience of 3; keyword ``overrides`` are applied on top.
    """
    X, Y = check_xy(X, Y)
    if X.shape[1] != model.n_features or Y.shape[1] != model.n_targets:
        raise ValueError(f"model is {model.n_features}->{model.n_targets}, "
                         f"data is {X.shape[1]}->{Y.shape[1]}")
    cfg = config if config is not None else replace(model.config, patience=3)
    if overrides:
        cfg = replace(cfg, **overrides)
    return _train(model, X, Y, cfg)
