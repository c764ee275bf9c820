"""Shared pieces for gradient-trained learners: configs, Adam, early stopping."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch Adam with early stopping on a chronological hold-out.

    The validation rows are the last ``validation_fraction`` of the training
    rows, in their given order.
    """

    batch_size: int = 32
    max_epochs: int = 1000
    patience: int = 10
    validation_fraction: float = 0.2
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass(frozen=True)
class FitReport:
    """Loss traces of an iterative fit.

    Entry 0 of each trace is the loss before the first update, so traces are
    non-empty even when no epoch ran. Closed-form fits return empty traces.
    """

    train_loss: tuple = ()
    val_loss: tuple = ()
    epochs_run: int = 0
    early_stopped: bool = False
    best_epoch: int = 0


def check_xy(X, Y, min_rows: int = 1) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError("X and Y must be 2-D")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"row mismatch: X has {X.shape[0]}, Y has {Y.shape[0]}")
    if X.shape[0] < min_rows:
        raise ValueError(f"need at least {min_rows} rows, got {X.shape[0]}")
    if not (np.isfinite(X).all() and np.isfinite(Y).all()):
        raise ValueError("non-finite values in X or Y")
    return X, Y


def check_x(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :] if n_features > 1 or X.size == 1 else X[:, None]
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got shape {X.shape}")
    return X


def holdout_split(n: int, fraction: float) -> int:
    """Index where the chronological validation block starts."""
    n_val = int(round(n * fraction))
    if fraction > 0 and (n_val < 1 or n - n_val < 1):
        raise ValueError(f"{n} rows are too few for a {fraction:.0%} validation split")
    return n - n_val


@dataclass
class AdamState:
    theta: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: int = 0


@numba.njit(cache=True)
def _adam_kernel(theta, m, v, g, step, b1, b2, eps):
    for j in range(theta.shape[0]):
        m[j] = b1 * m[j] + (1.0 - b1) * g[j]
        v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j]
        theta[j] -= step * m[j] / (np.sqrt(v[j]) + eps)


def adam_update(state: AdamState, g: np.ndarray, cfg: "TrainConfig") -> None:
    """One Adam step in place; ``state.t`` must already count this step."""
    step = cfg.learning_rate * math.sqrt(1 - cfg.beta2**state.t) / (1 - cfg.beta1**state.t)
    _adam_kernel(state.theta, state.m, state.v, g, step, cfg.beta1, cfg.beta2, cfg.epsilon)


def adam_epoch_fn(loss_grad: Callable[[np.ndarray, np.ndarray, np.ndarray], tuple[float, np.ndarray]],
                  cfg: "TrainConfig"):
    """Build a per-epoch Adam pass from a mini-batch gradient function."""

    def epoch(state: AdamState, Xt, Yt, order) -> float:
        total = 0.0
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s : s + cfg.batch_size]
            lb, g = loss_grad(state.theta, Xt[idx], Yt[idx])
            total += lb * len(idx)
            state.t += 1
            adam_update(state, g, cfg)
        return total / len(order)

    return epoch


def adam_train(
    theta: np.ndarray,
    epoch_fn: Callable[[AdamState, np.ndarray, np.ndarray, np.ndarray], float],
    loss: Callable[[np.ndarray, np.ndarray, np.ndarray], float],
    X: np.ndarray,
    Y: np.ndarray,
    cfg: TrainConfig,
) -> tuple[np.ndarray, FitReport]:
    """Minimise a flat-parameter MSE objective with Adam.

    ``epoch_fn`` runs one shuffled pass of mini-batch updates in place and
    returns the mean mini-batch loss, which is recorded as the epoch's
    training loss (entry 0 is the full training loss before any update).
    Returns the parameters with the best validation loss (training loss when
    there is no validation block) and the loss traces.
    """
    cut = holdout_split(X.shape[0], cfg.validation_fraction)
    Xt, Yt, Xv, Yv = X[:cut], Y[:cut], X[cut:], Y[cut:]
    has_val = Xv.shape[0] > 0
    rng = np.random.default_rng([cfg.seed, 0xADA])
    state = AdamState(theta.copy(), np.zeros_like(theta), np.zeros_like(theta))

    tl = loss(state.theta, Xt, Yt)
    vl = loss(state.theta, Xv, Yv) if has_val else tl
    train_trace, val_trace = [tl], [vl]
    best, best_theta, best_epoch, wait = vl, state.theta.copy(), 0, 0
    stopped = False
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        tl = epoch_fn(state, Xt, Yt, rng.permutation(Xt.shape[0]))
        vl = loss(state.theta, Xv, Yv) if has_val else loss(state.theta, Xt, Yt)
        train_trace.append(tl)
        val_trace.append(vl)
        if vl < best:
            best, best_theta, best_epoch, wait = vl, state.theta.copy(), epoch, 0
        else:
            wait += 1
            if wait >= cfg.patience:
                stopped = True
                break
    report = FitReport(tuple(train_trace), tuple(val_trace), epoch, stopped, best_epoch)
    return best_theta, report
