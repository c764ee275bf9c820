"""Multiple linear regression, decoupled per target."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from ._training import FitReport, TrainConfig, adam_epoch_fn, adam_train, check_x, check_xy


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Affine map ``Y = X W + intercept``.

    Attributes
    ----------
    W : ndarray, shape (d, K)
    intercept : ndarray, shape (K,)
    """

    W: np.ndarray
    intercept: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64, ndmin=2)
        b = np.array(self.intercept, dtype=np.float64, ndmin=1)
        if W.shape[1] != b.shape[0]:
            raise ValueError("intercept length must equal the number of targets")
        if not (np.isfinite(W).all() and np.isfinite(b).all()):
            raise ValueError("non-finite coefficients")
        W.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "intercept", b)

    @property
    def n_features(self) -> int:
        return self.W.shape[0]

    @property
    def n_targets(self) -> int:
        return self.W.shape[1]

    def predict(self, X) -> np.ndarray:
        X = check_x(X, self.n_features)
        return X @ self.W + self.intercept


def lr_fit(X, Y, fit_intercept: bool = True, rcond: float | None = None) -> LinearModel:
    """Least-squares fit of every target column.

    Solved with an SVD-based solver on centred data. Rank-deficient inputs
    give the minimum-norm solution and a ``RuntimeWarning``.

    Parameters
    ----------
    X : array_like, shape (N, d)
    Y : array_like, shape (N, K) or (N,)
    fit_intercept : bool
        Add a free intercept per target.
    """
    X, Y = check_xy(X, Y)
    n, d = X.shape
    if n <= d:
        raise ValueError(f"need more rows than features (N={n}, d={d})")
    if fit_intercept:
        xm, ym = X.mean(axis=0), Y.mean(axis=0)
        Xc, Yc = X - xm, Y - ym
    else:
        xm, ym = np.zeros(d), np.zeros(Y.shape[1])
        Xc, Yc = X, Y
    W, _, rank, _ = np.linalg.lstsq(Xc, Yc, rcond=rcond)
    if rank < d:
        warnings.warn(f"rank-deficient design (rank {rank} < {d}); using minimum-norm solution",
                      RuntimeWarning, stacklevel=2)
    return LinearModel(W, ym - xm @ W)


def _unpack(theta: np.ndarray, d: int, K: int) -> tuple[np.ndarray, np.ndarray]:
    return theta[: d * K].reshape(d, K), theta[d * K :]


def lr_finetune(model: LinearModel, X, Y, config: TrainConfig | None = None) -> tuple[LinearModel, FitReport]:
    """Continue fitting ``model`` with Adam on the MSE loss.

    The default configuration is the standard training setup with a patience
    of 3 epochs.
    """
    cfg = config or TrainConfig(patience=3)
    X, Y = check_xy(X, Y)
    d, K = model.W.shape
    if X.shape[1] != d or Y.shape[1] != K:
        raise ValueError(f"model is {d}->{K}, data is {X.shape[1]}->{Y.shape[1]}")
    if cfg.max_epochs == 0:
        return model, FitReport()

    def loss(theta, Xb, Yb):
        W, b = _unpack(theta, d, K)
        r = Xb @ W + b - Yb
        return float(np.mean(r * r))

    def loss_grad(theta, Xb, Yb):
        W, b = _unpack(theta, d, K)
        r = Xb @ W + b - Yb
        g = 2.0 * r / r.size
        return float(np.mean(r * r)), np.concatenate([(Xb.T @ g).ravel(), g.sum(axis=0)])

    theta0 = np.concatenate([model.W.ravel(), model.intercept])
    theta, report = adam_train(theta0, adam_epoch_fn(loss_grad, cfg), loss, X, Y, cfg)
    W, b = _unpack(theta, d, K)
    return replace(model, W=W.copy(), intercept=b.copy()), report
