"""Model-native importance measures and rank comparison."""

from __future__ import annotations

import numpy as np

from ..learners import FfnnModel, ForestModel, LinearModel, check_x


def native_importance(model, X, chunk: int = 2048) -> np.ndarray:
    """Importance per feature and target, shape (d, K).

    * linear: mean over samples of ``|W_jk x_j|``
    * network: mean absolute input gradient ``|d y_k / d x_j|``
    * forest: normalised mean decrease in impurity, the same for every target
    """
    X = check_x(X, model.n_features)
    if isinstance(model, LinearModel):
        return np.abs(X[:, :, None] * model.W[None, :, :]).mean(axis=0)
    if isinstance(model, FfnnModel):
        total = np.zeros((model.n_features, model.n_targets))
        for s in range(0, X.shape[0], chunk):
            J = model.jacobian(X[s : s + chunk])
            total += np.abs(J).sum(axis=0).T
        return total / X.shape[0]
    if isinstance(model, ForestModel):
        return np.repeat(model.feature_importances()[:, None], model.n_targets, axis=1)
    raise TypeError(f"no native importance for {type(model).__name__}")


def top_k(a, k: int) -> list[int]:
    """Indices of the k largest entries; ties go to the lower index."""
    a = np.asarray(a, dtype=np.float64)
    order = np.lexsort((np.arange(a.size), -a))
    return [int(i) for i in order[:k]]


def rank_overlap(a, b, top_k_: int) -> int:
    """Size of the intersection of the top-k index sets of ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("importance vectors must be 1-D and of equal length")
    if not 0 <= top_k_ <= a.size:
        raise ValueError("top_k must be within [0, d]")
    return len(set(top_k(a, top_k_)) & set(top_k(b, top_k_)))
