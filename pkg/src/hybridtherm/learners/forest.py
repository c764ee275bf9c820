"""Random-forest regression from bagged, greedily grown CART trees.

Trees are multi-output: one tree predicts all K targets and splits minimise
the summed squared error over targets. Bootstrap resampling is expressed as
integer sample weights, and each tree grows from per-feature orderings that
are sorted once per forest and partitioned stably at each split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ._training import check_x, check_xy


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters.

    ``max_features=None`` means ``ceil(d / 3)`` features per split.
    """

    n_trees: int = 300
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    bootstrap: bool = True
    max_features: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")

    def features_per_split(self, d: int) -> int:
        return min(d, self.max_features or math.ceil(d / 3))


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat CART storage; leaves have ``feature == -1``.

    ``value[j]`` is the leaf constant c_j (mean of the node's weighted rows)
    and ``impurity_decrease[j]`` the weighted squared-error reduction of the
    split at node ``j`` (zero at leaves).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity_decrease: np.ndarray

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "value", "n_samples", "impurity_decrease"):
            getattr(self, name).flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict_tree(self.feature, self.threshold, self.left, self.right, self.value, X)


@dataclass(frozen=True, eq=False)
class ForestModel:
    """Average of ``len(trees)`` regression trees."""

    trees: tuple
    n_features: int
    n_targets: int
    config: ForestConfig = field(default_factory=ForestConfig)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(check_x(X, self.n_features))
        if not self.trees:
            raise ValueError("forest has no trees")
        out = np.zeros((X.shape[0], self.n_targets))
        for t in self.trees:
            out += _predict_tree(t.feature, t.threshold, t.left, t.right, t.value, X)
        return out / len(self.trees)

    def feature_importances(self) -> np.ndarray:
        """Mean decrease in impurity, normalised per tree and overall to sum 1."""
        imp = np.zeros(self.n_features)
        for t in self.trees:
            per = np.bincount(t.feature[t.feature >= 0], weights=t.impurity_decrease[t.feature >= 0],
                              minlength=self.n_features)
            if per.sum() > 0:
                imp += per / per.sum()
        total = imp.sum()
        return imp / total if total > 0 else imp


@numba.njit(cache=True)
def _predict_tree(feature, threshold, left, right, value, X):
    n = X.shape[0]
    out = np.empty((n, value.shape[1]))
    for r in range(n):
        j = 0
        while feature[j] >= 0:
            if X[r, feature[j]] <= threshold[j]:
                j = left[j]
            else:
                j = right[j]
        out[r] = value[j]
    return out


@numba.njit(cache=True)
def _grow(X, Y, w, sorted_all, mtry, min_split, min_leaf, seed):
    """Grow one tree on the rows with ``w > 0``; returns flat node arrays."""
    np.random.seed(seed)
    n, d = X.shape
    K = Y.shape[1]
    m = 0
    for i in range(n):
        if w[i] > 0:
            m += 1
    # per-feature orderings restricted to the in-bag rows
    order = np.empty((d, m), np.int64)
    xs = np.empty((d, m))
    for f in range(d):
        c = 0
        for i in range(n):
            r = sorted_all[f, i]
            if w[r] > 0:
                order[f, c] = r
                xs[f, c] = X[r, f]
                c += 1

    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    value = np.zeros((cap, K))
    nsamp = np.zeros(cap)
    gain = np.zeros(cap)

    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(m, np.int64)
    xbuf = np.empty(m)
    feats = np.arange(d)
    sl = np.zeros(K)
    tot = np.zeros(K)

    # stack of (node id, start, end)
    stack = np.empty((cap, 3), np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        s = stack[top, 1]
        e = stack[top, 2]

        wsum = 0.0
        tot[:] = 0.0
        pure = True
        r0 = order[0, s]
        for p in range(s, e):
            r = order[0, p]
            wsum += w[r]
            for k in range(K):
                tot[k] += w[r] * Y[r, k]
                if Y[r, k] != Y[r0, k]:
                    pure = False
        for k in range(K):
            value[node, k] = tot[k] / wsum
        nsamp[node] = wsum
        if pure or wsum < min_split:
            continue

        # random feature order; keep looking past mtry until a split is found
        for i in range(d - 1, 0, -1):
            j = np.random.randint(0, i + 1)
            t = feats[i]
            feats[i] = feats[j]
            feats[j] = t
        # with node-centred sums the SSE reduction of a split is
        # sum_k sl_k^2 * wsum / (wl * wr); zero-gain splits are allowed
        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        for fi in range(d):
            if fi >= mtry and best_f >= 0:
                break
            f = feats[fi]
            sl[:] = 0.0
            wl = 0.0
            for p in range(s, e - 1):
                r = order[f, p]
                wl += w[r]
                for k in range(K):
                    sl[k] += w[r] * (Y[r, k] - value[node, k])
                x0 = xs[f, p]
                x1 = xs[f, p + 1]
                if x1 <= x0:
                    continue
                wr = wsum - wl
                if wl < min_leaf or wr < min_leaf:
                    continue
                score = 0.0
                for k in range(K):
                    score += sl[k] * sl[k]
                score *= wsum / (wl * wr)
                if score > best_score:
                    best_score = score
                    best_f = f
                    mid = 0.5 * (x0 + x1)
                    best_thr = mid if mid < x1 else x0
        if best_f < 0:
            continue

        nl = 0
        for p in range(s, e):
            r = order[best_f, p]
            goes_left[r] = X[r, best_f] <= best_thr
            if goes_left[r]:
                nl += 1
        # stable partition of every feature ordering
        for f in range(d):
            a = 0
            b = nl
            for p in range(s, e):
                r = order[f, p]
                if goes_left[r]:
                    buf[a] = r
                    xbuf[a] = xs[f, p]
                    a += 1
                else:
                    buf[b] = r
                    xbuf[b] = xs[f, p]
                    b += 1
            for p in range(e - s):
                order[f, s + p] = buf[p]
                xs[f, s + p] = xbuf[p]

        feature[node] = best_f
        threshold[node] = best_thr
        gain[node] = best_score
        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        left[node] = lc
        right[node] = rc
        stack[top, 0] = rc
        stack[top, 1] = s + nl
        stack[top, 2] = e
        top += 1
        stack[top, 0] = lc
        stack[top, 1] = s
        stack[top, 2] = s + nl
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), nsamp[:n_nodes].copy(), gain[:n_nodes].copy())


def _tree_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _fit_trees(X, Y, config: ForestConfig, start: int, count: int) -> list[Tree]:
    X = np.ascontiguousarray(X)
    Y = np.ascontiguousarray(Y)
    n, d = X.shape
    sorted_all = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    mtry = config.features_per_split(d)
    trees = []
    for b in range(start, start + count):
        ts = _tree_seed(config.seed, b)
        if config.bootstrap:
            rng = np.random.default_rng(ts)
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            w = np.ones(n)
        arrays = _grow(X, Y, w, sorted_all, mtry, float(config.min_samples_split),
                       float(config.min_samples_leaf), ts % (2**31))
        trees.append(Tree(*arrays))
    return trees


def rf_fit(X, Y, config: ForestConfig = ForestConfig()) -> ForestModel:
    """Grow ``config.n_trees`` trees, each on its own bootstrap sample.

    Tree ``b`` draws its bootstrap rows and split-feature subsets from a seed
    derived from ``(config.seed, b)``, so results do not depend on how many
    trees are grown before it.
    """
    X, Y = check_xy(X, Y, min_rows=2)
    trees = _fit_trees(X, Y, config, 0, config.n_trees)
    return ForestModel(tuple(trees), X.shape[1], Y.shape[1], config)


def rf_warmstart_extend(model: ForestModel, X, Y, extra_trees: int = 100) -> ForestModel:
    """Append ``extra_trees`` trees grown on (X, Y); existing trees are kept as-is."""
    X, Y = check_xy(X, Y, min_rows=2)
    if X.shape[1] != model.n_features or Y.shape[1] != model.n_targets:
        raise ValueError(f"model is {model.n_features}->{model.n_targets}, "
                         f"data is {X.shape[1]}->{Y.shape[1]}")
    if extra_trees < 0:
        raise ValueError("extra_trees must be >= 0")
    if extra_trees == 0:
        return model
    new = _fit_trees(X, Y, model.config, model.n_trees, extra_trees)
    return ForestModel(model.trees + tuple(new), model.n_features, model.n_targets, model.config)
