"""Owen (hierarchical Shapley) values with an interventional value function.

For a sample ``x`` and background rows ``b_1..b_n`` the value of a coalition
``S`` is

    v(S) = mean_j f(x_S, (b_j)_{not S})

i.e. features outside ``S`` are replaced by background values. For feature
``i`` in cluster ``B_k`` of a partition ``B = {B_1..B_m}`` over clusters ``M``:

    phi_i = sum_{R subset M-{k}} sum_{T subset B_k-{i}}
            1/(|M| C(|M|-1,|R|)) * 1/(|B_k| C(|B_k|-1,|T|))
            * [v(Q_R + T + {i}) - v(Q_R + T)],    Q_R = union of B_r, r in R.

Internally a partition is a tree (root -> clusters -> features) and the
double sum is the product of one Shapley-weighted subset sum per tree level
on the path to the feature. The nested mode replaces the flat cluster level
by each cluster's sub-dendrogram, which gives the recursive (Winter) value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .clustering import ClusterPartition, Dendrogram

MAX_EXACT_FEATURES = 25
MAX_EXACT_CLUSTER = 15
_CHUNK_ROWS = 262_144

Model = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class AttributionResult:
    """Per-sample, per-feature, per-target attributions.

    Attributes
    ----------
    values : ndarray, shape (n, d, K)
        Owen values, in target units.
    base : ndarray, shape (K,)
        Mean model output over the background.
    x : ndarray, shape (n, d)
        The explained samples.
    estimator : str
        ``"exact"`` or ``"sampled(<n_permutations>)"``.
    value_function : str
        Always ``"interventional"``.
    """

    values: np.ndarray
    base: np.ndarray
    x: np.ndarray
    feature_names: tuple
    target_names: tuple
    partition: ClusterPartition
    estimator: str = "exact"
    mode: str = "flat"
    value_function: str = "interventional"
    dendrogram: Dendrogram | None = None
    label: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    def mean_abs(self) -> np.ndarray:
        """Mean |phi| over samples, shape (d, K)."""
        return np.abs(self.values).mean(axis=0)


# ---------------------------------------------------------------------------
# value function


def _as_2d_output(y: np.ndarray, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y.reshape(n, -1)


def coalition_values(model: Model, x: np.ndarray, background: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """``v(S)`` for each boolean row of ``masks`` (shape (U, d)); returns (U, K)."""
    nb, d = background.shape
    U = masks.shape[0]
    per = max(1, _CHUNK_ROWS // nb)
    out = []
    for s in range(0, U, per):
        mk = masks[s : s + per]
        Z = np.where(mk[:, None, :], x[None, None, :], background[None, :, :]).reshape(-1, d)
        y = _as_2d_output(model(Z), Z.shape[0])
        out.append(y.reshape(mk.shape[0], nb, -1).mean(axis=1))
    return np.concatenate(out, axis=0)


def _bits_to_bool(masks: np.ndarray, d: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(d, dtype=np.int64)[None, :]) & 1).astype(bool)


# ---------------------------------------------------------------------------
# hierarchy


def _shapley_weight(q: int, s: int) -> float:
    return 1.0 / (q * math.comb(q - 1, s))


def level_weights(q: int) -> np.ndarray:
    """Weights of the subsets of q-1 siblings, indexed by subset bitmask."""
    counts = np.array([bin(t).count("1") for t in range(2 ** (q - 1))])
    return np.array([_shapley_weight(q, int(c)) for c in counts])


@dataclass
class _Node:
    leaves: tuple
    children: list


def _hierarchy(partition: ClusterPartition, nested: bool, dendrogram: Dendrogram | None) -> _Node:
    def sub(node: int) -> _Node:
        kids = dendrogram.children(node)
        if not kids:
            return _Node((node,), [])
        ch = [sub(k) for k in kids]
        return _Node(tuple(sorted(ch[0].leaves + ch[1].leaves)), ch)

    clusters = []
    for k, c in enumerate(partition.clusters):
        if nested and len(c) > 1:
            if dendrogram is None or not partition.roots:
                raise ValueError("nested mode needs a partition cut from a dendrogram")
            clusters.append(sub(partition.roots[k]))
        else:
            clusters.append(_Node(c, [_Node((i,), []) for i in c]) if len(c) > 1 else _Node(c, []))
    return _Node(tuple(range(partition.n_features)), clusters)


def _leaf_mask(node: _Node) -> int:
    m = 0
    for i in node.leaves:
        m |= 1 << i
    return m


def coalition_table(partition: ClusterPartition, nested: bool = False,
                    dendrogram: Dendrogram | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
    """For each feature: (coalition bitmasks without the feature, weights).

    ``phi_i = sum_j w_j [v(S_j + i) - v(S_j)]``.
    """
    root = _hierarchy(partition, nested, dendrogram)
    table: list = [None] * partition.n_features

    def walk(node: _Node, masks: np.ndarray, weights: np.ndarray):
        if not node.children:
            if len(node.leaves) == 1:
                table[node.leaves[0]] = (masks, weights)
                return
        kids = node.children
        q = len(kids)
        kid_masks = np.array([_leaf_mask(c) for c in kids], dtype=np.int64)
        w_level = level_weights(q)
        for j, c in enumerate(kids):
            others = np.delete(kid_masks, j)
            # all unions of subsets of the other siblings
            sub = np.zeros(2 ** (q - 1), dtype=np.int64)
            for b, om in enumerate(others):
                sub[(np.arange(sub.size) >> b) & 1 == 1] |= om
            new_masks = (masks[:, None] | sub[None, :]).ravel()
            new_w = (weights[:, None] * w_level[None, :]).ravel()
            walk(c, new_masks, new_w)

    walk(root, np.zeros(1, dtype=np.int64), np.ones(1))
    return table


def _check_inputs(x, background):
    x = np.asarray(x, dtype=np.float64)
    bg = np.asarray(background, dtype=np.float64)
    if bg.ndim == 1:
        bg = bg[None, :]
    if bg.shape[0] == 0:
        raise ValueError("background must be non-empty")
    X = x[None, :] if x.ndim == 1 else x
    if X.shape[1] != bg.shape[1]:
        raise ValueError("x and background have different feature counts")
    return X, bg


def _names(names, d, prefix="x"):
    return tuple(names) if names is not None else tuple(f"{prefix}{i}" for i in range(d))


def owen_values(
    model: Model,
    x,
    background,
    partition: ClusterPartition,
    nested: bool = False,
    dendrogram: Dendrogram | None = None,
    feature_names=None,
    target_names=None,
    label: str = "",
) -> AttributionResult:
    """Exact Owen values for one or many samples.

    Parameters
    ----------
    model : callable
        Maps (N, d) inputs to (N,) or (N, K) outputs.
    x : array_like, shape (d,) or (n, d)
    background : array_like, shape (n_bg, d)
    partition : ClusterPartition
    nested : bool
        Recurse into each cluster's sub-dendrogram (needs ``dendrogram`` and a
        partition produced by :func:`cut_partition`).

    Raises
    ------
    ValueError
        Empty background, or more than 25 features / a cluster above 15
        features (use :func:`owen_values_sampled` instead).
    """
    X, bg = _check_inputs(x, background)
    d = X.shape[1]
    if partition.n_features != d:
        raise ValueError("partition does not match the feature count")
    if d > MAX_EXACT_FEATURES or max(len(c) for c in partition.clusters) > MAX_EXACT_CLUSTER:
        raise ValueError(f"exact mode supports up to {MAX_EXACT_FEATURES} features and clusters of "
                         f"up to {MAX_EXACT_CLUSTER}; use the sampled estimator")
    table = coalition_table(partition, nested, dendrogram)
    # every coalition needed, with and without the feature
    all_masks = np.concatenate([np.concatenate([m, m | (1 << i)]) for i, (m, _) in enumerate(table)])
    uniq, inv = np.unique(all_masks, return_inverse=True)
    offsets = np.cumsum([0] + [2 * len(m) for m, _ in table])
    bool_masks = _bits_to_bool(uniq, d)
    empty = int(np.searchsorted(uniq, 0))

    values = []
    base = None
    for x_row in X:
        V = coalition_values(model, x_row, bg, bool_masks)
        if base is None:
            base = V[empty]
        phi = np.empty((d, V.shape[1]))
        for i, (m, w) in enumerate(table):
            idx = inv[offsets[i] : offsets[i + 1]]
            n = len(m)
            phi[i] = w @ (V[idx[n:]] - V[idx[:n]])
        values.append(phi)
    values = np.stack(values)
    K = values.shape[2]
    return AttributionResult(
        values, base, X, _names(feature_names, d), _names(target_names, K, "y"), partition,
        "exact", "nested" if nested else "flat", dendrogram=dendrogram, label=label,
    )


def shapley_oracle(model: Model, x, background) -> np.ndarray:
    """Classical Shapley values by enumerating all 2^d coalitions.

    Returns an array of shape (d, K). Limited to d <= 12.
    """
    X, bg = _check_inputs(x, background)
    if X.shape[0] != 1:
        raise ValueError("the oracle explains a single sample")
    x = X[0]
    d = x.shape[0]
    if d > 12:
        raise ValueError("the oracle enumerates 2^d coalitions; d must be <= 12")

    def v(S: tuple) -> np.ndarray:
        Z = bg.copy()
        Z[:, list(S)] = x[list(S)]
        return _as_2d_output(model(Z), Z.shape[0]).mean(axis=0)

    vals = {S: v(S) for r in range(d + 1) for S in itertools.combinations(range(d), r)}
    phi = np.zeros((d, len(vals[()])))
    fact = math.factorial
    for i in range(d):
        rest = [j for j in range(d) if j != i]
        for r in range(d):
            w = fact(r) * fact(d - r - 1) / fact(d)
            for S in itertools.combinations(rest, r):
                phi[i] += w * (vals[tuple(sorted(S + (i,)))] - vals[S])
    return phi


def _random_order(node: _Node, rng: np.random.Generator) -> list[int]:
    if not node.children:
        return list(node.leaves)
    out = []
    for j in rng.permutation(len(node.children)):
        out.extend(_random_order(node.children[j], rng))
    return out


def owen_values_sampled(
    model: Model,
    x,
    background,
    partition: ClusterPartition,
    n_permutations: int = 1000,
    seed: int = 0,
    nested: bool = False,
    dendrogram: Dendrogram | None = None,
    feature_names=None,
    target_names=None,
    label: str = "",
) -> AttributionResult:
    """Monte-Carlo Owen values from hierarchy-consistent permutations.

    Each draw shuffles the clusters, then the features inside every cluster
    (recursively in nested mode), and credits each feature with its marginal
    contribution along that order. The average is unbiased for the exact
    value; per-sample generators are derived from ``(seed, sample index)``.
    """
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    X, bg = _check_inputs(x, background)
    d = X.shape[1]
    if partition.n_features != d:
        raise ValueError("partition does not match the feature count")
    root = _hierarchy(partition, nested, dendrogram)
    values = []
    base = None
    for s, x_row in enumerate(X):
        rng = np.random.default_rng([seed, s])
        orders = np.array([_random_order(root, rng) for _ in range(n_permutations)])
        # prefix coalitions: row p, step t holds the first t features of order p
        masks = np.zeros((n_permutations, d + 1, d), dtype=bool)
        for t in range(1, d + 1):
            masks[:, t] = masks[:, t - 1]
            masks[np.arange(n_permutations), t, orders[:, t - 1]] = True
        V = coalition_values(model, x_row, bg, masks.reshape(-1, d)).reshape(n_permutations, d + 1, -1)
        if base is None:
            base = V[0, 0]
        gains = V[:, 1:] - V[:, :-1]
        phi = np.zeros((d, V.shape[2]))
        np.add.at(phi, orders.ravel(), gains.reshape(-1, V.shape[2]))
        values.append(phi / n_permutations)
    values = np.stack(values)
    K = values.shape[2]
    return AttributionResult(
        values, base, X, _names(feature_names, d), _names(target_names, K, "y"), partition,
        f"sampled({n_permutations})", "nested" if nested else "flat", dendrogram=dendrogram, label=label,
    )
