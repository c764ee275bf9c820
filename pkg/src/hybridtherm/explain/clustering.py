"""Pearson-distance feature clustering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """``D = 1 - |R_XX|`` with feature names."""

    D: np.ndarray
    names: tuple

    @property
    def n(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class Dendrogram:
    """Merge sequence; merge ``t`` creates node ``n_leaves + t``.

    Each merge is ``(a, b, height, new_id)`` with ``a < b`` node ids.
    """

    merges: tuple
    names: tuple

    @property
    def n_leaves(self) -> int:
        return len(self.names)

    def members(self, node: int) -> list[int]:
        """Leaf indices under ``node``, ascending."""
        n = self.n_leaves
        if node < n:
            return [node]
        a, b, _, _ = self.merges[node - n]
        return sorted(self.members(a) + self.members(b))

    def children(self, node: int) -> tuple:
        if node < self.n_leaves:
            return ()
        a, b, _, _ = self.merges[node - self.n_leaves]
        return (a, b)

    def to_dict(self) -> dict:
        return {
            "leaves": list(self.names),
            "merges": [{"a": a, "b": b, "height": h, "node": k} for a, b, h, k in self.merges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dendrogram":
        merges = tuple((m["a"], m["b"], float(m["height"]), m["node"]) for m in d["merges"])
        return cls(merges, tuple(d["leaves"]))


@dataclass(frozen=True)
class ClusterPartition:
    """Disjoint cover of features ``0..n_features-1``.

    Clusters are sorted tuples ordered by their smallest member. ``roots``
    holds the dendrogram node of each cluster when the partition came from a
    cut (empty otherwise).
    """

    clusters: tuple
    n_features: int
    level: int = 0
    roots: tuple = ()

    def __post_init__(self):
        clusters = tuple(sorted((tuple(sorted(int(i) for i in c)) for c in self.clusters), key=lambda c: c[0]
                                if c else -1))
        seen = [i for c in clusters for i in c]
        if not clusters or any(len(c) == 0 for c in clusters):
            raise ValueError("clusters must be non-empty")
        if sorted(seen) != list(range(self.n_features)):
            raise ValueError("clusters must be a disjoint cover of all features")
        object.__setattr__(self, "clusters", clusters)

    @property
    def m(self) -> int:
        return len(self.clusters)

    def cluster_of(self, i: int) -> int:
        for k, c in enumerate(self.clusters):
            if i in c:
                return k
        raise IndexError(i)

    @classmethod
    def singletons(cls, d: int) -> "ClusterPartition":
        return cls(tuple((i,) for i in range(d)), d, d)

    @classmethod
    def one_cluster(cls, d: int) -> "ClusterPartition":
        return cls((tuple(range(d)),), d, 1)

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "level": self.level, "clusters": [list(c) for c in self.clusters]}


def pearson_distance(X, names=None) -> DistanceMatrix:
    """Pairwise ``1 - |corr|``.

    Constant columns sit at distance 1 from every other column and 0 from
    themselves.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least 2 rows")
    d = X.shape[1]
    Xc = X - X.mean(axis=0)
    sd = np.sqrt((Xc * Xc).sum(axis=0))
    const = sd <= 1e-12 * np.maximum(1.0, np.abs(X).max(axis=0))
    Z = np.where(const, 0.0, Xc / np.where(const, 1.0, sd))
    R = np.clip(np.abs(Z.T @ Z), 0.0, 1.0)
    D = 1.0 - R
    D[const, :] = 1.0
    D[:, const] = 1.0
    np.fill_diagonal(D, 0.0)
    D = 0.5 * (D + D.T)
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(d))
    if len(names) != d:
        raise ValueError("one name per column required")
    return DistanceMatrix(D, names)


def agglomerate(D: DistanceMatrix, tie_tol: float = 1e-12) -> Dendrogram:
    """Average-linkage agglomeration.

    Among pairs within ``tie_tol`` of the minimum linkage distance the pair
    with the smallest ``(i, j)`` node ids merges first.
    """
    n = D.n
    dist = {}
    size = {i: 1 for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = float(D.D[i, j])
    active = list(range(n))
    merges = []
    next_id = n
    while len(active) > 1:
        best = min(dist.values())
        a, b = min(p for p, v in dist.items() if v <= best + tie_tol)
        h = dist[(a, b)]
        merges.append((a, b, h, next_id))
        active.remove(a)
        active.remove(b)
        for c in active:
            dac = dist.pop((min(a, c), max(a, c)))
            dbc = dist.pop((min(b, c), max(b, c)))
            dist[(c, next_id)] = (size[a] * dac + size[b] * dbc) / (size[a] + size[b])
        del dist[(a, b)]
        size[next_id] = size[a] + size[b]
        active.append(next_id)
        next_id += 1
    return Dendrogram(tuple(merges), tuple(D.names))


def cut_partition(dendrogram: Dendrogram, n_clusters: int = 5) -> ClusterPartition:
    """Undo the last ``n_clusters - 1`` merges; the remaining trees are the clusters."""
    n = dendrogram.n_leaves
    if not 1 <= n_clusters <= n:
        raise ValueError(f"n_clusters must be in [1, {n}]")
    roots = set(range(n))
    for a, b, _, k in dendrogram.merges[: n - n_clusters]:
        roots -= {a, b}
        roots.add(k)
    roots = sorted(roots, key=lambda r: dendrogram.members(r)[0])
    clusters = tuple(tuple(dendrogram.members(r)) for r in roots)
    return ClusterPartition(clusters, n, n_clusters, tuple(roots))
