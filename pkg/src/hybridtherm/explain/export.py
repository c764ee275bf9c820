"""Plot-data exporters for attribution results.

CSV columns
-----------
beeswarm:   label, target, rank, feature, sample, feature_value, phi
dependence: label, target, feature, sample, feature_value, phi, color_feature, color_value
groupbar:   label, target, cluster, features, mean_abs_phi

The dendrogram export is a JSON document with the merge list, leaf names and
the partition (cut level, clusters and their root nodes).
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .importance import top_k
from .owen import AttributionResult

EXPORT_KINDS = ("beeswarm", "dependence", "groupbar", "dendrogram")


def _fmt(v: float) -> str:
    return format(float(v), ".10g")


def _results(results) -> list[AttributionResult]:
    if isinstance(results, AttributionResult):
        results = [results]
    results = list(results)
    if not results:
        raise ValueError("no attribution results to export")
    return results


def _targets(r: AttributionResult, target) -> list[int]:
    if target is None:
        return list(range(r.values.shape[2]))
    if isinstance(target, str):
        return [r.target_names.index(target)]
    return [int(target)]


def top_features(r: AttributionResult, k: int, target: int) -> list[int]:
    return top_k(r.mean_abs()[:, target], min(k, r.values.shape[1]))


def _color_feature(r: AttributionResult, f: int) -> int:
    """Feature most correlated with ``f`` among the explained samples."""
    X = r.x
    best, best_c = (f + 1) % X.shape[1], -1.0
    for j in range(X.shape[1]):
        if j == f or X[:, j].std() == 0 or X[:, f].std() == 0:
            continue
        c = abs(np.corrcoef(X[:, f], X[:, j])[0, 1])
        if c > best_c:
            best, best_c = j, c
    return best


def _rows_beeswarm(r, target, top):
    for t in _targets(r, target):
        for rank, f in enumerate(top_features(r, top, t), start=1):
            for s in range(r.n_samples):
                yield [r.label, r.target_names[t], rank, r.feature_names[f], s, _fmt(r.x[s, f]),
                       _fmt(r.values[s, f, t])]


def _rows_dependence(r, target, feature, color):
    for t in _targets(r, target):
        if feature is None:
            f = top_features(r, 1, t)[0]
        else:
            f = r.feature_names.index(feature) if isinstance(feature, str) else int(feature)
        if color is None:
            c = _color_feature(r, f)
        else:
            c = r.feature_names.index(color) if isinstance(color, str) else int(color)
        for s in range(r.n_samples):
            yield [r.label, r.target_names[t], r.feature_names[f], s, _fmt(r.x[s, f]), _fmt(r.values[s, f, t]),
                   r.feature_names[c], _fmt(r.x[s, c])]


def groupbar_table(r: AttributionResult) -> np.ndarray:
    """Mean |phi| summed within each cluster, shape (n_clusters, K)."""
    ma = r.mean_abs()
    return np.array([ma[list(c)].sum(axis=0) for c in r.partition.clusters])


def _rows_groupbar(r, target):
    g = groupbar_table(r)
    for t in _targets(r, target):
        for k, c in enumerate(r.partition.clusters):
            yield [r.label, r.target_names[t], k, ";".join(r.feature_names[i] for i in c), _fmt(g[k, t])]


_HEADERS = {
    "beeswarm": ["label", "target", "rank", "feature", "sample", "feature_value", "phi"],
    "dependence": ["label", "target", "feature", "sample", "feature_value", "phi", "color_feature", "color_value"],
    "groupbar": ["label", "target", "cluster", "features", "mean_abs_phi"],
}


def export_plotdata(results, kind: str, path=None, target=None, top: int = 10,
                    feature=None, color_feature=None) -> str:
    """Render plot data for one or more attribution results.

    Parameters
    ----------
    results : AttributionResult or iterable of them
    kind : {"beeswarm", "dependence", "groupbar", "dendrogram"}
    path : path-like, optional
        Also write the document there.
    target : int or str, optional
        Restrict to one target (default: all).
    top : int
        Number of features in the beeswarm export.
    feature, color_feature : int or str, optional
        Dependence-plot feature and colouring feature (default: the top
        feature and its most correlated partner).

    Returns
    -------
    str
        CSV text, or JSON for ``"dendrogram"``.
    """
    if kind not in EXPORT_KINDS:
        raise ValueError(f"unknown export kind {kind!r}; expected one of {EXPORT_KINDS}")
    rs = _results(results)
    if kind == "dendrogram":
        docs = []
        for r in rs:
            if r.dendrogram is None:
                raise ValueError("result carries no dendrogram")
            docs.append({"label": r.label, **r.dendrogram.to_dict(),
                         "partition": {**r.partition.to_dict(), "roots": list(r.partition.roots)}})
        text = json.dumps(docs[0] if len(docs) == 1 else docs, indent=1)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_HEADERS[kind])
        for r in rs:
            if kind == "beeswarm":
                w.writerows(_rows_beeswarm(r, target, top))
            elif kind == "dependence":
                w.writerows(_rows_dependence(r, target, feature, color_feature))
            else:
                w.writerows(_rows_groupbar(r, target))
        text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def partition_from_dendrogram_export(doc: dict):
    """Rebuild the exported partition by re-cutting the exported merge list."""
    from .clustering import Dendrogram, cut_partition

    return cut_partition(Dendrogram.from_dict(doc), doc["partition"]["level"])
