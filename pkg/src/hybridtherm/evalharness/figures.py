"""Optional matplotlib rendering of experiment outputs (PNG files)."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    _pyplot().close(fig)
    return path


def _method(m: dict) -> str:
    return m["strategy"] if m["strategy"] == "physics" else f"{m['strategy']}-{m['learner']}"


def scenario_boxplot(reports, path) -> Path:
    """Room-level MAPE per method, one panel per scenario (mean as a triangle)."""
    plt = _pyplot()
    scenarios = list(dict.fromkeys(r.metadata["scenario"] for r in reports))
    fig, axes = plt.subplots(1, len(scenarios), figsize=(5 * len(scenarios), 4.5), squeeze=False)
    for ax, sc in zip(axes[0], scenarios):
        groups: dict = {}
        for r in reports:
            if r.metadata["scenario"] == sc:
                groups.setdefault(_method(r.metadata), []).extend(100 * m.mape for m in r.per_room.values())
        ax.boxplot(list(groups.values()), showmeans=True)
        ax.set_xticks(range(1, len(groups) + 1), list(groups), rotation=70, fontsize=7)
        ax.set_title(sc)
        ax.set_ylabel("MAPE [%]")
    return _save(fig, path)


def monthly_bars(reports, path) -> Path:
    """Room-averaged MAPE per test month for each method."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(9, 4))
    rows = [r for r in reports if r.monthly is not None]
    months = sorted({m for r in rows for m in r.monthly.reports})
    width = 0.8 / max(len(rows), 1)
    for i, r in enumerate(rows):
        vals = [100 * r.monthly.reports[m].mape if m in r.monthly.reports else np.nan for m in months]
        ax.bar(np.arange(len(months)) + i * width, vals, width, label=r.metadata.get("label", str(i)))
    ax.set_xticks(np.arange(len(months)) + 0.4 - width / 2, months, rotation=45, fontsize=7)
    ax.set_ylabel("MAPE [%]")
    ax.legend(fontsize=6, ncol=2)
    return _save(fig, path)


def sweep_lines(reports, path) -> Path:
    """Median-over-seeds MAPE against training months per method."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict = {}
    for r in reports:
        m = r.metadata
        key = f"{m['scenario']}-{_method(m)}"
        series.setdefault(key, {}).setdefault(m["window_months"], []).append(100 * r.mape)
    for key, by_w in series.items():
        ws = sorted(by_w)
        ax.plot(ws, [np.median(by_w[w]) for w in ws], marker="o", label=key)
    ax.set_xlabel("training months")
    ax.set_ylabel("MAPE [%]")
    ax.invert_xaxis()
    ax.legend(fontsize=7)
    return _save(fig, path)


def beeswarm(result, path, target: int = 0, top: int = 10) -> Path:
    """Owen values of the ``top`` features, coloured by standardized feature value."""
    from ..explain.export import top_features

    plt = _pyplot()
    feats = top_features(result, top, target)
    fig, ax = plt.subplots(figsize=(7, 0.45 * len(feats) + 1.5))
    rng = np.random.default_rng(0)
    for row, f in enumerate(reversed(feats)):
        x = result.x[:, f]
        c = (x - x.mean()) / (x.std() or 1.0)
        ax.scatter(result.values[:, f, target], row + rng.uniform(-0.3, 0.3, x.size), c=c, s=6, cmap="coolwarm")
    ax.set_yticks(range(len(feats)), [result.feature_names[f] for f in reversed(feats)], fontsize=7)
    ax.set_xlabel(f"Owen value ({result.target_names[target]})")
    return _save(fig, path)


def groupbar(result, path, target: int = 0) -> Path:
    """Summed mean |Owen value| per feature cluster."""
    from ..explain import groupbar_table

    plt = _pyplot()
    g = groupbar_table(result)[:, target]
    labels = [", ".join(result.feature_names[i] for i in c)[:60] for c in result.partition.clusters]
    fig, ax = plt.subplots(figsize=(7, 0.5 * len(g) + 1.5))
    ax.barh(range(len(g)), g)
    ax.set_yticks(range(len(g)), labels, fontsize=6)
    ax.set_xlabel("mean |Owen value|")
    return _save(fig, path)
