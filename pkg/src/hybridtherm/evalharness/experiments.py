"""Experiment drivers: scenario matrix, data-quantity sweep and explanation study.

Files written (all CSV with a header row):

scenario_matrix.csv
    scenario, strategy, learner, seed, window_months, label, mae, mape_pct, rmse, std_ratio
scenario_rooms.csv
    scenario, strategy, learner, seed, room, mae, mape_pct, rmse
scenario_boxplot.csv
    scenario, strategy, learner, n, mean, q1, median, q3, min, max (room-level MAPE in %)
scenario_monthly.csv
    scenario, strategy, learner, seed, month, n_rows, mae, mape_pct, rmse
sweep.csv
    scenario, strategy, learner, seed, window_months, train_rows, mae, mape_pct, rmse, std_ratio
rank_table.csv
    label, learner, rank, native_feature, native_importance, owen_feature, owen_importance, overlap

Baselines appear with strategy ``physics`` (learner ``-``) and ``data``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..explain import (
    MAX_EXACT_CLUSTER,
    MAX_EXACT_FEATURES,
    AttributionResult,
    agglomerate,
    cut_partition,
    export_plotdata,
    native_importance,
    owen_values,
    owen_values_sampled,
    pearson_distance,
    rank_overlap,
    top_k,
)
from ..hybrid import (
    HybridModel,
    HybridStrategy,
    LearnerConfig,
    SimulationCache,
    data_only_fit,
    hybrid_fit,
    hybrid_predict,
    physics_only_predict,
    save_bundle,
    scenario_of,
)
from ..learners import FfnnConfig, ForestConfig
from ..physics import CalibrationOptions, make_tier, rooms_of, target_column
from ..timeseries import SCENARIOS, TimeSeriesFrame, split_train_test
from .metrics import MetricReport, evaluate_arrays

DEFAULT_WINDOWS = (12, 6, 5, 4, 3, 2, 1)
STRATEGIES = tuple(s.value for s in HybridStrategy)
LEARNERS = ("lr", "ffnn", "rf")


class CellError(RuntimeError):
    """A failure inside one experiment cell, tagged with its coordinates."""


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run and where to write it.

    ``cells`` optionally replaces the full scenario x strategy x learner
    product with an explicit list of ``(scenario, strategy, learner)``
    triples. ``baseline_learners`` picks the learners of the data-only
    baselines (default: every learner used with that scenario). ``boundary``
    is the first test timestamp; by default the start of the last calendar
    year in the data.
    """

    scenarios: tuple = ("W", "WB", "WBR")
    strategies: tuple = STRATEGIES
    learners: tuple = LEARNERS
    seeds: tuple = (0,)
    windows: tuple = DEFAULT_WINDOWS
    out_dir: str | None = None
    boundary: str | None = None
    cells: tuple | None = None
    baseline_learners: tuple | None = None
    ffnn: FfnnConfig = field(default_factory=FfnnConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    calibration: CalibrationOptions = field(default_factory=CalibrationOptions)
    save_bundles: bool = False

    def __post_init__(self):
        for name in ("scenarios", "strategies", "learners", "seeds", "windows"):
            if not tuple(getattr(self, name)):
                raise ValueError(f"plan field {name!r} must be nonempty")
        for s in self.scenarios:
            scenario_of(s)
        for s in self.strategies:
            HybridStrategy(s)
        for k in self.learners + tuple(self.baseline_learners or ()):
            if k not in LEARNERS:
                raise ValueError(f"unknown learner {k!r}")
        if any(int(w) < 1 for w in self.windows):
            raise ValueError("windows are whole months >= 1")
        if self.cells is not None:
            for sc, st, lk in self.cells:
                scenario_of(sc)
                HybridStrategy(st)
                if lk not in LEARNERS:
                    raise ValueError(f"unknown learner {lk!r}")

    def cell_list(self) -> list[tuple[str, str, str]]:
        if self.cells is not None:
            return [(scenario_of(a).id, HybridStrategy(b).value, c) for a, b, c in self.cells]
        return [(scenario_of(a).id, HybridStrategy(b).value, c)
                for a in self.scenarios for b in self.strategies for c in self.learners]

    def scenario_list(self) -> list[str]:
        seen: dict = {}
        for sc, _, _ in self.cell_list():
            seen.setdefault(sc, None)
        return list(seen)

    def baselines_for(self, scenario: str) -> list[str]:
        if self.baseline_learners is not None:
            return list(self.baseline_learners)
        used = {lk for sc, _, lk in self.cell_list() if sc == scenario}
        return [k for k in LEARNERS if k in used]

    def learner(self, kind: str, seed: int) -> LearnerConfig:
        return LearnerConfig(kind, self.ffnn, self.forest).with_seed(seed)


# ---------------------------------------------------------------------------
# helpers


def default_boundary(data: TimeSeriesFrame) -> np.datetime64:
    """Start of the last calendar year covered by ``data``."""
    return data.timestamps[-1].astype("datetime64[Y]").astype("datetime64[m]")


def _boundary(plan: ExperimentPlan, data: TimeSeriesFrame) -> np.datetime64:
    return np.datetime64(plan.boundary, "m") if plan.boundary else default_boundary(data)


def _assert_before(frame: TimeSeriesFrame, boundary: np.datetime64) -> None:
    if frame.n_rows and frame.timestamps[-1] >= boundary:
        raise AssertionError("training rows reach past the test boundary")


def trailing_window(train: TimeSeriesFrame, boundary, months: int) -> TimeSeriesFrame:
    """Rows of ``train`` within the ``months`` calendar months before ``boundary``."""
    b = np.datetime64(boundary, "m")
    start = (b.astype("datetime64[M]") - int(months)).astype("datetime64[m]")
    if start < train.timestamps[0]:
        raise ValueError(f"a {months}-month window starts before the training data")
    sel = (train.timestamps >= start) & (train.timestamps < b)
    if not sel.any():
        raise ValueError(f"the {months}-month window is empty")
    return train.rows(np.flatnonzero(sel))


def build_tiers(plan: ExperimentPlan, data: TimeSeriesFrame, train: TimeSeriesFrame | None = None,
                existing: dict | None = None) -> dict:
    """Physics tier per (scenario, seed), calibrated on the full training period.

    Entries already in ``existing`` are reused rather than rebuilt.
    """
    if train is None:
        train, _ = split_train_test(data, _boundary(plan, data))
    tiers = dict(existing or {})
    for sc in plan.scenario_list():
        kind = SCENARIOS[sc].physics_tier
        for seed in plan.seeds:
            if (sc, seed) in tiers:
                continue
            try:
                tiers[(sc, seed)] = make_tier(kind, data, seed, train, train, plan.calibration)
            except Exception as exc:
                raise CellError(f"tier (scenario={sc}, seed={seed}): {exc}") from exc
    return tiers


def _evaluate(pred: TimeSeriesFrame, test: TimeSeriesFrame, rooms, meta: dict) -> MetricReport:
    Y = test.matrix([target_column(r) for r in rooms])
    return evaluate_arrays(Y, pred.values, rooms, meta, timestamps=test.timestamps)


def _fit_cell(plan, sc, st, lk, seed, tier, train, rooms, cache) -> HybridModel:
    if st == "data":
        return data_only_fit(plan.learner(lk, seed), train, sc, rooms)
    return hybrid_fit(st, plan.learner(lk, seed), tier, train, sc, cache)


def _run_cell(plan, key, tier, train, test, rooms, cache, window):
    sc, st, lk, seed = key
    meta = {"scenario": sc, "strategy": st, "learner": lk, "seed": seed, "window_months": window,
            "train_rows": train.n_rows}
    try:
        if st == "physics":
            pred = physics_only_predict(tier, test, sc, cache)
            return _evaluate(pred, test, rooms, {**meta, "label": f"{sc}-physics"}), None
        model = _fit_cell(plan, sc, st, lk, seed, tier, train, rooms, cache)
        pred = hybrid_predict(model, test, cache)
        return _evaluate(pred, test, rooms, {**meta, "label": model.label}), model
    except Exception as exc:
        raise CellError(f"cell (scenario={sc}, strategy={st}, learner={lk}, seed={seed}, "
                        f"window={window}): {exc}") from exc


def _matrix_keys(plan: ExperimentPlan) -> list[tuple]:
    keys = []
    for seed in plan.seeds:
        for sc in plan.scenario_list():
            keys.append((sc, "physics", "-", seed))
            keys.extend((sc, "data", lk, seed) for lk in plan.baselines_for(sc))
            keys.extend((c_sc, st, lk, seed) for c_sc, st, lk in plan.cell_list() if c_sc == sc)
    return keys


# ---------------------------------------------------------------------------
# CSV rendering


def _f4(v: float) -> str:
    return format(float(v), ".4f")


def _pct(v: float) -> str:
    return format(100.0 * float(v), ".2f")


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _coords(m: dict) -> list:
    return [m["scenario"], m["strategy"], m["learner"], m["seed"]]


def matrix_csv(reports) -> str:
    return _csv(
        ["scenario", "strategy", "learner", "seed", "window_months", "label", "mae", "mape_pct", "rmse", "std_ratio"],
        (_coords(r.metadata) + [r.metadata["window_months"], r.metadata["label"], _f4(r.mae), _pct(r.mape),
                                _f4(r.rmse), _f4(r.std_ratio)] for r in reports),
    )


def rooms_csv(reports) -> str:
    return _csv(
        ["scenario", "strategy", "learner", "seed", "room", "mae", "mape_pct", "rmse"],
        (_coords(r.metadata) + [room, _f4(m.mae), _pct(m.mape), _f4(m.rmse)]
         for r in reports for room, m in r.per_room.items()),
    )


def boxplot_stats(reports) -> list[dict]:
    """Room-level MAPE (in %) pooled over rooms and seeds per method."""
    groups: dict = {}
    for r in reports:
        key = tuple(_coords(r.metadata)[:3])
        groups.setdefault(key, []).extend(100.0 * m.mape for m in r.per_room.values())
    out = []
    for (sc, st, lk), vals in groups.items():
        v = np.asarray(vals)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        out.append({"scenario": sc, "strategy": st, "learner": lk, "n": v.size, "mean": v.mean(),
                    "q1": q1, "median": med, "q3": q3, "min": v.min(), "max": v.max()})
    return out


def boxplot_csv(reports) -> str:
    cols = ["mean", "q1", "median", "q3", "min", "max"]
    return _csv(
        ["scenario", "strategy", "learner", "n"] + cols,
        ([s["scenario"], s["strategy"], s["learner"], s["n"]] + [format(s[c], ".2f") for c in cols]
         for s in boxplot_stats(reports)),
    )


def monthly_csv(reports) -> str:
    return _csv(
        ["scenario", "strategy", "learner", "seed", "month", "n_rows", "mae", "mape_pct", "rmse"],
        (_coords(r.metadata) + [mo, mr.metadata["n_rows"], _f4(mr.mae), _pct(mr.mape), _f4(mr.rmse)]
         for r in reports if r.monthly is not None for mo, mr in r.monthly.reports.items()),
    )


def sweep_csv(reports) -> str:
    return _csv(
        ["scenario", "strategy", "learner", "seed", "window_months", "train_rows", "mae", "mape_pct", "rmse",
         "std_ratio"],
        (_coords(r.metadata) + [r.metadata["window_months"], r.metadata["train_rows"], _f4(r.mae), _pct(r.mape),
                                _f4(r.rmse), _f4(r.std_ratio)] for r in reports),
    )


def _write(out_dir, files: dict) -> dict:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, text in files.items():
        p = d / name
        p.write_text(text)
        paths[name] = p
    return paths


# ---------------------------------------------------------------------------
# drivers


def run_scenario_matrix(plan: ExperimentPlan, data: TimeSeriesFrame, tiers: dict | None = None,
                        cache: SimulationCache | None = None) -> list[MetricReport]:
    """Fit and score every cell of the plan plus the two baselines.

    For each (scenario, seed) the physics-only baseline is scored, then one
    data-only model per baseline learner, then every hybrid cell. Reports
    carry their coordinates in ``metadata``. When ``plan.out_dir`` is set the
    CSV files listed in the module docstring are written there.

    Parameters
    ----------
    tiers : dict, optional
        Prebuilt physics tiers keyed by (scenario, seed), as returned by
        :func:`build_tiers`. Missing entries are built on demand.
    """
    boundary = _boundary(plan, data)
    train, test = split_train_test(data, boundary)
    _assert_before(train, boundary)
    rooms = rooms_of(data)
    cache = cache or SimulationCache(maxsize=64)
    tiers = build_tiers(plan, data, train, tiers)
    months = len(np.unique(train.timestamps.astype("datetime64[M]")))
    reports = []
    for key in _matrix_keys(plan):
        sc, st, lk, seed = key
        report, model = _run_cell(plan, key, tiers[(sc, seed)], train, test, rooms, cache, months)
        reports.append(report)
        if model is not None and plan.save_bundles and plan.out_dir:
            save_bundle(model, Path(plan.out_dir) / "bundles" / f"{model.label}-s{seed}")
    if plan.out_dir:
        _write(plan.out_dir, {
            "scenario_matrix.csv": matrix_csv(reports),
            "scenario_rooms.csv": rooms_csv(reports),
            "scenario_boxplot.csv": boxplot_csv(reports),
            "scenario_monthly.csv": monthly_csv(reports),
        })
    return reports


def run_data_quantity_sweep(plan: ExperimentPlan, data: TimeSeriesFrame, tiers: dict | None = None,
                            cache: SimulationCache | None = None) -> list[MetricReport]:
    """Refit every cell and data baseline on trailing training windows.

    Each window ends at the test boundary. Physics tiers keep the calibration
    obtained on the full training period; only the learners see less data.
    Results for the full 12-month window of a one-year training period match
    :func:`run_scenario_matrix` exactly.
    """
    boundary = _boundary(plan, data)
    train, test = split_train_test(data, boundary)
    rooms = rooms_of(data)
    cache = cache or SimulationCache(maxsize=64)
    tiers = build_tiers(plan, data, train, tiers)
    windows = sorted({int(w) for w in plan.windows}, reverse=True)
    frames = {w: trailing_window(train, boundary, w) for w in windows}
    reports = []
    for seed in plan.seeds:
        for sc in plan.scenario_list():
            keys = [(sc, "data", lk, seed) for lk in plan.baselines_for(sc)]
            keys += [(c, st, lk, seed) for c, st, lk in plan.cell_list() if c == sc]
            for key in keys:
                for w in windows:
                    _assert_before(frames[w], boundary)
                    reports.append(_run_cell(plan, key, tiers[(sc, seed)], frames[w], test, rooms, cache, w)[0])
    if plan.out_dir:
        _write(plan.out_dir, {"sweep.csv": sweep_csv(reports)})
    return reports


# ---------------------------------------------------------------------------
# explanation study


@dataclass(frozen=True)
class ExplainStudy:
    results: dict
    rank_table: list
    files: dict = field(default_factory=dict)


def learner_input_names(model: HybridModel) -> tuple:
    """Columns the learner itself reads (raw features, plus simulations for the assistant)."""
    if model.strategy == HybridStrategy.ASSISTANT:
        return model.input_names
    return tuple(model.feature_names)


def explain_model(model: HybridModel, data: TimeSeriesFrame, n_samples: int = 500, n_background: int = 200,
                  n_clusters: int = 5, seed: int = 0, estimator: str = "auto", n_permutations: int = 32,
                  nested: bool = False, background: TimeSeriesFrame | None = None,
                  cache: SimulationCache | None = None) -> AttributionResult:
    """Owen values of one fitted model on a seeded subsample of ``data``.

    Features are clustered on the model's full input set: for assistant and
    residual models this includes the simulated temperatures. The background
    rows are drawn from ``background`` (default: ``data``).
    """
    if estimator not in ("auto", "exact", "sampled"):
        raise ValueError(f"unknown estimator {estimator!r}")
    Z = model.input_matrix(data, cache)
    Zb = Z if background is None else model.input_matrix(background, cache)
    rng = np.random.default_rng([seed, 0x0E1])
    idx = np.sort(rng.choice(Z.shape[0], size=min(n_samples, Z.shape[0]), replace=False))
    bidx = np.sort(rng.choice(Zb.shape[0], size=min(n_background, Zb.shape[0]), replace=False))
    X, B = Z[idx], Zb[bidx]
    names = model.input_names
    dend = agglomerate(pearson_distance(X, names))
    part = cut_partition(dend, min(n_clusters, len(names)))
    if estimator == "auto":
        fits = len(names) <= MAX_EXACT_FEATURES and max(len(c) for c in part.clusters) <= MAX_EXACT_CLUSTER
        estimator = "exact" if fits else "sampled"
    common = dict(nested=nested, dendrogram=dend, feature_names=names, target_names=model.target_names,
                  label=model.label)
    if estimator == "exact":
        res = owen_values(model.predict_matrix, X, B, part, **common)
    else:
        res = owen_values_sampled(model.predict_matrix, X, B, part, n_permutations=n_permutations,
                                  seed=seed, **common)
    return replace(res, metadata={**res.metadata, "rows": idx.tolist(), "seed": seed})


def rank_rows(model: HybridModel, result: AttributionResult, data: TimeSeriesFrame, k: int = 5,
              cache: SimulationCache | None = None) -> list[list]:
    """Top-k features by native importance and by mean |Owen value|.

    Both rankings cover the learner's own inputs and average over targets.
    """
    names = learner_input_names(model)
    pos = [result.feature_names.index(n) for n in names]
    owen = result.mean_abs().mean(axis=1)[pos]
    Z = model.input_matrix(data, cache)[:, : len(names)]
    native = native_importance(model.learner, model.standardizer.transform(Z)).mean(axis=1)
    tn, to = top_k(native, k), top_k(owen, k)
    rows = []
    for r in range(min(k, len(names))):
        rows.append([model.label, model.learner_kind, r + 1, names[tn[r]], format(native[tn[r]], ".6g"),
                     names[to[r]], format(owen[to[r]], ".6g"), rank_overlap(native, owen, r + 1)])
    return rows


RANK_HEADER = ["label", "learner", "rank", "native_feature", "native_importance", "owen_feature",
               "owen_importance", "overlap"]


def run_explain_study(models, data: TimeSeriesFrame, out_dir=None, n_samples: int = 500,
                      n_background: int = 200, n_clusters: int = 5, seed: int = 0, estimator: str = "auto",
                      n_permutations: int = 32, nested: bool = False, top: int = 10,
                      background: TimeSeriesFrame | None = None) -> ExplainStudy:
    """Attribute every model and export plot data plus the rank table.

    Parameters
    ----------
    models : iterable of HybridModel, or mapping of name to HybridModel
    data : TimeSeriesFrame
        Rows to explain (normally the test year).
    out_dir : path-like, optional
        Receives ``<name>_<kind>.csv`` (beeswarm, dependence, groupbar),
        ``<name>_dendrogram.json`` and ``rank_table.csv``.
    """
    if not isinstance(models, dict):
        models = {m.label: m for m in models}
    if not models:
        raise ValueError("no models to explain")
    cache = SimulationCache(maxsize=8)
    results, ranks, texts = {}, [], {}
    for name, model in models.items():
        res = explain_model(model, data, n_samples, n_background, n_clusters, seed, estimator, n_permutations,
                            nested, background, cache)
        results[name] = res
        ranks.extend(rank_rows(model, res, data, 5, cache))
        for kind in ("beeswarm", "dependence", "groupbar"):
            texts[f"{name}_{kind}.csv"] = export_plotdata(res, kind, top=top)
        texts[f"{name}_dendrogram.json"] = export_plotdata(res, "dendrogram")
    texts["rank_table.csv"] = _csv(RANK_HEADER, ranks)
    files = _write(out_dir, texts) if out_dir else {}
    return ExplainStudy(results, ranks, files)
