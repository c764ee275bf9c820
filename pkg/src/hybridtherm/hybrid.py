"""Hybrid physics/data models.

Four ways of binding a physics tier's simulated room temperatures ``Y_sim``
to a learner ``g`` over the scenario's input features ``X``:

============  ===========================  ========================
strategy      learner is fitted on         prediction
============  ===========================  ========================
assistant     [X | Y_sim] -> Y             g([x, y_sim])
residual      X -> Y - Y_sim               y_sim + g(x)
surrogate     X -> Y_sim                   g(x)
augmentation  X -> Y_sim, then X -> Y      g(x)
============  ===========================  ========================

A model without a strategy is the purely data-driven baseline ``X -> Y``.
"""

from __future__ import annotations

import enum
import json
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .learners import (
    FfnnConfig,
    FitReport,
    ForestConfig,
    TrainConfig,
    ffnn_finetune,
    ffnn_fit,
    learner_kind,
    load_model,
    lr_finetune,
    lr_fit,
    rf_fit,
    rf_warmstart_extend,
    save_model,
)
from .physics import PhysicsTier, sim_column, target_column
from .timeseries import (
    SCENARIOS,
    ColumnSpec,
    FeatureGroup,
    ScenarioSpec,
    Standardizer,
    TimeSeriesFrame,
    fit_standardizer,
)

BUNDLE_FORMAT = "hybridtherm.bundle"
BUNDLE_VERSION = 1


class HybridStrategy(str, enum.Enum):
    ASSISTANT = "assistant"
    RESIDUAL = "residual"
    SURROGATE = "surrogate"
    AUGMENTATION = "augmentation"


def pred_column(room: str) -> str:
    return f"pred_{room}_temperature"


@dataclass(frozen=True)
class LearnerConfig:
    """Which learner to fit and with what settings.

    ``finetune`` configures the second stage of augmentation for LR and FFNN
    (default: standard training with a patience of 3); ``extra_trees`` the
    number of trees a forest gains in that stage.
    """

    kind: str = "ffnn"
    ffnn: FfnnConfig = field(default_factory=FfnnConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    finetune: TrainConfig | None = None
    extra_trees: int = 100

    def __post_init__(self):
        if self.kind not in ("lr", "ffnn", "rf"):
            raise ValueError(f"unknown learner kind {self.kind!r}")

    def with_seed(self, seed: int) -> "LearnerConfig":
        return replace(
            self,
            ffnn=replace(self.ffnn, seed=seed),
            forest=replace(self.forest, seed=seed),
            finetune=replace(self.finetune, seed=seed) if self.finetune else None,
        )

    def finetune_config(self) -> TrainConfig:
        if self.finetune is not None:
            return self.finetune
        base = self.ffnn
        return TrainConfig(base.batch_size, base.max_epochs, 3, base.validation_fraction,
                           base.learning_rate, base.seed)


def _fit_learner(cfg: LearnerConfig, X, Y):
    if cfg.kind == "lr":
        return lr_fit(X, Y), FitReport()
    if cfg.kind == "ffnn":
        return ffnn_fit(X, Y, cfg.ffnn)
    return rf_fit(X, Y, cfg.forest), FitReport()


def _finetune_learner(cfg: LearnerConfig, model, X, Y):
    if cfg.kind == "lr":
        return lr_finetune(model, X, Y, cfg.finetune_config())
    if cfg.kind == "ffnn":
        return ffnn_finetune(model, X, Y, cfg.finetune_config())
    return rf_warmstart_extend(model, X, Y, cfg.extra_trees), FitReport()


# ---------------------------------------------------------------------------
# simulation cache


class SimulationCache:
    """LRU of physics outputs keyed by (network digest, tier, rooms, driver hash)."""

    def __init__(self, maxsize: int = 16):
        self.maxsize = maxsize
        self._store: OrderedDict = OrderedDict()
        self.hits = 0
        self.misses = 0

    def get(self, physics: PhysicsTier, drivers: TimeSeriesFrame) -> TimeSeriesFrame:
        key = (physics.network.digest(), physics.tier.value, physics.rooms, drivers.content_hash())
        if key in self._store:
            self.hits += 1
            self._store.move_to_end(key)
            return self._store[key]
        self.misses += 1
        out = physics.simulate(drivers)
        self._store[key] = out
        if len(self._store) > self.maxsize:
            self._store.popitem(last=False)
        return out

    def clear(self) -> None:
        self._store.clear()
        self.hits = self.misses = 0


DEFAULT_CACHE = SimulationCache()


def scenario_of(scenario) -> ScenarioSpec:
    if isinstance(scenario, ScenarioSpec):
        return scenario
    try:
        return SCENARIOS[str(scenario).upper()]
    except KeyError:
        raise ValueError(f"unknown scenario {scenario!r}") from None


def feature_columns(frame: TimeSeriesFrame, scenario: ScenarioSpec) -> list[str]:
    """Input columns a scenario may read, in frame order."""
    groups = scenario.allowed_groups - {FeatureGroup.TARGET, FeatureGroup.SIMULATED}
    return frame.names_in_groups(groups)


def simulate_scenario(physics: PhysicsTier, frame: TimeSeriesFrame, scenario: ScenarioSpec,
                      cache: SimulationCache | None = None) -> TimeSeriesFrame:
    """Run the physics tier on the drivers the scenario exposes.

    Driver columns outside the scenario's groups are withheld and therefore
    read as zero input by the simulator.
    """
    drivers = frame.select(feature_columns(frame, scenario))
    return (cache or DEFAULT_CACHE).get(physics, drivers)


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True, eq=False)
class HybridModel:
    """A fitted hybrid (or, with ``strategy=None``, purely data-driven) model.

    ``feature_names`` are the raw input columns; for the assistant strategy
    the simulated columns follow them. The standardizer covers exactly the
    learner inputs.
    """

    strategy: HybridStrategy | None
    learner: object
    physics: PhysicsTier | None
    standardizer: Standardizer
    feature_names: tuple
    target_names: tuple
    scenario: str
    rooms: tuple
    report: FitReport = field(default_factory=FitReport)
    pretrain_report: FitReport | None = None

    @property
    def learner_kind(self) -> str:
        return learner_kind(self.learner)

    @property
    def label(self) -> str:
        s = self.strategy.value if self.strategy else "data"
        return f"{self.scenario}-{s}-{self.learner_kind}"

    @property
    def uses_simulation_input(self) -> bool:
        """True when the prediction reads ``Y_sim`` directly (assistant, residual)."""
        return self.strategy in (HybridStrategy.ASSISTANT, HybridStrategy.RESIDUAL)

    @property
    def input_names(self) -> tuple:
        """Columns of the matrix taken by :meth:`predict_matrix`."""
        if self.uses_simulation_input:
            return tuple(self.feature_names) + tuple(sim_column(r) for r in self.rooms)
        return tuple(self.feature_names)

    def predict_matrix(self, Z: np.ndarray) -> np.ndarray:
        """Predict from raw inputs ordered as :attr:`input_names`.

        For assistant and residual models the trailing ``n_rooms`` columns
        are the simulated temperatures.
        """
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim == 1:
            Z = Z[None, :]
        d = len(self.feature_names)
        if self.strategy == HybridStrategy.ASSISTANT:
            return self.learner.predict(self.standardizer.transform(Z))
        out = self.learner.predict(self.standardizer.transform(Z[:, :d]))
        if self.strategy == HybridStrategy.RESIDUAL:
            out = out + Z[:, d:]
        return out

    def input_matrix(self, frame: TimeSeriesFrame, cache: SimulationCache | None = None) -> np.ndarray:
        X = frame.matrix(list(self.feature_names))
        if self.uses_simulation_input:
            sim = simulate_scenario(self.physics, frame, scenario_of(self.scenario), cache)
            X = np.column_stack([X, sim.values])
        return X


def _check_targets(frame: TimeSeriesFrame, rooms) -> list[str]:
    names = [target_column(r) for r in rooms]
    missing = [n for n in names if n not in frame]
    if missing:
        raise ValueError(f"missing target column: {missing[0]}")
    return names


def hybrid_fit(
    strategy,
    learner: LearnerConfig,
    physics: PhysicsTier,
    train: TimeSeriesFrame,
    scenario,
    cache: SimulationCache | None = None,
) -> HybridModel:
    """Fit a hybrid model on the training frame.

    Parameters
    ----------
    strategy : HybridStrategy or str
    learner : LearnerConfig
    physics : PhysicsTier
        Must be the tier paired with ``scenario``.
    train : TimeSeriesFrame
        Scenario inputs plus one target column per room.
    scenario : ScenarioSpec or str
    cache : SimulationCache, optional
        Shared physics-output cache (module default when omitted).

    Raises
    ------
    ValueError
        Missing target columns or a tier that does not match the scenario.
    """
    strategy = HybridStrategy(strategy)
    scen = scenario_of(scenario)
    if physics.tier != scen.physics_tier:
        raise ValueError(f"scenario {scen.id} needs the {scen.physics_tier.value} tier, "
                         f"got {physics.tier.value}")
    targets = _check_targets(train, physics.rooms)
    feats = feature_columns(train, scen)
    Y = train.matrix(targets)
    sim = simulate_scenario(physics, train, scen, cache)
    Ysim = sim.values

    if strategy == HybridStrategy.ASSISTANT:
        frame = train.select(feats).concat_columns(sim)
        std = fit_standardizer(frame, feats + sim.names)
        X = std.transform(frame.values)
    else:
        std = fit_standardizer(train, feats)
        X = std.transform(train.matrix(feats))

    pre = None
    if strategy == HybridStrategy.ASSISTANT:
        model, report = _fit_learner(learner, X, Y)
    elif strategy == HybridStrategy.RESIDUAL:
        model, report = _fit_learner(learner, X, Y - Ysim)
    elif strategy == HybridStrategy.SURROGATE:
        model, report = _fit_learner(learner, X, Ysim)
    else:
        model, pre = _fit_learner(learner, X, Ysim)
        model, report = _finetune_learner(learner, model, X, Y)
    return HybridModel(strategy, model, physics, std, tuple(feats), tuple(targets), scen.id,
                       tuple(physics.rooms), report, pre)


def data_only_fit(learner: LearnerConfig, train: TimeSeriesFrame, scenario, rooms) -> HybridModel:
    """Purely data-driven baseline ``X -> Y`` on the scenario's inputs."""
    scen = scenario_of(scenario)
    targets = _check_targets(train, rooms)
    feats = feature_columns(train, scen)
    std = fit_standardizer(train, feats)
    model, report = _fit_learner(learner, std.transform(train.matrix(feats)), train.matrix(targets))
    return HybridModel(None, model, None, std, tuple(feats), tuple(targets), scen.id, tuple(rooms), report)


def _prediction_frame(frame: TimeSeriesFrame, rooms, values) -> TimeSeriesFrame:
    specs = [ColumnSpec(pred_column(r), FeatureGroup.TARGET, "degC") for r in rooms]
    return TimeSeriesFrame(frame.timestamps, specs, values, frame.step_minutes)


def hybrid_predict(model: HybridModel, frame: TimeSeriesFrame, cache: SimulationCache | None = None) -> TimeSeriesFrame:
    """One ``pred_<room>_temperature`` column per room at the frame's resolution."""
    missing = [n for n in model.feature_names if n not in frame]
    if missing:
        raise ValueError(f"missing driver column: {missing[0]}")
    Z = model.input_matrix(frame, cache)
    if model.strategy is None or model.strategy in (HybridStrategy.SURROGATE, HybridStrategy.AUGMENTATION):
        Y = model.learner.predict(model.standardizer.transform(Z))
    else:
        Y = model.predict_matrix(Z)
    return _prediction_frame(frame, model.rooms, Y)


def physics_only_predict(physics: PhysicsTier, frame: TimeSeriesFrame, scenario=None,
                         cache: SimulationCache | None = None) -> TimeSeriesFrame:
    """The physics tier's simulation relabelled as predictions.

    With a ``scenario`` only its driver groups are passed to the simulator;
    otherwise every column of ``frame`` is available.
    """
    if scenario is None:
        sim = (cache or DEFAULT_CACHE).get(physics, frame)
    else:
        sim = simulate_scenario(physics, frame, scenario_of(scenario), cache)
    return _prediction_frame(frame, physics.rooms, sim.values)


# ---------------------------------------------------------------------------
# bundles


def save_bundle(model: HybridModel, directory) -> Path:
    """Write ``manifest.json``, ``physics.json`` and the learner files."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    learner_files = save_model(model.learner, d / "learner.json")
    manifest = {
        "format": BUNDLE_FORMAT,
        "version": BUNDLE_VERSION,
        "strategy": model.strategy.value if model.strategy else None,
        "learner": model.learner_kind,
        "scenario": model.scenario,
        "rooms": list(model.rooms),
        "feature_names": list(model.feature_names),
        "target_names": list(model.target_names),
        "standardizer": model.standardizer.to_dict(),
        "learner_files": [p.name for p in learner_files],
        "physics_file": "physics.json" if model.physics is not None else None,
        "report": {"epochs_run": model.report.epochs_run, "early_stopped": model.report.early_stopped,
                   "best_epoch": model.report.best_epoch},
    }
    if model.physics is not None:
        (d / "physics.json").write_text(json.dumps(model.physics.to_dict(), indent=1))
    (d / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return d


def load_bundle(directory) -> HybridModel:
    d = Path(directory)
    m = json.loads((d / "manifest.json").read_text())
    if m.get("format") != BUNDLE_FORMAT or m.get("version") != BUNDLE_VERSION:
        raise ValueError(f"{d} is not a version-{BUNDLE_VERSION} model bundle")
    physics = None
    if m["physics_file"]:
        physics = PhysicsTier.from_dict(json.loads((d / m["physics_file"]).read_text()))
    return HybridModel(
        HybridStrategy(m["strategy"]) if m["strategy"] else None,
        load_model(d / "learner.json"),
        physics,
        Standardizer.from_dict(m["standardizer"]),
        tuple(m["feature_names"]),
        tuple(m["target_names"]),
        m["scenario"],
        tuple(m["rooms"]),
        FitReport(epochs_run=m["report"]["epochs_run"], early_stopped=m["report"]["early_stopped"],
                  best_epoch=m["report"]["best_epoch"]),
    )
