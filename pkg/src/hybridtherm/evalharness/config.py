"""``key=value`` configuration files for the command line.

Blank lines and lines starting with ``#`` are ignored. Lists are comma
separated; seed lists also accept ranges such as ``0-4``.

Keys
----
world.seed, world.years, world.n_rooms, world.step_minutes, world.start_year, world.missing_fraction
data.resample                    resampling step in minutes applied after loading (0 = keep)
plan.scenarios, plan.strategies, plan.learners, plan.seeds, plan.windows, plan.boundary
plan.cells                       ``scenario:strategy:learner`` triples separated by ``;``
plan.baseline_learners
ffnn.hidden, ffnn.activation, ffnn.max_epochs, ffnn.patience, ffnn.batch_size,
ffnn.learning_rate, ffnn.validation_fraction
rf.n_trees, rf.min_samples_split, rf.min_samples_leaf, rf.max_features, rf.bootstrap
calibration.max_cycles, calibration.golden_iters, calibration.rel_tol
explain.samples, explain.background, explain.clusters, explain.permutations,
explain.estimator, explain.nested, explain.top
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from ..learners import FfnnConfig, ForestConfig
from ..physics import CalibrationOptions
from ..synthetic import WorldConfig
from .experiments import ExperimentPlan

_INT, _FLOAT, _STR, _BOOL = int, float, str, "bool"

KNOWN_KEYS = {
    "world.seed": _INT, "world.years": _INT, "world.n_rooms": _INT, "world.step_minutes": _INT,
    "world.start_year": _INT, "world.missing_fraction": _FLOAT,
    "data.resample": _INT,
    "plan.scenarios": "list", "plan.strategies": "list", "plan.learners": "list", "plan.seeds": "seeds",
    "plan.windows": "ints", "plan.boundary": _STR, "plan.cells": "cells", "plan.baseline_learners": "list",
    "ffnn.hidden": "ints", "ffnn.activation": _STR, "ffnn.max_epochs": _INT, "ffnn.patience": _INT,
    "ffnn.batch_size": _INT, "ffnn.learning_rate": _FLOAT, "ffnn.validation_fraction": _FLOAT,
    "rf.n_trees": _INT, "rf.min_samples_split": _INT, "rf.min_samples_leaf": _INT, "rf.max_features": _INT,
    "rf.bootstrap": _BOOL,
    "calibration.max_cycles": _INT, "calibration.golden_iters": _INT, "calibration.rel_tol": _FLOAT,
    "explain.samples": _INT, "explain.background": _INT, "explain.clusters": _INT,
    "explain.permutations": _INT, "explain.estimator": _STR, "explain.nested": _BOOL, "explain.top": _INT,
}


def _seeds(text: str) -> tuple:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return tuple(out)


def _convert(key: str, text: str):
    kind = KNOWN_KEYS[key]
    text = text.strip()
    try:
        if kind == "list":
            return tuple(p.strip() for p in text.split(",") if p.strip())
        if kind == "ints":
            return tuple(int(p) for p in text.split(",") if p.strip())
        if kind == "seeds":
            return _seeds(text)
        if kind == "cells":
            return tuple(tuple(p.strip() for p in c.split(":")) for c in text.split(";") if c.strip())
        if kind == _BOOL:
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return text.lower() in ("true", "1", "yes")
        return kind(text)
    except ValueError:
        raise ValueError(f"bad value for {key}: {text!r}") from None


def parse_config(text: str) -> dict:
    """Parse ``key=value`` lines into typed values; unknown keys are errors."""
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ValueError(f"config line {n}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"missing config file: {p}")
    return parse_config(p.read_text())


def _section(cfg: dict, prefix: str, rename: dict | None = None) -> dict:
    rename = rename or {}
    out = {}
    for k, v in cfg.items():
        if k.startswith(prefix + "."):
            name = k[len(prefix) + 1:]
            out[rename.get(name, name)] = v
    return out


def world_config(cfg: dict, seed: int | None = None) -> WorldConfig:
    kw = _section(cfg, "world")
    if seed is not None:
        kw["seed"] = seed
    return WorldConfig(**kw)


def ffnn_config(cfg: dict) -> FfnnConfig:
    return FfnnConfig(**_section(cfg, "ffnn"))


def forest_config(cfg: dict) -> ForestConfig:
    return ForestConfig(**_section(cfg, "rf"))


def calibration_options(cfg: dict) -> CalibrationOptions:
    return CalibrationOptions(**_section(cfg, "calibration"))


def plan_from_config(cfg: dict, seed: int | None = None, out_dir=None) -> ExperimentPlan:
    """Experiment plan from parsed config; ``seed`` replaces the seed list."""
    kw = _section(cfg, "plan")
    if seed is not None:
        kw["seeds"] = (seed,)
    plan = ExperimentPlan(**kw, ffnn=ffnn_config(cfg), forest=forest_config(cfg),
                          calibration=calibration_options(cfg))
    return replace(plan, out_dir=str(out_dir)) if out_dir is not None else plan


def explain_options(cfg: dict) -> dict:
    """Keyword arguments for :func:`run_explain_study`."""
    names = {"samples": "n_samples", "background": "n_background", "clusters": "n_clusters",
             "permutations": "n_permutations"}
    return _section(cfg, "explain", names)
