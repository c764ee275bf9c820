"""Command line interface.

Exit codes: 0 on success, 2 on invalid input (arguments, configuration or
data files), 3 when a run fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import __version__
from ..hybrid import (
    HybridStrategy,
    LearnerConfig,
    data_only_fit,
    feature_columns,
    hybrid_fit,
    hybrid_predict,
    load_bundle,
    save_bundle,
    scenario_of,
)
from ..physics import PhysicsTier, make_tier, rooms_of, target_column
from ..synthetic import generate_dataset, ground_truth_model
from ..timeseries import (
    SCENARIOS,
    TimeSeriesFrame,
    interpolate_missing,
    load_csv,
    resample,
    split_train_test,
    write_csv,
)
from . import config as cfgmod
from .experiments import (
    build_tiers,
    default_boundary,
    matrix_csv,
    monthly_csv,
    rooms_csv,
    run_data_quantity_sweep,
    run_explain_study,
    run_scenario_matrix,
)
from .metrics import evaluate_arrays

log = logging.getLogger("hybridtherm")

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3


class InvalidInput(Exception):
    pass


# ---------------------------------------------------------------------------
# shared helpers


def _schema_path(data: Path, schema) -> Path:
    return Path(schema) if schema else data.with_suffix(".schema")


def _load(args, cfg: dict) -> TimeSeriesFrame:
    data = Path(args.data)
    frame = load_csv(data, _schema_path(data, args.schema))
    frame = interpolate_missing(frame)
    step = args.resample if args.resample is not None else cfg.get("data.resample", 0)
    if step:
        frame = resample(frame, step)
    return frame


def _boundary(args, frame: TimeSeriesFrame):
    return np.datetime64(args.boundary, "m") if args.boundary else default_boundary(frame)


def _out(args) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1) + "\n")


def _tier_for(args, cfg, frame, train, scenario: str) -> PhysicsTier:
    if args.physics:
        tier = PhysicsTier.from_dict(json.loads(Path(args.physics).read_text()))
        if tier.tier != SCENARIOS[scenario].physics_tier:
            raise InvalidInput(f"{args.physics} holds a {tier.tier.value} tier; scenario {scenario} "
                               f"needs {SCENARIOS[scenario].physics_tier.value}")
        return tier
    return make_tier(SCENARIOS[scenario].physics_tier, frame, args.seed, train, train,
                     cfgmod.calibration_options(cfg))


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args, cfg) -> None:
    world = cfgmod.world_config(cfg, args.seed)
    for name in ("years", "n_rooms", "step_minutes"):
        if getattr(args, name) is not None:
            world = replace(world, **{name: getattr(args, name)})
    out = _out(args)
    data_path = Path(args.data) if args.data else out / "data.csv"
    frame = generate_dataset(world)
    step = args.resample if args.resample is not None else cfg.get("data.resample", 15)
    if step:
        frame = resample(interpolate_missing(frame), step)
    write_csv(frame, data_path, _schema_path(data_path, args.schema))
    hidden = Path(args.hidden) if args.hidden else out / "hidden_model.json"
    ground_truth_model(world).to_json(hidden)
    print(f"wrote {data_path} ({frame.n_rows} rows, {len(frame.names)} columns) and {hidden}")


def cmd_calibrate(args, cfg) -> None:
    frame = _load(args, cfg)
    train, _ = split_train_test(frame, _boundary(args, frame))
    opts = cfgmod.calibration_options(cfg)
    tier = make_tier("CalibratedDetailed", frame, args.seed, train, train, opts)
    out = _out(args)
    _write_json(out / "physics.json", tier.to_dict())
    c = tier.calibration
    _write_json(out / "calibration.json", {"rmse": c.rmse, "initial_rmse": c.initial_rmse,
                                            "rmse_per_room": c.rmse_per_room, "iterations": c.iterations,
                                            "converged": c.converged})
    print(f"calibrated RMSE {c.initial_rmse:.4f} -> {c.rmse:.4f} degC in {c.iterations} cycles")


def cmd_simulate(args, cfg) -> None:
    frame = _load(args, cfg)
    tier = PhysicsTier.from_dict(json.loads(Path(args.physics).read_text()))
    drivers = frame
    if args.scenario:
        drivers = frame.select(feature_columns(frame, scenario_of(args.scenario)))
    sim = tier.simulate(drivers)
    path = _out(args) / "simulated.csv"
    write_csv(sim, path, path.with_suffix(".schema"))
    print(f"wrote {path}")


def cmd_train(args, cfg) -> None:
    frame = _load(args, cfg)
    scenario = scenario_of(args.scenario).id
    train, _ = split_train_test(frame, _boundary(args, frame))
    learner = LearnerConfig(args.learner, cfgmod.ffnn_config(cfg), cfgmod.forest_config(cfg)).with_seed(args.seed)
    if args.strategy == "data":
        model = data_only_fit(learner, train, scenario, rooms_of(frame))
    else:
        model = hybrid_fit(args.strategy, learner, _tier_for(args, cfg, frame, train, scenario), train, scenario)
    bundle = Path(args.bundle) if args.bundle else _out(args) / "bundle"
    save_bundle(model, bundle)
    print(f"wrote {model.label} to {bundle}")


def _plan(args, cfg):
    plan = cfgmod.plan_from_config(cfg, args.seed if args.seed_given else None, args.out_dir)
    if args.boundary:
        plan = replace(plan, boundary=args.boundary)
    return plan


def cmd_evaluate(args, cfg) -> None:
    frame = _load(args, cfg)
    out = _out(args)
    if not args.bundle:
        plan = _plan(args, cfg)
        reports = run_scenario_matrix(plan, frame)
        if args.figures:
            from . import figures

            figures.scenario_boxplot(reports, out / "scenario_boxplot.png")
        print(f"wrote {len(reports)} scenario-matrix rows to {out}")
        return
    _, test = split_train_test(frame, _boundary(args, frame))
    reports = []
    for b in args.bundle:
        model = load_bundle(b)
        pred = hybrid_predict(model, test)
        meta = {"scenario": model.scenario, "strategy": model.strategy.value if model.strategy else "data",
                "learner": model.learner_kind, "seed": args.seed, "label": model.label,
                "window_months": "-"}
        Y = test.matrix([target_column(r) for r in model.rooms])
        reports.append(evaluate_arrays(Y, pred.values, model.rooms, meta, timestamps=test.timestamps))
    (out / "metrics.csv").write_text(matrix_csv(reports))
    (out / "metrics_rooms.csv").write_text(rooms_csv(reports))
    (out / "metrics_monthly.csv").write_text(monthly_csv(reports))
    if args.figures:
        from . import figures

        figures.monthly_bars(reports, out / "monthly_mape.png")
    for r in reports:
        print(f"{r.metadata['label']}: MAE {r.mae:.4f}  MAPE {100 * r.mape:.2f}%  RMSE {r.rmse:.4f}")


def cmd_explain(args, cfg) -> None:
    frame = _load(args, cfg)
    train, test = split_train_test(frame, _boundary(args, frame))
    models = {}
    for b in args.bundle:
        m = load_bundle(b)
        models[m.label if m.label not in models else f"{m.label}-{len(models)}"] = m
    opts = cfgmod.explain_options(cfg)
    if args.samples is not None:
        opts["n_samples"] = args.samples
    if args.estimator is not None:
        opts["estimator"] = args.estimator
    out = _out(args)
    study = run_explain_study(models, test, out, seed=args.seed, background=train, **opts)
    if args.figures:
        from . import figures

        for name, res in study.results.items():
            figures.beeswarm(res, out / f"{name}_beeswarm.png")
            figures.groupbar(res, out / f"{name}_groupbar.png")
    print(f"wrote explanations for {len(models)} model(s) to {out}")


def cmd_sweep(args, cfg) -> None:
    frame = _load(args, cfg)
    plan = _plan(args, cfg)
    reports = run_data_quantity_sweep(plan, frame, build_tiers(plan, frame))
    out = _out(args)
    if args.figures:
        from . import figures

        figures.sweep_lines(reports, out / "sweep.png")
    print(f"wrote {len(reports)} sweep rows to {out / 'sweep.csv'}")


# ---------------------------------------------------------------------------
# parser


def _data_args(p, required=True) -> None:
    p.add_argument("--data", required=required, help="CSV file with a timestamp column")
    p.add_argument("--schema", help="schema sidecar (default: the data path with a .schema suffix)")
    p.add_argument("--resample", type=int, help="resampling step in minutes (0 keeps the data as is)")
    p.add_argument("--boundary", help="first test timestamp (default: start of the last calendar year)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--out-dir", default=".", help="output directory (default: current directory)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hybridtherm", description="Hybrid building thermal models.")
    p.add_argument("--version", action="version", version=f"hybridtherm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic building dataset")
    s.add_argument("--years", type=int)
    s.add_argument("--n-rooms", type=int)
    s.add_argument("--step", dest="step_minutes", type=int, help="simulation step in minutes")
    s.add_argument("--resample", type=int, help="output step in minutes after gap filling (0 = raw, default 15)")
    s.add_argument("--data", help="output CSV (default: <out-dir>/data.csv)")
    s.add_argument("--schema", help="output schema sidecar")
    s.add_argument("--hidden", help="hidden-model JSON (default: <out-dir>/hidden_model.json)")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("simulate", parents=[common], help="run a physics tier on a dataset")
    _data_args(s)
    s.add_argument("--physics", required=True, help="physics tier JSON")
    s.add_argument("--scenario", help="only pass this scenario's driver columns")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("calibrate", parents=[common], help="calibrate the detailed RC network")
    _data_args(s)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("train", parents=[common], help="fit a hybrid or data-only model")
    _data_args(s)
    s.add_argument("--strategy", required=True, choices=[x.value for x in HybridStrategy] + ["data"])
    s.add_argument("--learner", default="ffnn", choices=["lr", "ffnn", "rf"])
    s.add_argument("--scenario", default="WBR", choices=list(SCENARIOS))
    s.add_argument("--physics", help="physics tier JSON (default: build the scenario's tier)")
    s.add_argument("--bundle", help="bundle directory (default: <out-dir>/bundle)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("evaluate", parents=[common],
                       help="score bundles on the test period, or run the scenario matrix without --bundle")
    _data_args(s)
    s.add_argument("--bundle", action="append", help="model bundle directory (repeatable)")
    s.add_argument("--figures", action="store_true", help="also render PNG figures")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("explain", parents=[common], help="Owen-value explanations and rank table")
    _data_args(s)
    s.add_argument("--bundle", action="append", required=True, help="model bundle directory (repeatable)")
    s.add_argument("--samples", type=int, help="test rows to explain (default 500)")
    s.add_argument("--estimator", choices=["auto", "exact", "sampled"])
    s.add_argument("--figures", action="store_true")
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("sweep", parents=[common], help="data-quantity sweep over training windows")
    _data_args(s)
    s.add_argument("--figures", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    try:
        cfg = cfgmod.load_config(args.config)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        args.func(args, cfg)
    except (InvalidInput, ValueError, KeyError, FileNotFoundError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - any other failure is a run failure
        log.debug("run failed", exc_info=True)
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
