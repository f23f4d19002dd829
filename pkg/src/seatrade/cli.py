"""Command-line interface exposing the pipeline as subcommands.

Subcommands: extract, panel, train, predict, eval, placebo, extrap, mc.
Options resolve as: command-line flag > config-file entry > built-in
default, so a JSON config file can carry a full experiment manifest while
flags override individual entries. All randomness flows from ``--seed`` (or
the config seed); no command reads the wall clock into its outputs, so
identical configs and inputs produce byte-identical artifacts.

Exit codes: 0 success, 1 usage/configuration error, 2 data error. The
resolved configuration and seed are echoed to stderr for auditability.
``SEATRADE_LOG`` (error|warn|info|debug) sets log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import evaluation, extrap, mc, panel as panel_mod, raster, rgrid
from .errors import ConfigError, DataError, SeatradeError
from .gbt import GradientBoostedTrees
from .months import add_months

log = logging.getLogger("seatrade")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

GBT_PARAM_KEYS = (
    "n_rounds",
    "max_depth",
    "learning_rate",
    "min_child_weight",
    "l2_reg",
    "subsample_rows",
    "subsample_cols",
    "n_bins",
)


def _setup_logging() -> None:
    level_name = os.environ.get("SEATRADE_LOG", "warn").lower()
    level = _LOG_LEVELS.get(level_name, logging.WARNING)
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}")
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return payload


def _resolve(args: argparse.Namespace, config: dict, key: str, default=None):
    """Flag wins over config entry wins over default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _echo_resolved(resolved: dict) -> None:
    print("resolved config: " + json.dumps(resolved, sort_keys=True), file=sys.stderr)


def _require_path(path_str: str | None, what: str) -> Path:
    if not path_str:
        raise ConfigError(f"missing required path for {what}")
    path = Path(path_str)
    if not path.exists():
        raise ConfigError(f"{what} path does not exist: {path}")
    return path


def _out_path(path_str: str) -> Path:
    path = Path(path_str)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


# ----------------------------------------------------------------- commands


def cmd_extract(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    raster_root = _require_path(_resolve(args, config, "raster_root"), "raster root")
    out = _resolve(args, config, "out", "features.csv")
    tau = float(_resolve(args, config, "tau", raster.DEFAULT_LIT_THRESHOLD))
    std_mode = _resolve(args, config, "ntl_std_mode", "spatial")
    jobs = int(_resolve(args, config, "jobs", os.cpu_count()) or 1)
    _echo_resolved(
        {"cmd": "extract", "raster_root": str(raster_root), "out": str(out),
         "tau": tau, "ntl_std_mode": std_mode, "jobs": jobs}
    )

    grouped = rgrid.walk_raster_root(raster_root)
    if not grouped:
        raise DataError(f"no readable rasters under {raster_root}")

    def one(key):
        aoi_id, ym = key
        stacks = rgrid.stacks_for_month(aoi_id, ym, grouped[key])
        return raster.month_features(
            aoi_id,
            ym,
            vv_stack=stacks.get("vv"),
            vh_stack=stacks.get("vh"),
            ntl_stack=stacks.get("ntl"),
            tau=tau,
            ntl_std_mode=std_mode,
        )

    keys = sorted(grouped)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, keys))
    else:
        rows = [one(k) for k in keys]
    frame = panel_mod.features_to_frame(rows)
    panel_mod.write_features_csv(frame, _out_path(str(out)))
    log.info("wrote %d feature rows to %s", len(frame), out)
    return 0


def cmd_panel(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    features_path = _require_path(_resolve(args, config, "features"), "features csv")
    wpi_path = _require_path(_resolve(args, config, "wpi"), "wpi csv")
    trade_path = _require_path(_resolve(args, config, "trade"), "trade csv")
    spec = panel_mod.normalize_spec(_resolve(args, config, "spec", "sat+port"))
    sizes = _resolve(args, config, "sizes")
    out = _resolve(args, config, "out", "panel.csv")
    _echo_resolved(
        {"cmd": "panel", "features": str(features_path), "wpi": str(wpi_path),
         "trade": str(trade_path), "spec": spec, "sizes": sizes, "out": str(out)}
    )
    frame = panel_mod.assemble_panel(
        panel_mod.read_features_csv(features_path),
        pd.read_csv(wpi_path, dtype={"port_id": str}),
        panel_mod.load_trade_csv(trade_path),
        spec=spec,
    )
    if sizes:
        frame = panel_mod.filter_size(frame, _parse_sizes(sizes))
    panel_mod.write_panel_csv(frame, _out_path(str(out)))
    log.info("wrote %d panel rows to %s", len(frame), out)
    return 0


def _parse_sizes(sizes) -> list[str]:
    if isinstance(sizes, str):
        return [s.strip() for s in sizes.split(",") if s.strip()]
    return list(sizes)


def _split_panel(frame: pd.DataFrame, args, config) -> tuple[pd.DataFrame, pd.DataFrame]:
    region = _resolve(args, config, "leave_out_region")
    if region:
        return panel_mod.leave_region_out(frame, region)
    train_frac = float(_resolve(args, config, "train_frac", 0.70))
    return panel_mod.chrono_split(frame, train_frac)


def _target_column(target: str) -> str:
    if target not in ("value", "weight"):
        raise ConfigError(f"target must be value or weight, got {target!r}")
    return f"y_{target}_log"


def _gbt_params(args, config, seed: int) -> dict:
    params = {}
    for key in GBT_PARAM_KEYS:
        value = _resolve(args, config, key)
        if value is not None:
            params[key] = value
    params["seed"] = seed
    return params


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    panel_path = _require_path(_resolve(args, config, "panel"), "panel csv")
    spec = panel_mod.normalize_spec(_resolve(args, config, "spec", "sat+port"))
    target = _resolve(args, config, "target", "value")
    seed = int(_resolve(args, config, "seed", 0))
    sizes = _resolve(args, config, "sizes")
    out = _resolve(args, config, "out", "model.json")
    params = _gbt_params(args, config, seed)
    resolved = {"cmd": "train", "panel": str(panel_path), "spec": spec,
                "target": target, "seed": seed, "sizes": sizes, "out": str(out),
                "gbt": params}
    _echo_resolved(resolved)

    frame = panel_mod.read_panel_csv(panel_path)
    if sizes:
        frame = panel_mod.filter_size(frame, _parse_sizes(sizes))
    train, _test = _split_panel(frame, args, config)
    cols = panel_mod.feature_columns(train, spec)
    y = train[_target_column(target)].to_numpy()
    model = GradientBoostedTrees(**params)
    model.fit(train[cols], y)
    model.save(_out_path(str(out)))
    log.info("trained on %d rows x %d features", len(train), len(cols))
    return 0


def _predictions_frame(model, frame: pd.DataFrame, target: str) -> pd.DataFrame:
    cols = model.feature_names_
    missing = [c for c in cols if c not in frame.columns]
    if missing:
        raise DataError(f"panel lacks model features {missing}")
    pred = model.predict(frame[cols])
    return pd.DataFrame(
        {
            "port_id": frame["port_id"].to_numpy(),
            "year_month": frame["year_month"].to_numpy(),
            "actual": frame[_target_column(target)].to_numpy(),
            "predicted": pred,
        }
    )


def cmd_predict(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    panel_path = _require_path(_resolve(args, config, "panel"), "panel csv")
    model_path = _require_path(_resolve(args, config, "model"), "model json")
    target = _resolve(args, config, "target", "value")
    out = _resolve(args, config, "out", "predictions.csv")
    _echo_resolved({"cmd": "predict", "panel": str(panel_path),
                    "model": str(model_path), "target": target, "out": str(out)})
    frame = panel_mod.read_panel_csv(panel_path)
    model = GradientBoostedTrees.load(model_path)
    preds = _predictions_frame(model, frame, target)
    preds.to_csv(_out_path(str(out)), index=False)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    target = _resolve(args, config, "target", "value")
    out_dir = Path(_resolve(args, config, "out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    predictions_path = _resolve(args, config, "predictions")

    if predictions_path:
        preds = pd.read_csv(
            _require_path(predictions_path, "predictions csv"),
            dtype={"port_id": str, "year_month": str},
        )
        spec = _resolve(args, config, "spec", "precomputed")
        importance: dict[str, float] = {}
        _echo_resolved({"cmd": "eval", "predictions": str(predictions_path),
                        "target": target, "out_dir": str(out_dir)})
    else:
        panel_path = _require_path(_resolve(args, config, "panel"), "panel csv")
        model_path = _require_path(_resolve(args, config, "model"), "model json")
        spec = panel_mod.normalize_spec(_resolve(args, config, "spec", "sat+port"))
        sizes = _resolve(args, config, "sizes")
        _echo_resolved({"cmd": "eval", "panel": str(panel_path),
                        "model": str(model_path), "spec": spec, "target": target,
                        "sizes": sizes, "out_dir": str(out_dir)})
        frame = panel_mod.read_panel_csv(panel_path)
        if sizes:
            frame = panel_mod.filter_size(frame, _parse_sizes(sizes))
        _train, test = _split_panel(frame, args, config)
        model = GradientBoostedTrees.load(model_path)
        preds = _predictions_frame(model, test, target)
        importance = model.gain_importance()

    report = evaluation.build_report(
        spec_label=str(spec),
        target_label=target,
        actual=preds["actual"],
        predicted=preds["predicted"],
        importance=importance,
    )
    report.save(out_dir / "report.json")
    series = evaluation.aggregate_timeseries(
        preds["year_month"], preds["actual"], preds["predicted"]
    )
    series.to_csv(out_dir / "aggregate_timeseries.csv", index=False)
    print(report.to_json())
    return 0


def cmd_placebo(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    panel_path = _require_path(_resolve(args, config, "panel"), "panel csv")
    seed = int(_resolve(args, config, "seed", 0))
    out = _resolve(args, config, "out", "placebo_panel.csv")
    columns = _resolve(args, config, "columns")
    _echo_resolved({"cmd": "placebo", "panel": str(panel_path), "seed": seed,
                    "columns": columns, "out": str(out)})
    frame = panel_mod.read_panel_csv(panel_path)
    cols = _parse_sizes(columns) if columns else [
        c for c in panel_mod.SAT_FEATURES if c in frame.columns
    ]
    shuffled = evaluation.placebo_shuffle(frame, cols, seed)
    panel_mod.write_panel_csv(shuffled, _out_path(str(out)))
    return 0


def cmd_extrap(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    panel_path = _require_path(_resolve(args, config, "panel"), "panel csv")
    model_path = _require_path(_resolve(args, config, "model"), "model json")
    target = _resolve(args, config, "target", "value")
    cutoff = _resolve(args, config, "cutoff", "2022-02")
    pre_from = _resolve(args, config, "pre_from")
    pre_to = _resolve(args, config, "pre_to", add_months(cutoff, -1))
    post_from = _resolve(args, config, "post_from", add_months(cutoff, 1))
    post_to = _resolve(args, config, "post_to")
    min_coverage = float(_resolve(args, config, "min_coverage", 0.8))
    out_dir = Path(_resolve(args, config, "out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_resolved({"cmd": "extrap", "panel": str(panel_path), "model": str(model_path),
                    "target": target, "cutoff": cutoff, "pre_from": pre_from,
                    "pre_to": pre_to, "post_from": post_from, "post_to": post_to,
                    "min_coverage": min_coverage, "out_dir": str(out_dir)})

    frame = panel_mod.read_panel_csv(panel_path)
    frame = panel_mod.filter_coverage(frame, min_coverage)
    model = GradientBoostedTrees.load(model_path)
    preds = _predictions_frame(model, frame, target)

    anchored = extrap.anchor_panel(preds)
    extrap.anchored_frame(anchored).to_csv(out_dir / "anchored.csv", index=False)

    estimates = []
    for port_id, group in preds.groupby("port_id", sort=True):
        group = group.sort_values("year_month")
        est = extrap.pct_change_window(
            group["year_month"].tolist(),
            group["predicted"].to_numpy(),
            cutoff=cutoff,
            pre_window=(pre_from, pre_to),
            post_window=(post_from, post_to),
            port_id=str(port_id),
        )
        estimates.append(est)
        log.info(
            "port %s: delta_log=%.4f pct=%.2f pct_ratio=%.2f",
            port_id, est.delta_log, est.pct, est.pct_ratio,
        )
    extrap.changes_frame(estimates).to_csv(out_dir / "changes.csv", index=False)
    return 0


def cmd_mc(args: argparse.Namespace) -> int:
    config_path = getattr(args, "config", None)
    if config_path:
        mc_config = mc.McConfig.load(_require_path(config_path, "mc config"))
    else:
        mc_config = mc.McConfig()
    if getattr(args, "reps", None) is not None:
        mc_config.n_reps = int(args.reps)
    if getattr(args, "seed", None) is not None:
        mc_config.master_seed = int(args.seed)
    jobs = int(getattr(args, "jobs", None) or os.cpu_count() or 1)
    out = getattr(args, "out", None) or "mc_results.csv"
    _echo_resolved({"cmd": "mc", "config": json.loads(mc_config.to_json()),
                    "jobs": jobs, "out": str(out)})
    result = mc.run_mc(mc_config, jobs=jobs)
    result.save_csv(_out_path(str(out)))
    print(mc.summary_table(result))
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seatrade",
        description="Satellite port-activity features and trade nowcasting pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its entries")
        p.add_argument("--seed", type=int, help="seed for all randomness")

    p = sub.add_parser("extract", help="reduce raster stacks to monthly features")
    add_common(p)
    p.add_argument("--raster-root", dest="raster_root")
    p.add_argument("--out")
    p.add_argument("--tau", type=float, help="lit-area radiance threshold")
    p.add_argument("--ntl-std-mode", dest="ntl_std_mode", choices=["spatial", "temporal"])
    p.add_argument("--jobs", type=int, help="worker threads for extraction")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("panel", help="assemble the port-month panel")
    add_common(p)
    p.add_argument("--features")
    p.add_argument("--wpi")
    p.add_argument("--trade")
    p.add_argument("--spec", choices=sorted(set(panel_mod.SPEC_ALIASES)))
    p.add_argument("--sizes", help="comma-separated harbor sizes to keep")
    p.add_argument("--out")
    p.set_defaults(func=cmd_panel)

    def add_split_flags(p):
        p.add_argument("--train-frac", dest="train_frac", type=float)
        p.add_argument("--leave-out-region", dest="leave_out_region")
        p.add_argument("--sizes", help="comma-separated harbor sizes to keep")

    p = sub.add_parser("train", help="fit the boosted-tree model")
    add_common(p)
    p.add_argument("--panel")
    p.add_argument("--spec", choices=sorted(set(panel_mod.SPEC_ALIASES)))
    p.add_argument("--target", choices=["value", "weight"])
    add_split_flags(p)
    p.add_argument("--out")
    p.add_argument("--n-rounds", dest="n_rounds", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--min-child-weight", dest="min_child_weight", type=float)
    p.add_argument("--l2-reg", dest="l2_reg", type=float)
    p.add_argument("--subsample-rows", dest="subsample_rows", type=float)
    p.add_argument("--subsample-cols", dest="subsample_cols", type=float)
    p.add_argument("--n-bins", dest="n_bins", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict panel rows with a saved model")
    add_common(p)
    p.add_argument("--panel")
    p.add_argument("--model")
    p.add_argument("--target", choices=["value", "weight"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="evaluate a model or a predictions file")
    add_common(p)
    p.add_argument("--panel")
    p.add_argument("--model")
    p.add_argument("--predictions", help="CSV with actual and predicted columns")
    p.add_argument("--spec", choices=sorted(set(panel_mod.SPEC_ALIASES)))
    p.add_argument("--target", choices=["value", "weight"])
    add_split_flags(p)
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("placebo", help="shuffle the satellite block of a panel")
    add_common(p)
    p.add_argument("--panel")
    p.add_argument("--columns", help="comma-separated columns to shuffle")
    p.add_argument("--out")
    p.set_defaults(func=cmd_placebo)

    p = sub.add_parser("extrap", help="anchored series and pre/post changes")
    add_common(p)
    p.add_argument("--panel")
    p.add_argument("--model")
    p.add_argument("--target", choices=["value", "weight"])
    p.add_argument("--cutoff")
    p.add_argument("--pre-from", dest="pre_from")
    p.add_argument("--pre-to", dest="pre_to")
    p.add_argument("--post-from", dest="post_from")
    p.add_argument("--post-to", dest="post_to")
    p.add_argument("--min-coverage", dest="min_coverage", type=float)
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_extrap)

    p = sub.add_parser("mc", help="run the fixed-effect Monte Carlo study")
    add_common(p)
    p.add_argument("--reps", type=int, help="override replication count")
    p.add_argument("--jobs", type=int, help="parallel workers for replications")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mc)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, SeatradeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
