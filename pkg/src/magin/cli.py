"""Command-line entry points: ``magin train | eval | sweep | plotdata``.

Run directory layout::

    OUT/config.snapshot      flat TOML, enough to reproduce the run
    OUT/manifest.txt         key = value lines (variant, seed, version, schema)
    OUT/metrics.csv          one row per slot plus one aggregate row (slot = -1) per episode
    OUT/checkpoints/epNNN.ckpt
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import MB, VARIANTS, ConfigError, ScenarioConfig, TrainConfig, dumps_config, load_config
from .mappo import (build_groups, check_compatible, evaluate, load_run_checkpoint, save_run_checkpoint,
                    train)
from .nn import CheckpointError

log = logging.getLogger("magin")

CSV_SCHEMA = "magin-metrics-v1"
METRIC_COLUMNS = ("episode", "slot", "reward_iotd", "reward_uav", "reward_haps", "e_all", "mean_alpha",
                  "mean_f_alloc", "mean_delay", "fairness", "deadline_violations", "queue_violations",
                  "local_violations", "offload_violations", "edge_violations", "boundary_violations", "collisions",
                  "battery_violations")
SUMMARY_COLUMNS = METRIC_COLUMNS[2:]
SWEEP_AXES = {
    # axis: (unit multiplier, config field, collapse to a degenerate range?)
    "task-size": (MB, "task_size", True),
    "local-cpu": (1e9, "f_local", True),
    "n-iotds": (1, "n_iotds", False),
    "n-uavs": (1, "n_uavs", False),
    "bandwidth": (1e6, "bandwidth_uav", True),
    "t-max": (1.0, "t_max", True),
}


class CliError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c, "")) for c in columns])
    path.write_text(buf.getvalue())


def _prepare_out(out) -> Path:
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _configs(args) -> tuple[ScenarioConfig, TrainConfig]:
    try:
        scenario, train_cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        raise CliError(str(exc)) from exc
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "variant", None) is not None:
        overrides["variant"] = args.variant
    if getattr(args, "episodes", None) is not None:
        overrides["episodes"] = args.episodes
    if getattr(args, "checkpoint_every", None) is not None:
        overrides["checkpoint_every"] = args.checkpoint_every
    train_cfg = dataclasses.replace(train_cfg, **overrides)
    try:
        train_cfg.validate()
    except ConfigError as exc:
        raise CliError(str(exc)) from exc
    return scenario, train_cfg


def write_manifest(out: Path, scenario: ScenarioConfig, train_cfg: TrainConfig, variant: str, extra=None) -> None:
    (out / "config.snapshot").write_text(dumps_config(scenario, train_cfg))
    lines = {
        "package": "magin",
        "version": __version__,
        "variant": variant,
        "seed": train_cfg.seed,
        "episodes": train_cfg.episodes,
        "csv_schema": CSV_SCHEMA,
        "config": "config.snapshot",
    }
    lines.update(extra or {})
    (out / "manifest.txt").write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))


def run_training(scenario, train_cfg, out: Path) -> Path:
    """Train and persist a full run directory; returns the final checkpoint path."""
    variant = train_cfg.variant
    write_manifest(out, scenario, train_cfg, variant)
    rows = []

    def record(episode, agg, slot_rows):
        for r in slot_rows:
            rows.append({"episode": episode, **r})
        rows.append({**agg, "episode": episode, "slot": -1})

    result = train(scenario, train_cfg, variant, checkpoint_dir=out / "checkpoints", on_episode=record)
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, rows)
    final = out / "checkpoints" / f"ep{train_cfg.episodes:03d}.ckpt"
    if not final.exists():
        save_run_checkpoint(final, result.groups, scenario, train_cfg, variant, train_cfg.episodes)
    return final


def cmd_train(args) -> int:
    scenario, train_cfg = _configs(args)
    out = _prepare_out(args.out)
    final = run_training(scenario, train_cfg, out)
    print(f"trained {train_cfg.variant} for {train_cfg.episodes} episodes; checkpoint {final}")
    return 0


def _load_checkpoint(path):
    try:
        return load_run_checkpoint(path)
    except (CheckpointError, ConfigError, KeyError) as exc:
        raise CliError(f"cannot load checkpoint {path}: {exc}") from exc


def cmd_eval(args) -> int:
    groups, scenario, train_cfg, variant = _load_checkpoint(args.checkpoint)
    if args.config is not None:
        scenario, _ = _configs(args)
    try:
        summary = evaluate(groups, scenario, args.episodes, seed=args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    row = {"variant": variant, "episodes": args.episodes, "seed": args.seed, **summary}
    columns = ("variant", "episodes", "seed", *SUMMARY_COLUMNS)
    if args.out is None:
        _print_table(columns, [row])
    else:
        out = Path(args.out)
        _prepare_out(out.parent if out.parent != Path("") else Path("."))
        _write_csv(out, columns, [row])
    return 0


def _print_table(columns, rows) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r.get(c, "")) for c in columns])


def scenario_for_point(base: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    if axis not in SWEEP_AXES:
        raise CliError(f"unknown sweep axis '{axis}'; choose from {', '.join(SWEEP_AXES)}")
    scale, name, collapse = SWEEP_AXES[axis]
    if collapse:
        v = float(value) * scale
        new = dataclasses.replace(base, **{name: (v, v)})
    else:
        new = dataclasses.replace(base, **{name: int(value)})
    try:
        new.validate()
    except ConfigError as exc:
        raise CliError(f"grid point {axis}={value}: {exc}") from exc
    return new


def _sweep_point(task):
    axis, value, scenario, train_cfg, mode, checkpoint, episodes, seed, point_dir = task
    point_dir = Path(point_dir)
    point_dir.mkdir(parents=True, exist_ok=True)
    if mode == "checkpoint":
        groups, _, _, variant = load_run_checkpoint(checkpoint)
        write_manifest(point_dir, scenario, train_cfg, variant, {"sweep_axis": axis, "sweep_value": value,
                                                                 "checkpoint": checkpoint})
    elif mode == "train":
        final = run_training(scenario, train_cfg, point_dir)
        groups, _, _, variant = load_run_checkpoint(final)
        with open(point_dir / "manifest.txt", "a") as fh:
            fh.write(f"sweep_axis = {axis}\nsweep_value = {value}\n")
    else:
        variant = train_cfg.variant
        groups = build_groups(scenario, train_cfg, variant)
        write_manifest(point_dir, scenario, train_cfg, variant, {"sweep_axis": axis, "sweep_value": value,
                                                                 "policy": "untrained"})
    check_compatible(groups, scenario)
    summary = evaluate(groups, scenario, episodes, seed=seed)
    return {"axis": axis, "value": value, "variant": variant, **summary}


def cmd_sweep(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise CliError(f"unknown sweep axis '{args.axis}'; choose from {', '.join(SWEEP_AXES)}")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"bad --values list: {args.values}") from exc
    if not values:
        raise CliError("--values must list at least one grid point")
    base, train_cfg = _configs(args)
    out = _prepare_out(args.out)
    mode = "checkpoint" if args.checkpoint else ("train" if train_cfg.episodes > 0 and args.train else "untrained")
    tasks = []
    for i, v in enumerate(values):
        scenario = scenario_for_point(base, args.axis, v)
        tasks.append((args.axis, v, scenario, train_cfg, mode, args.checkpoint, args.eval_episodes, args.seed_eval,
                      str(out / f"point{i:02d}")))
    if args.parallel and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor() as pool:
            rows = list(pool.map(_sweep_point, tasks))  # map keeps grid order
    else:
        rows = []
        for t in tasks:
            try:
                rows.append(_sweep_point(t))
            except (ValueError, CheckpointError) as exc:
                raise CliError(f"grid point {t[0]}={t[1]}: {exc}") from exc
    _write_csv(out / "summary.csv", ("axis", "value", "variant", *SUMMARY_COLUMNS), rows)
    print(f"wrote {len(rows)} grid points to {out / 'summary.csv'}")
    return 0


def cmd_plotdata(args) -> int:
    series = []
    for spec in args.inputs:
        label, _, path = spec.rpartition("=")
        path = Path(path)
        if not path.is_file():
            raise CliError(f"metrics file not found: {path}")
        if not label:
            manifest = path.parent / "manifest.txt"
            label = path.parent.name
            if manifest.is_file():
                for line in manifest.read_text().splitlines():
                    key, _, val = line.partition(" = ")
                    if key == "variant":
                        label = val
        with open(path, newline="") as fh:
            rows = [r for r in csv.DictReader(fh) if r.get("slot") == "-1"]
        if not rows:
            raise CliError(f"no episode rows in {path}")
        metrics = [c for c in METRIC_COLUMNS[2:] if c in rows[0]]
        for r in rows:
            for m in metrics:
                series.append({"series": label, "episode": r["episode"], "metric": m, "value": r[m]})
    out = Path(args.out)
    _prepare_out(out.parent if str(out.parent) else Path("."))
    _write_csv(out, ("series", "episode", "metric", "value"), series)
    print(f"wrote {len(series)} points to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magin", description="UAV/HAPS edge-computing simulator and MAPPO trainer")
    p.add_argument("--version", action="version", version=f"magin {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one variant and write a run directory")
    t.add_argument("--config", help="flat TOML config (defaults used when omitted)")
    t.add_argument("--variant", choices=VARIANTS)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--episodes", type=int)
    t.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint with deterministic actions")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config", help="scenario override (must match the checkpoint's shapes)")
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", help="summary CSV path (stdout when omitted)")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="one summary row per grid point along a scenario axis")
    s.add_argument("--axis", required=True, help=", ".join(SWEEP_AXES))
    s.add_argument("--values", required=True, help="comma-separated grid, in axis units (MB, GHz, count, MHz, s)")
    s.add_argument("--config")
    s.add_argument("--variant", choices=VARIANTS)
    s.add_argument("--seed", type=int, help="training/initialization seed")
    s.add_argument("--checkpoint", help="evaluate this checkpoint at every point")
    s.add_argument("--train", action="store_true", help="train a fresh policy per point (uses --episodes)")
    s.add_argument("--episodes", type=int, help="training episodes per point with --train")
    s.add_argument("--eval-episodes", type=int, default=5, dest="eval_episodes")
    s.add_argument("--seed-eval", type=int, default=0, dest="seed_eval")
    s.add_argument("--parallel", action="store_true", help="run grid points in worker processes")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep, checkpoint_every=None)

    d = sub.add_parser("plotdata", help="tidy long-format series from metrics CSVs")
    d.add_argument("inputs", nargs="+", help="metrics.csv paths, optionally LABEL=PATH")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"magin: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
