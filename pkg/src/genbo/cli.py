"""Command-line front end: ``run``, ``analyze``, ``emit-plot-data`` and ``validate``.

Configs are JSON files; ``--set key=value`` overrides a dotted key, with the
value parsed as JSON when possible (``--set budget=30``, ``--set
surface.synthetic.seed=3``) and kept as a string otherwise.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .aggregation import DATASET_THRESHOLDS, AggregationSpec
from .benchmarks import (
    SPLIT_METHODS,
    SplitSpec,
    load_surface,
    split_tasks,
    synthetic_surface,
    transferability_sweep,
)
from .campaign import (
    CampaignSettings,
    aggregate_runs,
    run_many,
    write_csv,
    write_summary,
    write_trajectory,
)
from .core import GeneralityProblem, GenboError, LookupSurface
from .strategies import StrategySpec, parse_strategy

log = logging.getLogger("genbo")

PLOT_COLUMNS = ("strategy", "evals_used", "mean_gap", "sem_gap")
SWEEP_COLUMNS = ("method", "n_train", "split_seed", "score", "rho_per_method")
CONFIG_KEYS = {
    "surface", "aggregation", "strategies", "w_mode", "seeds", "seed0", "n_seeds", "budget",
    "n_init", "train_tasks", "out", "jobs", "samples", "analyze",
}


class ConfigError(GenboError, ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class CampaignConfig:
    surface: LookupSurface
    aggregation: AggregationSpec
    strategies: tuple[StrategySpec, ...]
    seeds: tuple[int, ...]
    budget: int
    n_init: int
    train_ids: tuple[str, ...]
    out: Path
    jobs: int
    settings: CampaignSettings

    def problem(self) -> GeneralityProblem:
        return GeneralityProblem.from_surface(self.surface, self.aggregation, self.budget,
                                              list(self.train_ids))


# ---------------------------------------------------------------- config parsing

def read_config(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return raw


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Return a copy of ``raw`` with each ``a.b.c=value`` override applied."""
    out = copy.deepcopy(raw)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            parsed: Any = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"--set {key}: {part!r} is not an object")
            node = child
        node[parts[-1]] = parsed
    return out


def _field(raw: dict, key: str, kind, default=None, where: str = ""):
    value = raw.get(key, default)
    name = f"{where}{key}"
    if value is None:
        raise ConfigError(f"missing field {name!r}")
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"field {name!r} must be an integer, got {value!r}")
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"field {name!r} must be a number, got {value!r}")
        value = float(value)
    if kind in (str, list, dict) and not isinstance(value, kind):
        raise ConfigError(f"field {name!r} must be a {kind.__name__}, got {value!r}")
    return value


def build_surface(raw: dict, base: Path | None = None) -> LookupSurface:
    spec = raw.get("surface")
    if isinstance(spec, str):
        spec = {"path": spec}
    if not isinstance(spec, dict):
        raise ConfigError("field 'surface' must be a path or an object")
    if "path" in spec:
        path = Path(spec["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise ConfigError(f"surface file not found: {path}")
        return load_surface(path)
    syn = spec.get("synthetic")
    if not isinstance(syn, dict):
        raise ConfigError("field 'surface' needs 'path' or 'synthetic'")
    known = {"seed", "n_x", "n_w", "needle_fraction", "noise_scale", "n_bits", "density"}
    extra = sorted(set(syn) - known)
    if extra:
        raise ConfigError(f"unknown fields in 'surface.synthetic': {extra}")
    try:
        return synthetic_surface(**syn)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"surface.synthetic: {exc}") from None


def build_aggregation(raw: dict) -> AggregationSpec:
    spec = raw.get("aggregation", {"kind": "mean"})
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, dict):
        raise ConfigError("field 'aggregation' must be a kind name or an object")
    spec = dict(spec)
    dataset = spec.pop("dataset", None)
    if dataset is not None:
        if dataset not in DATASET_THRESHOLDS:
            raise ConfigError(f"aggregation.dataset: unknown dataset {dataset!r}; known: "
                              f"{sorted(DATASET_THRESHOLDS)}")
        spec.setdefault("threshold", DATASET_THRESHOLDS[dataset])
    try:
        return AggregationSpec(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"aggregation: {exc}") from None


def build_train_ids(raw: dict, surface: LookupSurface) -> list[str]:
    spec = raw.get("train_tasks")
    if spec is None:
        return surface.w_ids
    if isinstance(spec, list):
        for w in spec:
            if w not in surface.w_ids:
                raise ConfigError(f"train_tasks: unknown task id {w!r}")
        if len(set(spec)) != len(spec) or not spec:
            raise ConfigError("train_tasks: ids must be non-empty and unique")
        return list(spec)
    if not isinstance(spec, dict):
        raise ConfigError("field 'train_tasks' must be an id list or an object")
    n = _field(spec, "n_train", int, where="train_tasks.")
    method = _field(spec, "method", str, "random", where="train_tasks.")
    seed = _field(spec, "seed", int, 0, where="train_tasks.")
    try:
        train, _ = split_tasks(surface.task_points, SplitSpec(n, method, seed))
    except ValueError as exc:
        raise ConfigError(f"train_tasks: {exc}") from None
    return [t.id for t in train]


def build_seeds(raw: dict, seed0: int | None = None, n_seeds: int | None = None) -> list[int]:
    if seed0 is not None or n_seeds is not None:
        start = seed0 if seed0 is not None else _field(raw, "seed0", int, 0)
        count = n_seeds if n_seeds is not None else _field(raw, "n_seeds", int, 1)
        seeds = list(range(start, start + count))
    elif "seeds" in raw:
        seeds = _field(raw, "seeds", list)
        if any(isinstance(s, bool) or not isinstance(s, int) for s in seeds):
            raise ConfigError("field 'seeds' must list integers")
    else:
        start = _field(raw, "seed0", int, 0)
        seeds = list(range(start, start + _field(raw, "n_seeds", int, 1)))
    if not seeds:
        raise ConfigError("at least one seed is required")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be unique")
    return seeds


def build_config(raw: dict, base: Path | None = None, *, out: str | None = None,
                 jobs: int | None = None, seed0: int | None = None,
                 n_seeds: int | None = None, w_mode: str | None = None) -> CampaignConfig:
    unknown = sorted(set(raw) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config fields: {unknown}")
    names = _field(raw, "strategies", list)
    if not names:
        raise ConfigError("at least one strategy is required")
    mode = w_mode if w_mode is not None else raw.get("w_mode")
    try:
        strategies = tuple(parse_strategy(str(n), mode) for n in names)
    except ValueError as exc:
        raise ConfigError(f"strategies: {exc}") from None
    labels = [s.label for s in strategies]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"strategies: duplicate entries in {labels}")
    budget = _field(raw, "budget", int)
    n_init = _field(raw, "n_init", int, 2)
    if n_init < 0:
        raise ConfigError("field 'n_init' must be non-negative")
    if budget <= n_init:
        raise ConfigError(f"field 'budget' ({budget}) must exceed n_init ({n_init})")
    samples = _field(raw, "samples", dict, {})
    settings = CampaignSettings(
        n_init=n_init,
        m_outer=_field(samples, "outer", int, CampaignSettings.m_outer, "samples."),
        m_fantasy=_field(samples, "fantasy", int, CampaignSettings.m_fantasy, "samples."),
        m_inner=_field(samples, "inner", int, CampaignSettings.m_inner, "samples."),
    )
    seeds = build_seeds(raw, seed0, n_seeds)
    surface = build_surface(raw, base)
    aggregation = build_aggregation(raw)
    train_ids = build_train_ids(raw, surface)
    for s in strategies:
        if s.w_mode.kind == "single" and s.w_mode.task not in train_ids:
            raise ConfigError(f"w_mode: task {s.w_mode.task!r} is not a train task")
    n_jobs = jobs if jobs is not None else raw.get("jobs")
    if n_jobs is None:
        n_jobs = os.cpu_count() or 1
    if isinstance(n_jobs, bool) or not isinstance(n_jobs, int) or n_jobs < 1:
        raise ConfigError(f"field 'jobs' must be a positive integer, got {n_jobs!r}")
    n_jobs = min(n_jobs, len(seeds) * len(strategies))
    out_dir = Path(out if out is not None else raw.get("out", "genbo-out"))
    config = CampaignConfig(surface, aggregation, strategies, tuple(seeds), budget, n_init,
                            tuple(train_ids), out_dir, n_jobs, settings)
    try:
        config.problem()
    except (GenboError, ValueError, KeyError) as exc:
        raise ConfigError(f"problem: {exc}") from None
    return config


def _load(args) -> tuple[dict, Path | None]:
    if args.config is None:
        raw, base = {}, None
    else:
        raw, base = read_config(args.config), Path(args.config).resolve().parent
    return apply_overrides(raw, args.set or []), base


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------- subcommands

def _trajectory_name(label: str, seed: int) -> str:
    safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in label)
    return f"{safe}_seed{seed}.csv"


def cmd_run(args) -> int:
    raw, base = _load(args)
    config = build_config(raw, base, out=args.out, jobs=args.jobs, seed0=args.seed0,
                          n_seeds=args.n_seeds, w_mode=args.w_mode)
    problem = config.problem()
    log.info("running %d strategies x %d seeds on %d x %d", len(config.strategies),
             len(config.seeds), problem.n_x, problem.n_w)
    runs = run_many(problem, config.strategies, config.seeds, config.settings, config.jobs)
    traj_dir = config.out / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    failed = [t for t in runs if t.error is not None]
    for t in runs:
        if t.error is None:
            write_trajectory(t, traj_dir / _trajectory_name(t.strategy, t.seed))
    summary = aggregate_runs(runs)
    write_summary(summary, config.out / "summary.csv")

    print(f"{'strategy':<28} {'evals':>5} {'mean GAP':>9} {'sem':>7} {'n':>3}")
    for label in (s.label for s in config.strategies):
        rows = [r for r in summary if r.strategy == label]
        if rows:
            r = rows[-1]
            print(f"{label:<28} {r.evals_used:>5} {r.mean_gap:>9.4f} {r.sem_gap:>7.4f} {r.n_seeds:>3}")
    for t in failed:
        print(f"error: {t.strategy} seed {t.seed}: {t.error}", file=sys.stderr)
    return 1 if failed else 0


def cmd_analyze(args) -> int:
    raw, base = _load(args)
    surface = build_surface(raw, base)
    aggregation = build_aggregation(raw)
    spec = _field(raw, "analyze", dict, {})
    sizes = _field(spec, "sizes", list, [1, 2, 4, 6], "analyze.")
    methods = _field(spec, "methods", list, list(SPLIT_METHODS), "analyze.")
    for m in methods:
        if m not in SPLIT_METHODS:
            raise ConfigError(f"analyze.methods: unknown method {m!r}; expected one of "
                              f"{{{', '.join(SPLIT_METHODS)}}}")
    if any(isinstance(s, bool) or not isinstance(s, int) for s in sizes):
        raise ConfigError("analyze.sizes must list integers")
    n_splits = _field(spec, "n_splits", int, 30, "analyze.")
    if args.n_seeds is not None:
        n_splits = args.n_seeds
    seed0 = args.seed0 if args.seed0 is not None else _field(spec, "seed0", int, 0, "analyze.")
    test_fraction = _field(spec, "test_fraction", float, 0.5, "analyze.")
    try:
        result = transferability_sweep(surface, sizes, aggregation, n_splits, methods,
                                       test_fraction, seed0)
    except ValueError as exc:
        raise ConfigError(f"analyze: {exc}") from None
    out = Path(args.out if args.out is not None else raw.get("out", "genbo-out"))
    out.mkdir(parents=True, exist_ok=True)
    rows = [(m, n, s, _fmt(score), _fmt(result.rho[m])) for m, n, s, score in result.rows]
    rows += [(m, "all", "summary", "", _fmt(result.rho[m])) for m in methods]
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    write_csv(out / "sweep_summary.csv", ("method", "n_train", "mean_score", "sem_score", "n_splits"),
              [(m, n, _fmt(mean), _fmt(sem), k) for m, n, mean, sem, k in result.summary])
    print(f"{'method':<8} {'n_train':>7} {'mean':>7} {'sem':>7}")
    for m, n, mean, sem, _ in result.summary:
        print(f"{m:<8} {n:>7} {mean:>7.4f} {sem:>7.4f}")
    for m in methods:
        print(f"spearman rho [{m}] = {result.rho[m]:.4f}")
    return 0


def read_summary(path: str | Path) -> list[tuple[str, int, float, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in PLOT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ConfigError(f"{path}: missing columns {missing}")
        try:
            return [(r["strategy"], int(r["evals_used"]), float(r["mean_gap"]), float(r["sem_gap"]))
                    for r in reader]
        except ValueError as exc:
            raise ConfigError(f"{path}:{reader.line_num}: {exc}") from None


def emit_plot_data(paths: Sequence[str | Path], out: str | Path) -> int:
    """Concatenate summary files into one long-format table; returns the row count."""
    owner: dict[str, str] = {}
    rows = []
    for path in paths:
        for strategy, evals, mean, sem in read_summary(path):
            if strategy in owner and owner[strategy] != str(path):
                raise ConfigError(f"strategy {strategy!r} appears in both {owner[strategy]} and "
                                  f"{path}; rename one of them")
            owner[strategy] = str(path)
            rows.append((strategy, evals, _fmt(mean), _fmt(sem)))
    write_csv(out, PLOT_COLUMNS, rows)
    return len(rows)


def cmd_emit_plot_data(args) -> int:
    out = Path(args.out if args.out is not None else "plot_data.csv")
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    n = emit_plot_data(args.summaries, out)
    print(f"wrote {n} rows to {out}")
    return 0


def cmd_validate(args) -> int:
    raw, base = _load(args)
    if "strategies" in raw:
        config = build_config(raw, base, out=args.out, jobs=args.jobs, seed0=args.seed0,
                              n_seeds=args.n_seeds, w_mode=args.w_mode)
        surface = config.surface
        print(f"config ok: {len(config.strategies)} strategies x {len(config.seeds)} seeds, "
              f"budget {config.budget}, {len(config.train_ids)} train tasks")
    else:
        surface = build_surface(raw, base)
        build_aggregation(raw)
    print(f"surface ok: {len(surface.x_ids)} parameter points x {len(surface.w_ids)} tasks")
    return 0


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="genbo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a (dotted) config key; repeatable")
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, help="parallel worker processes")
        p.add_argument("--seed0", type=int, help="first seed")
        p.add_argument("--n-seeds", type=int, help="number of consecutive seeds")
        p.add_argument("--w-mode", help="adaptive, complete or single:<task id>")

    p = sub.add_parser("run", help="run strategy campaigns across seeds")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("analyze", help="transferability sweep over train-set sizes")
    common(p)
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("validate", help="check a config and its surface without running")
    common(p)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("emit-plot-data", help="merge summary CSVs into long format")
    p.add_argument("summaries", nargs="*", help="summary.csv files")
    p.add_argument("--out", help="output CSV path (default plot_data.csv)")
    p.set_defaults(func=cmd_emit_plot_data)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GenboError, ValueError, KeyError, OSError) as exc:
        print(f"genbo {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
