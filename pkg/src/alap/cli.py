"""Command-line entry point: ``alap run | aggregate | plot``.

Exit codes: 0 success, 2 usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from alap.harness import (
    ExperimentConfig,
    aggregate_dir,
    aggregates_to_csv,
    atomic_write_text,
    read_aggregate_csv,
    render_curves,
    run_experiment,
    run_path,
)

log = logging.getLogger("alap")

FULL_SEEDS = 20


class UsageError(Exception):
    pass


# key in config file / flag dest -> parser
_FIELDS = {
    "env": str,
    "algo": str,
    "scheme": str,
    "batch": int,
    "episodes": int,
    "capacity": int,
    "alpha": float,
    "beta0": float,
    "epsilon": float,
    "lr": float,
    "gamma": float,
    "target_update_interval": int,
    "tau": float,
    "noise_scale": float,
    "seeds": str,
    "jobs": int,
    "out": str,
}


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _FIELDS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return values


def parse_seeds(text: str) -> list[int]:
    """``"5"`` means seeds 0..4; ``"3,7,11"`` lists them explicitly."""
    text = str(text).strip()
    try:
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        n = int(text)
    except ValueError as exc:
        raise UsageError(f"bad --seeds value {text!r}") from exc
    if n < 1:
        raise UsageError("--seeds must be positive")
    return list(range(n))


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values = parse_config_file(args.config) if args.config else {}
    for key in _FIELDS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    seeds = parse_seeds(values.pop("seeds", "5"))
    if args.full:
        seeds = list(range(FULL_SEEDS))
    kwargs = {k: v for k, v in values.items() if k != "batch"}
    if "batch" in values:
        kwargs["batch_size"] = values["batch"]
    if args.smooth is not None and args.smooth < 1:
        raise UsageError("--smooth must be >= 1")
    try:
        return ExperimentConfig(seeds=seeds, **kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def cmd_run(args) -> int:
    config = build_config(args)
    log.info("running %s with seeds %s", config.group, config.seeds)
    records = run_experiment(config)
    for rec in records:
        tail = rec.returns[-min(20, len(rec.returns)):]
        print(f"{run_path(config.out, config.group, rec.seed)}  "
              f"final-{len(tail)} mean return {sum(tail) / len(tail):.2f}")
    if len(records) >= 2 and args.smooth is not None:
        aggs = aggregate_dir(config.out, args.smooth)
        atomic_write_text(Path(config.out) / "aggregate.csv", aggregates_to_csv(aggs))
    return 0


def cmd_aggregate(args) -> int:
    if args.smooth < 1:
        raise UsageError("--smooth must be >= 1")
    if not Path(args.inp).is_dir():
        raise UsageError(f"--in must be a directory: {args.inp}")
    try:
        aggs = aggregate_dir(args.inp, args.smooth)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    atomic_write_text(args.out, aggregates_to_csv(aggs))
    for a in aggs:
        print(f"{a.group}: {a.runs} runs, {len(a)} episodes, smoothing window {a.window}")
    return 0


def cmd_plot(args) -> int:
    if not Path(args.inp).is_file():
        raise UsageError(f"--in must be an aggregate CSV: {args.inp}")
    aggs = read_aggregate_csv(args.inp)
    if not aggs:
        raise UsageError(f"{args.inp} contains no aggregates")
    render_curves(aggs, args.out, title=args.title, smoothed=not args.raw)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one run per seed and write run CSVs")
    run.add_argument("--config", help="key=value config file; flags override it")
    run.add_argument("--env", choices=["cartpole", "simple"])
    run.add_argument("--algo", choices=["dqn", "ddpg"])
    run.add_argument("--scheme", choices=["uniform", "per", "lap", "alap"])
    run.add_argument("--batch", type=int, choices=[32, 64, 128])
    run.add_argument("--episodes", type=int)
    run.add_argument("--capacity", type=int)
    run.add_argument("--alpha", type=float)
    run.add_argument("--beta0", type=float)
    run.add_argument("--epsilon", type=float, help="priority floor added to |td|")
    run.add_argument("--lr", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--target-update-interval", dest="target_update_interval", type=int)
    run.add_argument("--tau", type=float)
    run.add_argument("--noise-scale", dest="noise_scale", type=float)
    run.add_argument("--seeds", help="count (e.g. 5) or comma list (e.g. 3,7,11)")
    run.add_argument("--full", action="store_true", help=f"use {FULL_SEEDS} seeds")
    run.add_argument("--jobs", type=int, help="parallel worker processes")
    run.add_argument("--smooth", type=int, help="also write <out>/aggregate.csv with this window")
    run.add_argument("--out", help="output directory")
    run.set_defaults(func=cmd_run)

    agg = sub.add_parser("aggregate", help="aggregate run CSVs across seeds")
    agg.add_argument("--in", dest="inp", required=True)
    agg.add_argument("--out", required=True)
    agg.add_argument("--smooth", type=int, default=10, help="moving-average window")
    agg.set_defaults(func=cmd_aggregate)

    plot = sub.add_parser("plot", help="render an aggregate CSV to SVG")
    plot.add_argument("--in", dest="inp", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--title", default="Mean episode return")
    plot.add_argument("--raw", action="store_true", help="plot unsmoothed curves")
    plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"alap: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"alap: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
