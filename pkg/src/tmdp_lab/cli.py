"""Command-line front end: run experiments, sweep grids, self-verify."""
from __future__ import annotations

import argparse
import itertools
import os
import re
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .harness import (
    ConfigError,
    ExperimentConfig,
    aggregate_runs,
    apply_override,
    merge_dicts,
    run_experiment,
    write_csv,
)
from .presets import DESCRIPTIONS, preset_config, preset_names
from .verify import run_all_checks

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VERIFY = 3

SEED_ENV_VAR = "TMDP_LAB_SEED"


def _log(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _load_config(args) -> dict:
    if not args.preset and not args.config:
        raise ConfigError("need --preset or --config")
    config: dict = {}
    if args.preset:
        try:
            config = preset_config(args.preset)
        except KeyError:
            raise ConfigError(
                f"unknown preset {args.preset!r}; available: {', '.join(preset_names())}"
            ) from None
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with open(path, "rb") as handle:
            file_config = tomllib.load(handle)
        config = merge_dicts(config, file_config)
    if args.seeds:
        try:
            config["seeds"] = [int(s) for s in args.seeds.split(",")]
        except ValueError:
            raise ConfigError(f"--seeds: expected comma-separated integers, got {args.seeds!r}")
    elif os.environ.get(SEED_ENV_VAR):
        try:
            config["seed_base"] = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer")
    if args.workers:
        config["workers"] = args.workers
    return config


def _output_path(config: ExperimentConfig, args) -> Path:
    if args.out:
        out = Path(args.out)
        if out.suffix == ".csv":
            return out
        return out / f"{config.label or 'run'}.csv"
    if config.out:
        return Path(config.out)
    return Path(f"{config.label or 'run'}.csv")


def _execute(config_dict: dict, args) -> tuple[ExperimentConfig, Path, tuple[float, float]]:
    config = ExperimentConfig.from_dict(config_dict)
    _log(args, f"running {config.label or 'experiment'}: "
               f"{len(config.seeds)} seed(s), "
               f"{config.steps or config.episodes} {config.series}s")
    logs = run_experiment(config)
    summary = aggregate_runs(logs, config.ma_window, config.series)
    path = _output_path(config, args)
    write_csv(summary, path)
    return config, path, summary.final_mean()


def cmd_run(args) -> int:
    config_dict = _load_config(args)
    for assignment in args.set or []:
        apply_override(config_dict, assignment)
    config, path, (mean_dm, mean_opp) = _execute(config_dict, args)
    window = config.ma_window
    print(f"wrote {path}")
    print(f"agent_a mean reward over final {window} {config.series}s: {mean_dm:.4f}")
    print(f"agent_b mean reward over final {window} {config.series}s: {mean_opp:.4f}")
    return EXIT_OK


def _split_sweep_values(text: str) -> list[str]:
    """Split on top-level commas only, so list literals stay intact."""
    parts, depth, current = [], 0, []
    for ch in text:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    return parts


def cmd_sweep(args) -> int:
    base = _load_config(args)
    fixed, grid = [], []
    for assignment in args.set or []:
        path, sep, value = assignment.partition("=")
        if not sep:
            raise ConfigError(f"override {assignment!r}: expected key=value")
        values = _split_sweep_values(value)
        if len(values) == 1:
            fixed.append(assignment)
        else:
            grid.append((path, values))
    if not grid:
        raise ConfigError("sweep needs at least one --set key=v1,v2,... with multiple values")
    for combo in itertools.product(*(values for _, values in grid)):
        config_dict = merge_dicts(base, {})
        for assignment in fixed:
            apply_override(config_dict, assignment)
        tags = []
        for (path, _), value in zip(grid, combo):
            apply_override(config_dict, f"{path}={value}")
            tags.append(f"{path.split('.')[-1]}={value}")
        tag = "_".join(re.sub(r"[^A-Za-z0-9_.=-]", "", t) for t in tags)
        config_dict["label"] = f"{config_dict.get('label', 'sweep') or 'sweep'}_{tag}"
        config, path, (mean_dm, mean_opp) = _execute(config_dict, args)
        print(f"{config.label}: agent_a={mean_dm:.4f} agent_b={mean_opp:.4f} -> {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed
    if seed is None:
        seed = int(os.environ.get(SEED_ENV_VAR, 20260211))
    results = run_all_checks(seed, n_specs=args.cases, inject_gamma=args.inject_gamma)
    for result in results:
        print(result.line())
    if all(r.passed for r in results):
        print(f"all {len(results)} properties hold (master seed {seed})")
        return EXIT_OK
    print("property suite FAILED", file=sys.stderr)
    return EXIT_VERIFY


def cmd_list_presets(args) -> int:
    for name in preset_names():
        print(f"{name:26s} {DESCRIPTIONS.get(name, '')}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmdp-lab",
        description="Opponent-aware tabular Q-learning experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--preset", "-p", help="bundled experiment name")
        p.add_argument("--config", "-c", help="TOML config file")
        p.add_argument("--set", "-s", action="append", metavar="KEY=VALUE",
                       help="override a config field (dotted path); repeatable")
        p.add_argument("--out", "-o", help="output CSV file or directory")
        p.add_argument("--seeds", help="comma-separated seed list")
        p.add_argument("--workers", type=int, help="parallel seed workers")
        p.add_argument("--quiet", "-q", action="store_true", help="suppress progress notes")

    run_p = sub.add_parser("run", help="run one experiment and write its CSV")
    add_common(run_p)
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="grid-sweep overrides, one CSV per combination")
    add_common(sweep_p)
    sweep_p.set_defaults(func=cmd_sweep)

    verify_p = sub.add_parser("verify", help="run the operator/belief property suite")
    verify_p.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV_VAR} or 20260211)")
    verify_p.add_argument("--cases", type=int, default=100, help="random specs per property")
    verify_p.add_argument("--inject-gamma", type=float, help=argparse.SUPPRESS)
    verify_p.add_argument("--quiet", "-q", action="store_true", help=argparse.SUPPRESS)
    verify_p.set_defaults(func=cmd_verify)

    list_p = sub.add_parser("list-presets", help="list bundled experiments")
    list_p.set_defaults(func=cmd_list_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - surface as a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
