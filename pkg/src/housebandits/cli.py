"""Command-line interface.

Subcommands: gen (write an instance file), run (single seeded episode),
mc (Monte Carlo aggregate over seeds), mechanisms (offline matching on
an instance file), bounds (closed-form regret curves). Exit codes: 0
success, 2 invalid input, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .decentralized import entry_round_bound
from .errors import ConfigInvalidError, InputError, RuntimeFailure
from .harness import (
    ExperimentConfig,
    default_checkpoints,
    export,
    monte_carlo,
    run_episode,
    theoretical_bounds,
)
from .instances import GENERATOR_FAMILIES, GeneratorConfig, generate
from .market import (
    MAX_ORACLE_N,
    MarketInstance,
    core_oracle_bruteforce,
    load_instance,
    save_instance,
    save_matching,
    ttc,
    yrmh_igyt,
)


def parse_seeds(text: str) -> tuple[int, ...]:
    """Comma-separated seeds; an a:b item expands to range(a, b)."""
    seeds: list[int] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            lo_text, hi_text = item.split(":", 1)
            try:
                lo, hi = int(lo_text), int(hi_text)
            except ValueError as exc:
                raise ConfigInvalidError(f"bad seed range {item!r}") from exc
            if hi <= lo:
                raise ConfigInvalidError(f"empty seed range {item!r}")
            seeds.extend(range(lo, hi))
        else:
            try:
                seeds.append(int(item))
            except ValueError as exc:
                raise ConfigInvalidError(f"bad seed {item!r}") from exc
    if not seeds:
        raise ConfigInvalidError(f"no seeds in {text!r}")
    return tuple(seeds)


def parse_checkpoints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(item) for item in text.split(",") if item.strip())
    except ValueError as exc:
        raise ConfigInvalidError(f"bad checkpoint list {text!r}") from exc


def _read_instance(path: str) -> MarketInstance:
    try:
        return load_instance(path)
    except OSError as exc:
        raise ConfigInvalidError(f"cannot read instance {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalidError(f"instance {path} is not valid JSON: {exc}") from exc


def _read_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigInvalidError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalidError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalidError(f"config {path} must hold a JSON object")
    return data


_CONFIG_KEYS = {
    "instance",
    "algorithm",
    "horizon",
    "seeds",
    "reward_family",
    "trace",
    "checkpoints",
    "instance_id",
}


def build_experiment(args: argparse.Namespace, need_many_seeds: bool) -> ExperimentConfig:
    """Merge an optional JSON config file with CLI flags; explicit
    flags win over config values."""
    raw: dict = {}
    if args.config:
        raw = _read_config_file(args.config)
        unknown = set(raw) - _CONFIG_KEYS
        if unknown:
            raise ConfigInvalidError(f"unknown config keys: {sorted(unknown)}")
    instance_path = args.instance or raw.get("instance")
    if not instance_path:
        raise ConfigInvalidError("an instance file is required (--instance or config)")
    algorithm = args.algo or raw.get("algorithm")
    if not algorithm:
        raise ConfigInvalidError("an algorithm is required (--algo or config)")
    horizon = args.horizon if args.horizon is not None else raw.get("horizon")
    if horizon is None:
        raise ConfigInvalidError("a horizon is required (--horizon or config)")
    if args.seeds is not None:
        seeds = parse_seeds(args.seeds)
    elif "seeds" in raw:
        seeds_raw = raw["seeds"]
        if not isinstance(seeds_raw, list) or not all(isinstance(s, int) for s in seeds_raw):
            raise ConfigInvalidError("config seeds must be a list of integers")
        seeds = tuple(seeds_raw)
    else:
        raise ConfigInvalidError("seeds are required (--seeds or config)")
    if need_many_seeds and len(seeds) < 2:
        raise ConfigInvalidError("mc needs at least 2 seeds")
    if not need_many_seeds and len(seeds) != 1:
        raise ConfigInvalidError("run takes exactly one seed")
    if args.checkpoints is not None:
        checkpoints = parse_checkpoints(args.checkpoints)
    elif "checkpoints" in raw:
        checkpoints = tuple(raw["checkpoints"])
    else:
        checkpoints = None
    family = args.family or raw.get("reward_family")
    trace = bool(args.trace) or bool(raw.get("trace"))
    instance = _read_instance(instance_path)
    return ExperimentConfig(
        instance=instance,
        algorithm=algorithm,
        horizon=int(horizon),
        seeds=seeds,
        reward_family=family,
        trace=trace,
        checkpoints=checkpoints,
        instance_id=raw.get("instance_id", Path(instance_path).stem),
    )


def cmd_gen(args: argparse.Namespace) -> int:
    config = GeneratorConfig(
        family=args.family,
        n=args.n,
        delta_floor=args.delta_floor,
        delta=args.delta,
        distinguished=args.distinguished,
        seed=args.seed,
        reward_model=args.reward_model,
    )
    instance = generate(config)
    try:
        save_instance(instance, args.out)
    except OSError as exc:
        raise ConfigInvalidError(f"cannot write {args.out}: {exc}") from exc
    core = [a + 1 for a in instance.core.assignment]
    print(f"wrote {args.out}: n={instance.n} core={core} min_gap={instance.min_gap:.6g}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = build_experiment(args, need_many_seeds=False)
    trace = run_episode(config, config.seeds[0])
    for i in range(config.instance.n):
        print(
            f"player {i + 1}: pseudo_regret={trace.final_pseudo[i]:.6g} "
            f"realized_regret={trace.final_realized[i]:.6g}"
        )
    if trace.stats:
        print(f"stats: {json.dumps(trace.stats, sort_keys=True)}")
    if args.trace:
        _write_trace(trace, args.trace)
        print(f"trace written to {args.trace}")
    if args.snapshots:
        if trace.player_snapshots is None:
            raise ConfigInvalidError("player snapshots are only produced by decentralized-etc")
        try:
            with open(args.snapshots, "w", encoding="utf-8") as fh:
                json.dump({"players": trace.player_snapshots}, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise ConfigInvalidError(f"cannot write {args.snapshots}: {exc}") from exc
        print(f"snapshots written to {args.snapshots}")
    return 0


def _write_trace(trace, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(trace.trace_columns) + "\n")
            for row in trace.trace_rows:
                fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
                fh.write("\n")
    except OSError as exc:
        raise ConfigInvalidError(f"cannot write {path}: {exc}") from exc


def cmd_mc(args: argparse.Namespace) -> int:
    config = build_experiment(args, need_many_seeds=True)
    report = monte_carlo(config)
    csv_path = args.out + ".csv"
    json_path = args.out + ".json"
    export(report, csv_path, json_path)
    print(f"wrote {csv_path} and {json_path}")
    last = len(report.checkpoints) - 1
    if last >= 0:
        t = report.checkpoints[last]
        for i in range(report.n):
            print(
                f"player {i + 1} @ t={t}: mean={report.mean_regret[last][i]:.6g} "
                f"stderr={report.stderr[last][i]:.6g} bound={report.bounds[last][i]:.6g}"
            )
    return 0


def cmd_mechanisms(args: argparse.Namespace) -> int:
    instance = _read_instance(args.instance)
    matching = instance.core
    print(f"core matching: {[a + 1 for a in matching.assignment]}")
    result = yrmh_igyt(instance.rankings)
    agrees = result.matching == matching
    print(
        f"serial mechanism: epochs={result.epochs} rounds={result.rounds} "
        f"agrees={'yes' if agrees else 'no'}"
    )
    if not agrees:
        raise RuntimeFailure("serial mechanism disagrees with the trading-cycle matching")
    if instance.n <= MAX_ORACLE_N:
        oracle = core_oracle_bruteforce(instance.utilities)
        verified = oracle == matching
        print(f"exhaustive verification: {'unique core confirmed' if verified else 'MISMATCH'}")
        if not verified:
            raise RuntimeFailure("exhaustive oracle disagrees with the mechanism output")
    else:
        print(f"exhaustive verification: skipped (n > {MAX_ORACLE_N})")
    if args.out:
        try:
            save_matching(matching, args.out)
        except OSError as exc:
            raise ConfigInvalidError(f"cannot write {args.out}: {exc}") from exc
        print(f"matching written to {args.out}")
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    instance = _read_instance(args.instance)
    checkpoints = (
        parse_checkpoints(args.checkpoints)
        if args.checkpoints
        else default_checkpoints(args.horizon)
    )
    if not checkpoints:
        checkpoints = (args.horizon,)
    print("checkpoint_t,player,bound")
    for t in checkpoints:
        if t > args.horizon:
            raise ConfigInvalidError(f"checkpoint {t} exceeds horizon {args.horizon}")
        values = theoretical_bounds(instance, t, args.algo)
        for i, v in enumerate(values):
            print(f"{t},{i + 1},{v:.6g}")
    if args.algo == "decentralized-etc":
        entry = entry_round_bound(instance.n, args.horizon, instance.min_gap)
        print(f"# worst-case exploitation entry round: {entry}", file=sys.stderr)
    return 0


def _add_experiment_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--instance", help="instance JSON file")
    sub.add_argument(
        "--algo", choices=("decentralized-etc", "centralized-ucb", "oracle-fixed")
    )
    sub.add_argument("--horizon", type=int)
    sub.add_argument("--seeds", help="comma list; a:b expands to range(a, b)")
    sub.add_argument("--checkpoints", help="comma list of snapshot rounds")
    sub.add_argument(
        "--family",
        choices=("gaussian", "bernoulli", "deterministic"),
        help="override the instance's reward family",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="housebandits",
        description="Bandit learning in housing markets: mechanisms, protocols, experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate an instance file")
    gen.add_argument("--family", required=True, choices=GENERATOR_FAMILIES)
    gen.add_argument("--n", required=True, type=int, help="number of players")
    gen.add_argument("--delta-floor", type=float, help="minimum adjacent gap (random family)")
    gen.add_argument("--delta", type=float, help="gap parameter (sttcb / lower-bound)")
    gen.add_argument(
        "--distinguished", type=int, help="1-based distinguished player (lower-bound)"
    )
    gen.add_argument("--seed", type=int, help="generator seed")
    gen.add_argument(
        "--reward-model", default="gaussian", choices=("gaussian", "bernoulli")
    )
    gen.add_argument("--out", required=True, help="output instance JSON path")
    gen.set_defaults(func=cmd_gen)

    run = subs.add_parser("run", help="play one seeded episode")
    _add_experiment_flags(run)
    run.add_argument("--trace", help="write the per-round trace CSV here")
    run.add_argument("--snapshots", help="write per-player protocol state JSON here")
    run.set_defaults(func=cmd_run)

    mc = subs.add_parser("mc", help="Monte Carlo aggregate over seeds")
    _add_experiment_flags(mc)
    mc.add_argument("--trace", action="store_true", help=argparse.SUPPRESS)
    mc.add_argument("--out", required=True, help="output path prefix (.csv/.json appended)")
    mc.set_defaults(func=cmd_mc)

    mech = subs.add_parser("mechanisms", help="offline matching on an instance file")
    mech.add_argument("--instance", required=True)
    mech.add_argument("--out", help="write the core matching JSON here")
    mech.set_defaults(func=cmd_mechanisms)

    bounds = subs.add_parser("bounds", help="print closed-form regret bound curves")
    bounds.add_argument("--instance", required=True)
    bounds.add_argument(
        "--algo",
        required=True,
        choices=("decentralized-etc", "centralized-ucb", "oracle-fixed"),
    )
    bounds.add_argument("--horizon", required=True, type=int)
    bounds.add_argument("--checkpoints", help="comma list of rounds to evaluate")
    bounds.set_defaults(func=cmd_bounds)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeFailure as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
