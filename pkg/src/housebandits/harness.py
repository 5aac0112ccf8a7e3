"""Experiment harness: seeded episodes, Monte Carlo aggregation over
seeds, closed-form regret bound curves, and report export.

Episodes are strictly sequential round loops; parallelism, when wanted,
belongs at the seed level only (episodes share no mutable state). The
headline metric is cumulative pseudo-regret per player, snapshotted at
log-spaced checkpoints and compared against per-player bound curves.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .centralized import IndexState, platform_round
from .decentralized import DecentralizedPlayer, PlayerView, commit_cascade
from .env import SAMPLING_FAMILIES, TRACE_COLUMNS, MarketEnv, RegretLedger
from .errors import ConfigInvalidError
from .market import MarketInstance

log = logging.getLogger(__name__)

ALGORITHMS = ("decentralized-etc", "centralized-ucb", "oracle-fixed")

DEFAULT_CHECKPOINT_GRID = (100, 1_000, 10_000, 100_000)

CSV_COLUMNS = (
    "algorithm",
    "instance_id",
    "seed_count",
    "player",
    "checkpoint_t",
    "mean_regret",
    "stderr",
    "bound",
)


def default_checkpoints(horizon: int) -> tuple[int, ...]:
    return tuple(c for c in DEFAULT_CHECKPOINT_GRID if 1 <= c <= horizon)


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment: the CLI handles file paths and
    generator configs and passes the loaded instance in here.

    reward_family overrides the instance's family for the run (for
    example a no-noise diagnostic run via "deterministic").
    """

    instance: MarketInstance
    algorithm: str
    horizon: int
    seeds: tuple[int, ...]
    reward_family: str | None = None
    trace: bool = False
    checkpoints: tuple[int, ...] | None = None
    instance_id: str = "instance"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigInvalidError(
                f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}"
            )
        if self.horizon < 1:
            raise ConfigInvalidError(f"horizon must be >= 1, got {self.horizon}")
        if self.algorithm == "decentralized-etc" and self.horizon < 2:
            raise ConfigInvalidError("decentralized-etc needs horizon >= 2")
        if not self.seeds:
            raise ConfigInvalidError("seed list must not be empty")
        if self.reward_family is not None and self.reward_family not in SAMPLING_FAMILIES:
            raise ConfigInvalidError(
                f"unknown reward family {self.reward_family!r}; expected one of {SAMPLING_FAMILIES}"
            )
        cps = self.effective_checkpoints()
        if any(c < 1 or c > self.horizon for c in cps):
            raise ConfigInvalidError(f"checkpoints must lie in [1, horizon], got {cps}")
        if list(cps) != sorted(set(cps)):
            raise ConfigInvalidError(f"checkpoints must be strictly increasing, got {cps}")

    def effective_checkpoints(self) -> tuple[int, ...]:
        if self.checkpoints is not None:
            return self.checkpoints
        return default_checkpoints(self.horizon)


@dataclass
class EpisodeTrace:
    """Result of one seeded episode: regret snapshots plus algorithm
    telemetry (entry round, commit rounds, core-match counters)."""

    algorithm: str
    seed: int
    horizon: int
    checkpoints: tuple[int, ...]
    checkpoint_pseudo: tuple[tuple[float, ...], ...]  # aligned with checkpoints
    final_pseudo: tuple[float, ...]
    final_realized: tuple[float, ...]
    stats: dict = field(default_factory=dict)
    trace_rows: list | None = None
    trace_columns: tuple[str, ...] | None = None
    player_snapshots: list[dict] | None = None


def run_episode(config: ExperimentConfig, seed: int) -> EpisodeTrace:
    """Play one episode to the horizon and collect regret snapshots."""
    instance = config.instance
    horizon = config.horizon
    cps = config.effective_checkpoints()
    cp_set = set(cps)
    env = MarketEnv(instance, seed, family=config.reward_family)
    snaps: dict[int, tuple[float, ...]] = {}
    snapshots = None
    if config.algorithm == "oracle-fixed":
        ledger = RegretLedger(instance, trace=config.trace)
        _run_oracle_fixed(instance, env, ledger, horizon, cp_set, snaps)
        stats = {}
    elif config.algorithm == "centralized-ucb":
        ledger = RegretLedger(instance, trace=config.trace, extra_columns=("matching_is_core",))
        stats = _run_centralized(instance, env, ledger, horizon, cp_set, snaps)
    else:
        ledger = RegretLedger(instance, trace=config.trace)
        stats, snapshots = _run_decentralized(instance, env, ledger, horizon, cp_set, snaps)
    return EpisodeTrace(
        algorithm=config.algorithm,
        seed=seed,
        horizon=horizon,
        checkpoints=cps,
        checkpoint_pseudo=tuple(snaps[c] for c in cps),
        final_pseudo=tuple(ledger.pseudo),
        final_realized=tuple(ledger.realized),
        stats=stats,
        trace_rows=ledger.trace_rows() if config.trace else None,
        trace_columns=TRACE_COLUMNS + ledger.extra_columns if config.trace else None,
        player_snapshots=snapshots,
    )


def _run_oracle_fixed(instance, env, ledger, horizon, cp_set, snaps):
    proposals = list(instance.core.assignment)
    for t in range(1, horizon + 1):
        ledger.record(env.step(proposals))
        if t in cp_set:
            snaps[t] = tuple(ledger.pseudo)


def _run_centralized(instance, env, ledger, horizon, cp_set, snaps):
    n = instance.n
    states = [IndexState(n) for _ in range(n)]
    core = instance.core.assignment
    core_rounds = 0
    core_rounds_second_half = 0
    half = horizon // 2
    for t in range(1, horizon + 1):
        matching, outcome = platform_round(states, t, env)
        is_core = matching.assignment == core
        if is_core:
            core_rounds += 1
            if t > half:
                core_rounds_second_half += 1
        ledger.record(outcome, extra=(int(is_core),) if ledger.trace else ())
        if t in cp_set:
            snaps[t] = tuple(ledger.pseudo)
    return {
        "core_match_rounds": core_rounds,
        "core_match_rounds_second_half": core_rounds_second_half,
        "second_half_rounds": horizon - half,
    }


def _run_decentralized(instance, env, ledger, horizon, cp_set, snaps):
    n = instance.n
    core = instance.core.assignment
    players = [DecentralizedPlayer(i, n, horizon) for i in range(n)]
    flags = [True] * n
    post_commit_core = [0] * n
    post_commit_rounds = [0] * n
    for t in range(1, horizon + 1):
        in_phase2 = players[0].phase == 2
        proposals = [p.action(t, flags) for p in players]
        outcome = env.step(proposals)
        matched = outcome.matched
        rewards = outcome.rewards
        collided = outcome.collided
        for i, p in enumerate(players):
            p.observe(t, PlayerView(matched[i], rewards[i], collided[i], outcome.owner_view(i)))
        if in_phase2:
            # committed pulls and chain requests target disjoint arm sets
            assert not any(collided), f"phase-2 collision at round {t}"
            commit_cascade(players, flags)
        for i, p in enumerate(players):
            if p.committed is not None and t > p.commit_round:
                post_commit_rounds[i] += 1
                if matched[i] == core[i]:
                    post_commit_core[i] += 1
        ledger.record(outcome)
        if t in cp_set:
            snaps[t] = tuple(ledger.pseudo)
    t1 = players[0].t1
    assert all(p.t1 == t1 for p in players), "players disagree on the entry round"
    stats = {
        "entry_round": t1,
        "commit_rounds": [p.commit_round for p in players],
        "committed_arms": [None if p.committed is None else p.committed + 1 for p in players],
        "committed_is_core": [
            p.committed is not None and p.committed == core[i] for i, p in enumerate(players)
        ],
        "post_commit_rounds": post_commit_rounds,
        "post_commit_core_rounds": post_commit_core,
    }
    return stats, [p.snapshot() for p in players]


@dataclass
class AggregateReport:
    """Cross-seed checkpoint statistics plus bound curves."""

    algorithm: str
    instance_id: str
    n: int
    horizon: int
    seeds: tuple[int, ...]
    checkpoints: tuple[int, ...]
    mean_regret: tuple[tuple[float, ...], ...]  # [checkpoint][player]
    stderr: tuple[tuple[float, ...], ...]
    bounds: tuple[tuple[float, ...], ...]
    telemetry: dict = field(default_factory=dict)

    @property
    def seed_count(self) -> int:
        return len(self.seeds)


def monte_carlo(config: ExperimentConfig) -> AggregateReport:
    """Run every seed sequentially and aggregate checkpoint statistics.

    Distinct seeds are fully independent; run them elsewhere in
    parallel if wanted and aggregate equivalently.
    """
    if len(config.seeds) < 2:
        raise ConfigInvalidError("monte_carlo needs at least 2 seeds for error bars")
    traces = [run_episode(config, s) for s in config.seeds]
    cps = config.effective_checkpoints()
    k = len(traces)
    mean_rows = []
    stderr_rows = []
    bound_rows = []
    for ci, cp in enumerate(cps):
        data = np.array([tr.checkpoint_pseudo[ci] for tr in traces])
        mean_rows.append(tuple(float(v) for v in data.mean(axis=0)))
        stderr_rows.append(
            tuple(float(v) for v in data.std(axis=0, ddof=1) / math.sqrt(k))
        )
        bound_rows.append(tuple(theoretical_bounds(config.instance, cp, config.algorithm)))
    return AggregateReport(
        algorithm=config.algorithm,
        instance_id=config.instance_id,
        n=config.instance.n,
        horizon=config.horizon,
        seeds=config.seeds,
        checkpoints=cps,
        mean_regret=tuple(mean_rows),
        stderr=tuple(stderr_rows),
        bounds=tuple(bound_rows),
        telemetry=_aggregate_telemetry(config, traces),
    )


def _aggregate_telemetry(config: ExperimentConfig, traces: list[EpisodeTrace]) -> dict:
    if config.algorithm == "centralized-ucb":
        frac = [
            tr.stats["core_match_rounds_second_half"] / tr.stats["second_half_rounds"]
            for tr in traces
        ]
        return {
            "mean_core_match_fraction_second_half": float(np.mean(frac)),
        }
    if config.algorithm == "decentralized-etc":
        entries = [tr.stats["entry_round"] for tr in traces]
        entered = [e for e in entries if e is not None]
        committed_core = 0
        committed_total = 0
        post_rounds = 0
        post_core = 0
        for tr in traces:
            committed_total += sum(r is not None for r in tr.stats["commit_rounds"])
            committed_core += sum(tr.stats["committed_is_core"])
            post_rounds += sum(tr.stats["post_commit_rounds"])
            post_core += sum(tr.stats["post_commit_core_rounds"])
        return {
            "episodes_entering_phase2": len(entered),
            "mean_entry_round": float(np.mean(entered)) if entered else None,
            "player_commitments": committed_total,
            "player_commitments_to_core": committed_core,
            "post_commit_rounds": post_rounds,
            "post_commit_core_rounds": post_core,
            # vacuously 1.0 when no post-commitment rounds exist
            "post_commit_core_fraction": (post_core / post_rounds) if post_rounds else 1.0,
        }
    return {}


def theoretical_bounds(instance: MarketInstance, horizon: int, algorithm: str) -> list[float]:
    """Closed-form per-player regret bound at the given horizon.

    Decentralized: (192 N ln T / g^2 + N ln(192 N ln T / g^2) + 3 N^2)
    times the per-player per-round regret cap U(i, core arm), where g
    is the smallest adjacent utility gap of the instance. Centralized:
    max_j max(0, U(i, core arm) - U(i, j)) times (5 N^2 + 12 N ln T /
    g^2). The oracle baseline has a zero curve. An infinite g (1x1
    market) drops the exploration terms and is flagged in the log; the
    nested log term is capped below at zero so tiny horizons stay
    finite.
    """
    if horizon < 1:
        raise ConfigInvalidError(f"bounds need horizon >= 1, got {horizon}")
    n = instance.n
    u = instance.utilities
    core = instance.core.assignment
    gap = instance.min_gap
    log_t = math.log(horizon)
    if algorithm == "oracle-fixed":
        return [0.0] * n
    if math.isinf(gap):
        log.warning("min gap is infinite (1x1 market); bound keeps only the constant term")
    if algorithm == "decentralized-etc":
        if math.isinf(gap):
            rounds_term = 3.0 * n * n
        else:
            explore = 192.0 * n * log_t / (gap * gap)
            nested = n * math.log(explore) if explore > 1.0 else 0.0
            rounds_term = explore + max(nested, 0.0) + 3.0 * n * n
        return [rounds_term * float(u[i, core[i]]) for i in range(n)]
    if algorithm == "centralized-ucb":
        pulls_term = 5.0 * n * n
        if not math.isinf(gap):
            pulls_term += 12.0 * n * log_t / (gap * gap)
        out = []
        for i in range(n):
            worst = max(max(0.0, float(u[i, core[i]] - u[i, j])) for j in range(n))
            out.append(worst * pulls_term)
        return out
    raise ConfigInvalidError(f"no bound curve for algorithm {algorithm!r}")


def export(report: AggregateReport, csv_path: str | Path, json_path: str | Path) -> None:
    """Write the long-format CSV and a JSON summary; both byte-stable.

    CSV rows are ordered by checkpoint then player (1-based players in
    the file). The JSON carries the same numbers plus telemetry.
    """
    csv_path = Path(csv_path)
    json_path = Path(json_path)
    try:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for ci, cp in enumerate(report.checkpoints):
                for i in range(report.n):
                    fh.write(
                        ",".join(
                            (
                                report.algorithm,
                                report.instance_id,
                                str(report.seed_count),
                                str(i + 1),
                                str(cp),
                                repr(report.mean_regret[ci][i]),
                                repr(report.stderr[ci][i]),
                                repr(report.bounds[ci][i]),
                            )
                        )
                        + "\n"
                    )
    except OSError as exc:
        raise ConfigInvalidError(f"cannot write CSV to {csv_path}: {exc}") from exc
    summary = {
        "algorithm": report.algorithm,
        "instance_id": report.instance_id,
        "n": report.n,
        "horizon": report.horizon,
        "seeds": list(report.seeds),
        "seed_count": report.seed_count,
        "checkpoints": list(report.checkpoints),
        "mean_regret": [list(r) for r in report.mean_regret],
        "stderr": [list(r) for r in report.stderr],
        "bounds": [list(r) for r in report.bounds],
        "telemetry": report.telemetry,
    }
    try:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ConfigInvalidError(f"cannot write JSON to {json_path}: {exc}") from exc
