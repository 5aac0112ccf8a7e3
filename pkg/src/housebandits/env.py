"""Stochastic market environment.

Resolves one proposal vector per round under the collision rule: an arm
proposed to by two or more players matches nobody and every applicant
takes reward 0 with a collided flag; a unique applicant is matched and
draws a reward with mean equal to its utility for that arm; abstaining
players take reward 0 without a collision. Only the owner of an arm may
see who applied to it, which RoundOutcome enforces by exposing identity
sets through an owner-view accessor alone.

Randomness: an episode owns a single seeded generator, and each round
consumes one block of n variates, element i belonging to player i. The
variate feeding (player, round) therefore never depends on resolution
order, and an identical (instance, proposals, seed) triple reproduces
an episode bit for bit. MarketEnv pregenerates blocks in chunks, which
yields the exact same stream as drawing one block per round.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import EntryOutOfRangeError, MeanOutOfRangeError, RoundOutOfRangeError
from .market import MarketInstance

# The abstain action: a proposal slot holding None instead of an arm.
ABSTAIN = None

# Families accepted when sampling; "deterministic" (reward equals the
# mean exactly) is a diagnostic mode for no-noise episodes and is not a
# valid instance file family.
SAMPLING_FAMILIES = ("gaussian", "bernoulli", "deterministic")

TRACE_COLUMNS = (
    "round",
    "player",
    "proposal",
    "matched_arm",
    "collided",
    "reward",
    "pseudo_regret_cum",
    "realized_regret_cum",
)

_NOISE_CHUNK_ROUNDS = 4096


class RoundOutcome:
    """Result of one resolved round.

    Public per-player fields: proposals, matched (arm or None), rewards,
    collided. Public per-arm field: applicant_counts. Full applicant
    identity sets are reachable only through owner_view, mirroring the
    rule that only the owner of an arm observes its application profile.
    """

    __slots__ = ("proposals", "matched", "rewards", "collided", "applicant_counts", "_applicants")

    def __init__(self, proposals, matched, rewards, collided, applicant_counts, applicants):
        self.proposals = proposals
        self.matched = matched
        self.rewards = rewards
        self.collided = collided
        self.applicant_counts = applicant_counts
        self._applicants = applicants

    def owner_view(self, arm: int) -> tuple[int, ...]:
        """Applicant identities for one arm, as seen by its owner."""
        return self._applicants[arm]


def sample_reward(family: str, mean: float, rng: np.random.Generator) -> float:
    """One reward draw. Gaussian adds a unit-variance normal to the
    mean; Bernoulli returns 1 with probability mean; deterministic
    returns the mean itself."""
    if family == "gaussian":
        return float(mean + rng.standard_normal())
    if family == "bernoulli":
        if not 0.0 <= mean <= 1.0:
            raise MeanOutOfRangeError(f"Bernoulli mean must lie in [0, 1], got {mean}")
        return float(rng.random() < mean)
    if family == "deterministic":
        return float(mean)
    raise EntryOutOfRangeError(f"unknown reward family {family!r}")


def _resolve(proposals, utilities, n, family, noise_row):
    matched: list[int | None] = [None] * n
    rewards = [0.0] * n
    collided = [False] * n
    applicants: list[list[int]] = [[] for _ in range(n)]
    for i, arm in enumerate(proposals):
        if arm is ABSTAIN:
            continue
        if not 0 <= arm < n:
            raise EntryOutOfRangeError(f"player {i} proposed invalid arm {arm}")
        applicants[arm].append(i)
    for arm, apps in enumerate(applicants):
        if len(apps) == 1:
            i = apps[0]
            matched[i] = arm
            mean = utilities[i][arm]
            if family == "gaussian":
                rewards[i] = mean + noise_row[i]
            elif family == "bernoulli":
                rewards[i] = 1.0 if noise_row[i] < mean else 0.0
            else:
                rewards[i] = mean
        elif len(apps) > 1:
            for i in apps:
                collided[i] = True
    return RoundOutcome(
        proposals=tuple(proposals),
        matched=tuple(matched),
        rewards=tuple(rewards),
        collided=tuple(collided),
        applicant_counts=tuple(len(a) for a in applicants),
        applicants=tuple(tuple(a) for a in applicants),
    )


def resolve_round(
    proposals: Sequence[int | None],
    instance: MarketInstance,
    rng: np.random.Generator,
    family: str | None = None,
) -> RoundOutcome:
    """Resolve one round, consuming one block of n variates from rng
    for a stochastic family (none for deterministic)."""
    n = instance.n
    if len(proposals) != n:
        raise EntryOutOfRangeError(f"expected {n} proposal slots, got {len(proposals)}")
    fam = instance.reward_model if family is None else family
    if fam not in SAMPLING_FAMILIES:
        raise EntryOutOfRangeError(f"unknown reward family {fam!r}")
    if fam == "gaussian":
        noise = rng.standard_normal(n)
    elif fam == "bernoulli":
        noise = rng.random(n)
    else:
        noise = None
    return _resolve(proposals, instance.utilities.tolist(), n, fam, noise)


class MarketEnv:
    """Sequential episode driver: seeded rng plus a round counter.

    step() is equivalent to resolve_round on a shared generator; noise
    blocks are pregenerated in chunks purely for speed.
    """

    def __init__(self, instance: MarketInstance, seed: int, family: str | None = None):
        self.instance = instance
        self.family = instance.reward_model if family is None else family
        if self.family not in SAMPLING_FAMILIES:
            raise EntryOutOfRangeError(f"unknown reward family {self.family!r}")
        self.rng = np.random.default_rng(seed)
        self.t = 0
        self._u = instance.utilities.tolist()
        self._chunk: list | None = None
        self._chunk_pos = 0

    def _next_noise(self):
        if self.family == "deterministic":
            return None
        if self._chunk is None or self._chunk_pos >= len(self._chunk):
            n = self.instance.n
            if self.family == "gaussian":
                block = self.rng.standard_normal((_NOISE_CHUNK_ROUNDS, n))
            else:
                block = self.rng.random((_NOISE_CHUNK_ROUNDS, n))
            self._chunk = block.tolist()
            self._chunk_pos = 0
        row = self._chunk[self._chunk_pos]
        self._chunk_pos += 1
        return row

    def step(self, proposals: Sequence[int | None]) -> RoundOutcome:
        self.t += 1
        return _resolve(proposals, self._u, self.instance.n, self.family, self._next_noise())


class RegretLedger:
    """Per-player regret accounting against the core matching.

    Pseudo-regret accumulates the mean shortfall
    U(i, core(i)) - (U(i, matched arm) if matched else 0),
    realized regret accumulates U(i, core(i)) - X_i(t). Trace mode
    additionally keeps one row per (round, player) for CSV export and
    mid-episode queries; extra_columns lets a caller append per-round
    values (each repeated on that round's player rows).
    """

    def __init__(self, instance: MarketInstance, trace: bool = False,
                 extra_columns: tuple[str, ...] = ()):
        self.instance = instance
        self.n = instance.n
        u = instance.utilities.tolist()
        self.core_means = [u[i][instance.core.arm_of(i)] for i in range(self.n)]
        self._u = u
        self.t = 0
        self.pseudo = [0.0] * self.n
        self.realized = [0.0] * self.n
        self.trace = trace
        self.extra_columns = extra_columns
        self._rows: list[tuple] = []

    def record(self, outcome: RoundOutcome, extra: tuple = ()) -> None:
        self.t += 1
        core_means = self.core_means
        pseudo = self.pseudo
        realized = self.realized
        u = self._u
        matched = outcome.matched
        rewards = outcome.rewards
        for i in range(self.n):
            arm = matched[i]
            got = u[i][arm] if arm is not None else 0.0
            pseudo[i] += core_means[i] - got
            realized[i] += core_means[i] - rewards[i]
        if self.trace:
            if len(extra) != len(self.extra_columns):
                raise RoundOutOfRangeError(
                    f"expected {len(self.extra_columns)} extra values, got {len(extra)}"
                )
            t = self.t
            proposals = outcome.proposals
            collided = outcome.collided
            for i in range(self.n):
                arm = matched[i]
                self._rows.append(
                    (
                        t,
                        i + 1,
                        0 if proposals[i] is None else proposals[i] + 1,
                        0 if arm is None else arm + 1,
                        int(collided[i]),
                        rewards[i],
                        pseudo[i],
                        realized[i],
                    )
                    + extra
                )

    def cumulative_regret(self, i: int, t: int | None = None, realized: bool = False) -> float:
        """Cumulative regret of player i after round t (default: the
        current round). Mid-episode rounds require trace mode."""
        if t is None or t == self.t:
            return self.realized[i] if realized else self.pseudo[i]
        if t == 0:
            return 0.0
        if t < 0 or t > self.t:
            raise RoundOutOfRangeError(f"round {t} not recorded (current round {self.t})")
        if not self.trace:
            raise RoundOutOfRangeError("mid-episode queries need trace mode")
        row = self._rows[(t - 1) * self.n + i]
        return row[7] if realized else row[6]

    def trace_rows(self) -> list[tuple]:
        return list(self._rows)

    def write_trace_csv(self, path: str | Path) -> None:
        if not self.trace:
            raise RoundOutOfRangeError("trace mode disabled; nothing to export")
        header = TRACE_COLUMNS + self.extra_columns
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in self._rows:
                fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def iter_trace_csv(path: str | Path) -> Iterator[dict]:
    """Tiny reader for trace CSVs, mainly for tests."""
    import csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        yield from csv.DictReader(fh)
