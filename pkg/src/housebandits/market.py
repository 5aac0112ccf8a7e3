"""Housing-market primitives: instances, preference rankings, matchings,
the top-trading-cycles mechanism, a round-by-round serial dictatorship
(you-request-my-house-I-get-your-turn), and a brute-force core oracle.

Markets are one-sided: player i enters owning arm (house) a_i, utilities
live in an n x n matrix with one row per player, and rows are required
to be strict (no duplicate values) so every player has a total order
over arms. Under strict preferences the core of the exchange economy is
a single matching, which is what both mechanisms here compute.

Players and arms are indexed 0..n-1 internally. JSON files use 1-based
indices; conversion happens only at (de)serialization boundaries.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyCoreError,
    EntryOutOfRangeError,
    MalformedRankingError,
    NonSquareMatrixError,
    NonUniqueCoreError,
    OracleTooLargeError,
    TiedPreferenceError,
)

# Largest market the factorial core oracle will enumerate.
MAX_ORACLE_N = 8

REWARD_MODELS = ("gaussian", "bernoulli")

Ranking = tuple[int, ...]


@dataclass(frozen=True)
class Matching:
    """A total assignment of arms to players.

    assignment[i] is the arm matched to player i. The constructor
    rejects anything that is not a permutation of 0..n-1.
    """

    assignment: tuple[int, ...]

    def __post_init__(self) -> None:
        _check_permutation(self.assignment, len(self.assignment))

    def __len__(self) -> int:
        return len(self.assignment)

    def arm_of(self, player: int) -> int:
        return self.assignment[player]

    def to_json_list(self) -> list[int]:
        """1-based list, position p holds the arm of player p (1-based)."""
        return [a + 1 for a in self.assignment]

    @classmethod
    def from_json_list(cls, data: Sequence[int]) -> "Matching":
        if not all(isinstance(a, int) and not isinstance(a, bool) for a in data):
            raise MalformedRankingError(f"matching entries must be integers, got {data!r}")
        return cls(tuple(a - 1 for a in data))


@dataclass(frozen=True)
class Coalition:
    """A blocking coalition: members swap endowments along a cycle and
    every member strictly improves on the matching under test.

    reallocation pairs (player, arm) use only the members' own
    endowments, as required for a valid objection.
    """

    members: tuple[int, ...]
    reallocation: tuple[tuple[int, int], ...]

    def as_dict(self) -> dict[int, int]:
        return dict(self.reallocation)


@dataclass(frozen=True)
class MarketInstance:
    """A validated market: utilities, derived rankings, the minimum
    utility gap, and the (unique) core matching.

    Build instances through validate_instance or load_instance, never
    directly; the derived fields are trusted downstream.
    """

    utilities: np.ndarray
    reward_model: str
    rankings: tuple[Ranking, ...]
    min_gap: float
    core: Matching

    @property
    def n(self) -> int:
        return len(self.rankings)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "utilities": [[float(v) for v in row] for row in self.utilities],
            "reward_model": self.reward_model,
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MarketInstance):
            return NotImplemented
        return (
            self.reward_model == other.reward_model
            and self.utilities.shape == other.utilities.shape
            and bool(np.all(self.utilities == other.utilities))
        )


def _check_permutation(seq: Sequence[int], n: int) -> None:
    if len(seq) != n or sorted(seq) != list(range(n)):
        raise MalformedRankingError(
            f"expected a permutation of 0..{n - 1}, got {tuple(seq)!r}"
        )


def ranking_from_utilities(utilities: np.ndarray, player: int) -> Ranking:
    """Strict preference order of one player, best arm first.

    Raises TiedPreferenceError if the row has duplicate values.
    """
    row = np.asarray(utilities, dtype=float)[player]
    if len(set(row.tolist())) != len(row):
        raise TiedPreferenceError(f"player {player} has tied utilities: {row.tolist()}")
    # stable sort on negated values; ties are impossible past the check
    return tuple(int(j) for j in np.argsort(-row, kind="stable"))


def min_gap(utilities: np.ndarray) -> float:
    """Smallest utility difference between ranking-adjacent arms, over
    all players. Positive iff all rows are strict; +inf for a 1x1 market
    (no adjacent pair exists)."""
    u = np.asarray(utilities, dtype=float)
    n = u.shape[0]
    if n == 1:
        return math.inf
    ordered = np.sort(u, axis=1)
    return float(np.min(ordered[:, 1:] - ordered[:, :-1]))


def validate_instance(utilities: Iterable, reward_model: str = "gaussian") -> MarketInstance:
    """Check a raw utility matrix and package it with derived data.

    Rejects non-square matrices, entries outside [0, 1] (or non-finite),
    duplicate values within a row, and unknown reward models.
    """
    u = np.array(utilities, dtype=float)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or u.shape[0] == 0:
        raise NonSquareMatrixError(f"utilities must be square and non-empty, got shape {u.shape}")
    if not np.all(np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise EntryOutOfRangeError("utility entries must be finite and within [0, 1]")
    if reward_model not in REWARD_MODELS:
        raise EntryOutOfRangeError(
            f"reward_model must be one of {REWARD_MODELS}, got {reward_model!r}"
        )
    n = u.shape[0]
    rankings = tuple(ranking_from_utilities(u, i) for i in range(n))
    u.setflags(write=False)
    return MarketInstance(
        utilities=u,
        reward_model=reward_model,
        rankings=rankings,
        min_gap=min_gap(u),
        core=ttc(rankings),
    )


# --- mechanisms -----------------------------------------------------------


def ttc(rankings: Sequence[Ranking]) -> Matching:
    """Top trading cycles under strict rankings.

    Every remaining player points at the owner of its best remaining
    arm (the owner of arm j is player j); all cycles of the pointer
    graph are removed simultaneously, each member taking the arm it
    points at. Terminates within n removal iterations.
    """
    n = len(rankings)
    for r in rankings:
        _check_permutation(r, n)
    remaining = set(range(n))
    cursor = [0] * n
    assigned: dict[int, int] = {}
    iterations = 0
    while remaining:
        iterations += 1
        if iterations > n:
            raise RuntimeError("ttc failed to terminate in n iterations")
        point: dict[int, int] = {}
        for i in remaining:
            c = cursor[i]
            rank = rankings[i]
            while rank[c] not in remaining:
                c += 1
            cursor[i] = c
            point[i] = rank[c]
        # every node has out-degree one, so each walk ends in a cycle;
        # color-marking finds all of them in one pass
        state = dict.fromkeys(remaining, 0)  # 0 new, 1 on path, 2 done
        for start in point:
            if state[start] != 0:
                continue
            path = []
            j = start
            while state[j] == 0:
                state[j] = 1
                path.append(j)
                j = point[j]
            if state[j] == 1:
                for m in path[path.index(j):]:
                    assigned[m] = point[m]
            for m in path:
                state[m] = 2
        remaining -= assigned.keys()
    return Matching(tuple(assigned[i] for i in range(n)))


@dataclass(frozen=True)
class EpochRecord:
    """One epoch of the request-by-turn mechanism: who led, which cycle
    traded, who closed it, and how many proposal rounds it took."""

    leader: int
    cycle: tuple[int, ...]
    closer: int
    rounds: int


@dataclass(frozen=True)
class SerialDictatorshipResult:
    matching: Matching
    epochs: int
    rounds: int
    epoch_log: tuple[EpochRecord, ...]


def yrmh_igyt(rankings: Sequence[Ranking]) -> SerialDictatorshipResult:
    """You-request-my-house-I-get-your-turn, one proposal per round.

    Each epoch the owner of the lowest-indexed remaining arm proposes
    to its best remaining arm; whoever owns a proposed arm proposes
    next. The epoch ends the moment a proposal reaches a player who has
    already proposed; the chain from that player onward is a trading
    cycle, its members exit with the arms they proposed to. Produces
    the same matching as ttc, in at most n epochs and n*n rounds total.
    """
    n = len(rankings)
    for r in rankings:
        _check_permutation(r, n)
    remaining = set(range(n))
    assigned: dict[int, int] = {}
    epochs = 0
    rounds = 0
    log: list[EpochRecord] = []
    while remaining:
        epochs += 1
        leader = min(remaining)
        proposed_to: dict[int, int] = {}
        chain: list[int] = []
        current = leader
        while True:
            rank = rankings[current]
            c = 0
            while rank[c] not in remaining:
                c += 1
            proposed_to[current] = rank[c]
            chain.append(current)
            rounds += 1
            owner = rank[c]  # arm j is owned by player j
            if owner in proposed_to:
                break
            current = owner
        # the repeated proposer is the entry point of the trading cycle
        cycle = tuple(chain[chain.index(owner):])
        for m in cycle:
            assigned[m] = proposed_to[m]
        remaining -= set(cycle)
        log.append(EpochRecord(leader=leader, cycle=cycle, closer=chain[-1], rounds=len(chain)))
    matching = Matching(tuple(assigned[i] for i in range(n)))
    return SerialDictatorshipResult(matching, epochs, rounds, tuple(log))


# --- core membership ------------------------------------------------------


def find_blocking_coalition(
    utilities: np.ndarray, matching: Matching, max_n: int = MAX_ORACLE_N
) -> Coalition | None:
    """Search for a coalition that blocks the matching, smallest first.

    A coalition blocks when it can reallocate its own endowments so
    that no member is worse off and at least one member is strictly
    better off (weak domination; with strict preferences this is the
    blocking notion under which the core is the single matching that
    top trading cycles produces). Members who do not improve must be
    handed exactly the arm they already hold, since any other arm of
    equal value cannot exist in a strict market.

    Any blocking coalition contains a blocking trade cycle: decompose
    its reallocation into permutation cycles and keep one containing a
    strict improver. Enumerating cyclic coalitions is therefore
    exhaustive for existence. Returns None iff the matching is the core
    matching.
    """
    u = np.asarray(utilities, dtype=float)
    n = u.shape[0]
    if n > max_n:
        raise OracleTooLargeError(f"blocking search limited to n <= {max_n}, got {n}")
    base = [u[i, matching.arm_of(i)] for i in range(n)]
    players = range(n)
    for k in range(1, n + 1):
        for subset in itertools.combinations(players, k):
            first = subset[0]
            # fix the smallest member first so each cycle appears once
            for rest in itertools.permutations(subset[1:]):
                cycle = (first,) + rest
                ok = True
                strict = False
                for m in range(k):
                    # member m takes the endowment of its successor:
                    # either a strict improvement or its current match
                    succ = cycle[(m + 1) % k]
                    if u[cycle[m], succ] > base[cycle[m]]:
                        strict = True
                    elif succ != matching.arm_of(cycle[m]):
                        ok = False
                        break
                if ok and strict:
                    realloc = tuple(
                        (cycle[m], cycle[(m + 1) % k]) for m in range(k)
                    )
                    return Coalition(members=subset, reallocation=realloc)
    return None


def core_oracle_bruteforce(utilities: np.ndarray, max_n: int = MAX_ORACLE_N) -> Matching:
    """Enumerate all n! matchings, keep the unblocked ones, and insist
    there is exactly one. Independent of ttc by construction; used to
    certify mechanism output and core uniqueness in tests.
    """
    u = np.asarray(utilities, dtype=float)
    n = u.shape[0]
    if n > max_n:
        raise OracleTooLargeError(f"brute-force oracle limited to n <= {max_n}, got {n}")
    # prefix[i] lists the arms player i strictly prefers to its match,
    # which is exactly the ranking prefix before the matched arm
    rankings = [ranking_from_utilities(u, i) for i in range(n)]
    pos = [[0] * n for _ in range(n)]
    for i in range(n):
        for p, j in enumerate(rankings[i]):
            pos[i][j] = p
    unblocked: list[tuple[int, ...]] = []
    for perm in itertools.permutations(range(n)):
        if not _is_blocked(rankings, pos, perm):
            unblocked.append(perm)
            if len(unblocked) > 1:
                raise NonUniqueCoreError(
                    f"found two unblocked matchings: {unblocked}"
                )
    if not unblocked:
        raise EmptyCoreError("no unblocked matching exists; strict rows should prevent this")
    return Matching(unblocked[0])


def _is_blocked(
    rankings: Sequence[Ranking], pos: Sequence[Sequence[int]], matching: Sequence[int]
) -> bool:
    """Existence half of find_blocking_coalition, tuned for the n!
    enumeration loop.

    View the market as a digraph on players with a strict edge i -> j
    whenever player i strictly prefers arm a_j to its matched arm (the
    targets are exactly the ranking prefix of i before its match) plus
    a stay edge i -> matching[i] (taking its current arm back from the
    owner of that arm). The matching is weakly dominated iff some cycle
    uses at least one strict edge; pure stay cycles are the matching
    itself and object to nothing.
    """
    n = len(matching)
    cut = [pos[i][matching[i]] for i in range(n)]
    # stage 1: cycle made of strict edges only, early-exit depth-first
    # search; this settles almost every bijection
    state = [0] * n  # 0 new, 1 on stack, 2 exhausted
    for root in range(n):
        if state[root] != 0:
            continue
        stack = [(root, 0)]
        state[root] = 1
        while stack:
            node, ptr = stack[-1]
            edges = rankings[node]
            limit = cut[node]
            advanced = False
            while ptr < limit:
                nxt = edges[ptr]
                ptr += 1
                s = state[nxt]
                if s == 1:
                    return True
                if s == 0:
                    stack[-1] = (node, ptr)
                    stack.append((nxt, 0))
                    state[nxt] = 1
                    advanced = True
                    break
            if not advanced:
                state[node] = 2
                stack.pop()
    # stage 2: mixed cycle, some strict edge (u, v) closed back through
    # strict or stay edges; check v -> u reachability per strict edge
    adjacency = [list(rankings[i][: cut[i]]) + [matching[i]] for i in range(n)]
    for u in range(n):
        for v in rankings[u][: cut[u]]:
            seen = {v}
            frontier = [v]
            while frontier:
                node = frontier.pop()
                if node == u:
                    return True
                for nxt in adjacency[node]:
                    if nxt not in seen:
                        seen.add(nxt)
                        frontier.append(nxt)
    return False


# --- serialization --------------------------------------------------------


def instance_from_json_dict(data: dict) -> MarketInstance:
    """Build an instance from the documented JSON schema:
    {"n": int, "utilities": [[...]], "reward_model": "gaussian"|"bernoulli"}.
    """
    if not isinstance(data, dict):
        raise NonSquareMatrixError("instance file must hold a JSON object")
    expected = {"n", "utilities", "reward_model"}
    if set(data) != expected:
        raise NonSquareMatrixError(
            f"instance object must have exactly the keys {sorted(expected)}, got {sorted(data)}"
        )
    inst = validate_instance(data["utilities"], data["reward_model"])
    if inst.n != data["n"]:
        raise NonSquareMatrixError(
            f"declared n={data['n']} does not match a {inst.n}x{inst.n} matrix"
        )
    return inst


def load_instance(path: str | Path) -> MarketInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_json_dict(json.load(fh))


def save_instance(instance: MarketInstance, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_matching(path: str | Path) -> Matching:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise MalformedRankingError("matching file must hold a JSON array")
    return Matching.from_json_list(data)


def save_matching(matching: Matching, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(matching.to_json_list(), fh)
        fh.write("\n")
