"""Decentralized explore-then-commit protocol.

Each player runs the same two-phase state machine against a known
horizon T, communicating only through the collision channel.

Phase 1 is organized in sub-phases ell = 1, 2, ...; sub-phase ell has
an exploration block of 2^ell rounds followed by n status rounds. In
exploration everyone round-robins (player i proposes arm (i + t) mod n,
collision-free), updating an empirical mean per arm from matched
rewards. At the end of each block a player tries to extract a full
preference ranking: sort arms by empirical mean and certify that every
adjacent pair of confidence intervals is disjoint. In status round
t' of a sub-phase, players that certified a ranking propose arm t'
while the rest abstain; the owner of arm t' consequently counts n
applicants exactly when everyone certified, which is the signal (seen
by each owner in its own status round) to enter phase 2 at the end of
the sub-phase. Either every player sees the signal or none does, so
the transition round t1 is common.

Phase 2 replays the request-by-turn mechanism under the certified
rankings using a common-knowledge availability flag per arm. At the
start of each epoch (every time the available set shrinks) the owner
of the lowest-indexed available arm proposes to its best available
arm; afterwards, whoever owned the previously proposed arm proposes to
its own best available arm, recording the proposer as its predecessor.
A trading cycle closes the moment a proposal reaches the arm of a
player who has already proposed in this epoch: that player withdraws
(flag down) and commits to the arm it proposed to, and the rest of the
cycle commits in the same round's bookkeeping through the
predecessor-withdrew rule (commit_cascade, run to fixpoint before the
next round starts). Committed players pull their committed arm every
remaining round; uncommitted bystanders abstain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .errors import DesyncError
from .market import Ranking

EXPLORE = "explore"
COMMUNICATE = "communicate"
PHASE2 = "phase2"


class PlayerView(NamedTuple):
    """What one player legitimately observes after a round: its own
    outcome plus the applicant identities on its endowed arm."""

    matched: int | None
    reward: float
    collided: bool
    own_applicants: tuple[int, ...]


@dataclass
class ExplorationStats:
    """Per-arm empirical means and pull counts against a known horizon."""

    means: list[float]
    counts: list[int]
    horizon: int

    @classmethod
    def fresh(cls, n: int, horizon: int) -> "ExplorationStats":
        return cls(means=[0.0] * n, counts=[0] * n, horizon=horizon)

    def update(self, arm: int, reward: float) -> None:
        c = self.counts[arm]
        self.means[arm] = (self.means[arm] * c + reward) / (c + 1)
        self.counts[arm] = c + 1


@dataclass(frozen=True)
class Schedule:
    """Position of a phase-1 round: sub-phase index, stage, and the
    1-based offset inside the stage."""

    ell: int
    stage: str
    offset: int


def sub_phase_end(ell: int, n: int) -> int:
    """Last round of sub-phase ell: sum over ell' <= ell of 2^ell' + n."""
    return 2 ** (ell + 1) - 2 + ell * n


def entry_round_bound(n: int, horizon: int, gap: float) -> int:
    """Worst-case exploitation entry round under clean concentration.

    Certification is guaranteed once cumulative exploration rounds
    reach 96 n ln T / gap^2, so the bound is the end of the first
    sub-phase whose explore budget crosses that threshold.
    """
    if horizon < 2:
        raise DesyncError(f"entry bound needs horizon >= 2, got {horizon}")
    if gap <= 0:
        raise DesyncError(f"entry bound needs a positive gap, got {gap}")
    need = 0.0 if math.isinf(gap) else 96.0 * n * math.log(horizon) / (gap * gap)
    ell = 1
    while 2 ** (ell + 1) - 2 < need:
        ell += 1
    return sub_phase_end(ell, n)


def schedule_of(t: int, n: int) -> Schedule:
    """Map a global round t >= 1 to its phase-1 stage position."""
    if t < 1:
        raise DesyncError(f"rounds are 1-based, got {t}")
    start = 0
    ell = 1
    while True:
        block = 2**ell
        if t <= start + block:
            return Schedule(ell=ell, stage=EXPLORE, offset=t - start)
        if t <= start + block + n:
            return Schedule(ell=ell, stage=COMMUNICATE, offset=t - start - block)
        start += block + n
        ell += 1


def confidence_bounds(mean: float, count: int, horizon: int) -> tuple[float, float]:
    """Symmetric confidence interval with radius sqrt(6 ln T / max(count, 1))."""
    radius = math.sqrt(6.0 * math.log(horizon) / max(count, 1))
    return mean - radius, mean + radius


def try_extract_ranking(stats: ExplorationStats) -> Ranking | None:
    """Certified ranking, or None.

    Sort arms by empirical mean (descending) and accept iff for every
    adjacent pair the lower bound of the better arm strictly exceeds
    the upper bound of the worse one. Searching other permutations is
    pointless: pairwise-disjoint intervals admit exactly this order.
    """
    means = stats.means
    n = len(means)
    order = sorted(range(n), key=lambda j: (-means[j], j))
    log_term = 6.0 * math.log(stats.horizon)
    counts = stats.counts
    for a, b in zip(order, order[1:]):
        radius_a = math.sqrt(log_term / max(counts[a], 1))
        radius_b = math.sqrt(log_term / max(counts[b], 1))
        if not means[a] - radius_a > means[b] + radius_b:
            return None
    return tuple(order)


class DecentralizedPlayer:
    """State machine for one player. Drive it with phase1_action /
    phase2_action (or action, which dispatches), then observe, once per
    round; after phase-2 observes, run commit_cascade over all players.
    """

    def __init__(self, player_id: int, n: int, horizon: int):
        if horizon < 2:
            raise DesyncError(f"protocol needs horizon >= 2, got {horizon}")
        self.id = player_id
        self.n = n
        self.horizon = horizon
        self.stats = ExplorationStats.fresh(n, horizon)
        self.phase = 1
        self.t = 0
        self.ell = 1
        self.stage = EXPLORE
        self.stage_left = 2  # rounds remaining in the current stage
        self.p_flag = False
        self.sigma: Ranking | None = None
        self.pending_entry = False
        self.t1: int | None = None
        # phase-2 fields
        self.epoch = 0
        self.available: frozenset[int] = frozenset()
        self.propose_flag = False
        self.predecessor: int | None = None
        self.proposed_arm: int | None = None
        self.committed: int | None = None
        self.commit_round: int | None = None
        self._own_applicants: tuple[int, ...] = ()
        self._last_action: int | None = None

    # --- actions ---------------------------------------------------------

    def action(self, t: int, flags: Sequence[bool]) -> int | None:
        if self.phase == 1:
            return self.phase1_action(t)
        return self.phase2_action(t, flags)

    def phase1_action(self, t: int) -> int | None:
        if t != self.t + 1:
            raise DesyncError(f"player {self.id} asked to act at round {t}, expected {self.t + 1}")
        if self.stage == EXPLORE:
            self._last_action = (self.id + t) % self.n
        elif self.p_flag:
            # status round t' (1-based offset): propose arm t' - 1
            offset = self._stage_offset()
            self._last_action = offset - 1
        else:
            self._last_action = None
        return self._last_action

    def _stage_offset(self) -> int:
        length = 2**self.ell if self.stage == EXPLORE else self.n
        return length - self.stage_left + 1

    def phase2_action(self, t: int, flags: Sequence[bool]) -> int | None:
        if t != self.t + 1:
            raise DesyncError(f"player {self.id} asked to act at round {t}, expected {self.t + 1}")
        if self.committed is not None:
            self._last_action = self.committed
            return self._last_action
        avail = frozenset(j for j in range(self.n) if flags[j])
        if not avail:
            raise DesyncError(f"player {self.id} uncommitted with no available arms")
        epoch_start = avail != self.available
        if epoch_start:
            self.epoch += 1
            self.available = avail
            self.propose_flag = False
            self.predecessor = None
            self.proposed_arm = None
        action: int | None = None
        if epoch_start:
            if self.id == min(avail):
                action = self._best_available()
                self.propose_flag = True
                self.proposed_arm = action
        elif not self.propose_flag and self._own_applicants:
            # chain turn: my arm was requested last round
            if len(self._own_applicants) != 1:
                raise DesyncError(
                    f"arm {self.id} drew {len(self._own_applicants)} phase-2 applicants"
                )
            self.predecessor = self._own_applicants[0]
            action = self._best_available()
            self.propose_flag = True
            self.proposed_arm = action
        self._last_action = action
        return action

    def _best_available(self) -> int:
        assert self.sigma is not None
        for arm in self.sigma:
            if arm in self.available:
                return arm
        raise DesyncError(f"player {self.id} found no available arm in its ranking")

    # --- observations ------------------------------------------------------

    def observe(self, t: int, view: PlayerView) -> None:
        if t != self.t + 1:
            raise DesyncError(f"player {self.id} observed round {t}, expected {self.t + 1}")
        self.t = t
        self._own_applicants = view.own_applicants
        if self.phase != 1:
            return
        if self.stage == EXPLORE:
            if view.collided or view.matched != self._last_action:
                raise DesyncError(
                    f"player {self.id} expected a clean exploration match at round {t}"
                )
            self.stats.update(view.matched, view.reward)
            self.stage_left -= 1
            if self.stage_left == 0:
                # end of the exploration block: refresh the certificate
                extracted = try_extract_ranking(self.stats)
                self.p_flag = extracted is not None
                if extracted is not None:
                    self.sigma = extracted
                self.stage = COMMUNICATE
                self.stage_left = self.n
            return
        # status stage
        offset = self._stage_offset()
        if offset - 1 == self.id and len(view.own_applicants) == self.n:
            self.pending_entry = True
        self.stage_left -= 1
        if self.stage_left == 0:
            if self.pending_entry:
                self.phase = 2
                self.t1 = t
                assert t == sub_phase_end(self.ell, self.n)
            else:
                self.ell += 1
                self.stage = EXPLORE
                self.stage_left = 2**self.ell

    # --- phase-2 commit bookkeeping -----------------------------------------

    def commit_check(self, flags: Sequence[bool]) -> bool:
        """One step of the end-of-round closure rule. True if this
        player just withdrew (the caller must flip its flag)."""
        if self.phase != 2 or self.committed is not None or not self.propose_flag:
            return False
        closed = bool(self._own_applicants)
        withdrawn = self.predecessor is not None and not flags[self.predecessor]
        if closed or withdrawn:
            self.committed = self.proposed_arm
            self.commit_round = self.t
            self.propose_flag = False
            return True
        return False

    def snapshot(self) -> dict:
        """JSON-friendly dump of the player state (1-based indices)."""
        return {
            "player": self.id + 1,
            "phase": self.phase,
            "round": self.t,
            "sub_phase": self.ell if self.phase == 1 else None,
            "stage": self.stage if self.phase == 1 else PHASE2,
            "means": list(self.stats.means),
            "counts": list(self.stats.counts),
            "ranking_certified": self.p_flag,
            "ranking": None if self.sigma is None else [a + 1 for a in self.sigma],
            "entry_round": self.t1,
            "epoch": self.epoch if self.phase == 2 else None,
            "committed_arm": None if self.committed is None else self.committed + 1,
            "commit_round": self.commit_round,
        }


def commit_cascade(players: Sequence[DecentralizedPlayer], flags: list[bool]) -> None:
    """Run the closure rule to fixpoint after a phase-2 round.

    A whole trading cycle resolves here: the repeated proposer commits
    first (its arm received a request while its own was pending), then
    withdrawal propagates along predecessor links. Flags are mutated in
    place and become the common knowledge of the next round.
    """
    changed = True
    while changed:
        changed = False
        for p in players:
            if p.commit_check(flags):
                flags[p.id] = False
                changed = True
