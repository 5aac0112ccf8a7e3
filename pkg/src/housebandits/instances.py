"""Instance generators.

Three families: random markets with a per-row floor on adjacent utility
gaps, single-cycle markets where every player's top arm is its core
match (the class the learning bounds are stated for), and a fixed
worst-case construction with one distinguished player whose non-top
arms all sit far below its top arm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigInvalidError, InfeasibleDeltaError, InfeasibleGapFloorError
from .market import MarketInstance, validate_instance

GENERATOR_FAMILIES = ("random", "sttcb", "lower-bound")

# Tie-break perturbation scale for the lower-bound construction.
TIE_BREAK_EPS = 1e-6


@dataclass(frozen=True)
class GeneratorConfig:
    """Bundled generator parameters for config files and the CLI.

    family selects the generator; the other fields are consumed per
    family: random uses (n, delta_floor, seed, reward_model), sttcb
    uses (n, delta, seed, reward_model), lower-bound uses
    (n, delta, distinguished) and is deterministic Bernoulli.
    """

    family: str
    n: int
    delta_floor: float | None = None
    delta: float | None = None
    distinguished: int | None = None
    seed: int | None = None
    reward_model: str = "gaussian"


def generate(config: GeneratorConfig) -> MarketInstance:
    if config.family == "random":
        if config.delta_floor is None:
            raise ConfigInvalidError("random family requires delta_floor")
        rng = np.random.default_rng(config.seed)
        return random_instance(config.n, config.delta_floor, rng, config.reward_model)
    if config.family == "sttcb":
        if config.delta is None:
            raise ConfigInvalidError("sttcb family requires delta")
        rng = np.random.default_rng(config.seed)
        return sttcb_instance(config.n, config.delta, rng, config.reward_model)
    if config.family == "lower-bound":
        if config.delta is None or config.distinguished is None:
            raise ConfigInvalidError("lower-bound family requires delta and distinguished")
        return lower_bound_instance(config.n, config.delta, config.distinguished)
    raise ConfigInvalidError(
        f"unknown generator family {config.family!r}; expected one of {GENERATOR_FAMILIES}"
    )


def _spaced_values(count: int, floor: float, low: float, high: float,
                   rng: np.random.Generator) -> np.ndarray:
    """count values in [low, high], ascending, adjacent gaps >= floor.

    Shifting the k-th order statistic of uniforms on the slack interval
    by k*floor packs the gaps in while keeping the draw exchangeable.
    """
    slack = (high - low) - (count - 1) * floor
    base = np.sort(rng.random(count) * slack)
    return low + base + floor * np.arange(count)


def random_instance(
    n: int,
    delta_floor: float,
    rng: np.random.Generator,
    reward_model: str = "gaussian",
) -> MarketInstance:
    """Random market whose rows all have adjacent sorted gaps of at
    least delta_floor (so min_gap >= delta_floor by construction)."""
    if n < 1:
        raise InfeasibleGapFloorError(f"need n >= 1, got {n}")
    if delta_floor <= 0.0 or delta_floor * n > 1.0:
        raise InfeasibleGapFloorError(
            f"delta_floor must satisfy 0 < delta_floor and delta_floor*n <= 1, "
            f"got delta_floor={delta_floor}, n={n}"
        )
    rows = []
    for _ in range(n):
        values = _spaced_values(n, delta_floor, 0.0, 1.0, rng)
        rows.append(values[rng.permutation(n)])
    return validate_instance(np.array(rows), reward_model)


def sttcb_instance(
    n: int,
    delta: float,
    rng: np.random.Generator,
    reward_model: str = "gaussian",
) -> MarketInstance:
    """Market whose core is the single cycle player i -> arm i+1 (mod n)
    and where that arm is also each player's top choice, with every gap
    to the top arm at least delta."""
    if n < 2:
        raise InfeasibleDeltaError(f"need n >= 2, got {n}")
    if not 0.0 < delta < 1.0 / (n - 1):
        raise InfeasibleDeltaError(
            f"delta must lie in (0, 1/(n-1)) = (0, {1.0 / (n - 1):.6g}), got {delta}"
        )
    rows = []
    for i in range(n):
        top_arm = (i + 1) % n
        # top value needs n-1 gaps of delta below it to fit the rest
        lo = (n - 1) * delta
        top_value = lo + rng.random() * (1.0 - lo)
        others = _spaced_values(n - 1, delta, 0.0, top_value - delta, rng)
        row = np.empty(n)
        other_arms = [j for j in range(n) if j != top_arm]
        row[top_arm] = top_value
        row[[other_arms[k] for k in rng.permutation(n - 1)]] = others
        rows.append(row)
    instance = validate_instance(np.array(rows), reward_model)
    assert is_sttcb(instance), "constructed instance must be single-cycle with top = core"
    return instance


def lower_bound_instance(n: int, delta: float, i_star: int) -> MarketInstance:
    """Deterministic Bernoulli worst-case market.

    Every player's top arm is the next one around the circle with mean
    1/2. Non-distinguished players value all other arms 1/2 - delta;
    the distinguished player (i_star, 1-based) values them 1/4. Those
    duplicated entries are perturbed by TIE_BREAK_EPS times the 1-based
    arm index so rows stay strict; the perturbation is orders of
    magnitude below delta and leaves every top gap unchanged to first
    order.
    """
    if n < 2:
        raise InfeasibleDeltaError(f"need n >= 2, got {n}")
    if not 0.0 < delta <= 0.25:
        raise InfeasibleDeltaError(f"delta must lie in (0, 1/4], got {delta}")
    if not 1 <= i_star <= n:
        raise InfeasibleDeltaError(f"distinguished player must lie in 1..{n}, got {i_star}")
    if delta <= TIE_BREAK_EPS * (n + 1):
        raise InfeasibleDeltaError(
            f"delta={delta} too small for the {TIE_BREAK_EPS} tie-break at n={n}"
        )
    star = i_star - 1
    u = np.empty((n, n))
    for i in range(n):
        top_arm = (i + 1) % n
        off = 0.25 if i == star else 0.5 - delta
        for j in range(n):
            u[i, j] = 0.5 if j == top_arm else off + TIE_BREAK_EPS * (j + 1)
    instance = validate_instance(u, "bernoulli")
    assert is_sttcb(instance)
    return instance


def is_sttcb(instance: MarketInstance) -> bool:
    """True iff the core matching is one n-cycle and every player's
    top-ranked arm is its core arm."""
    n = instance.n
    core = instance.core
    for i in range(n):
        if instance.rankings[i][0] != core.arm_of(i):
            return False
    # follow the permutation i -> owner of the arm matched to i
    seen = 1
    j = core.arm_of(0)
    while j != 0:
        j = core.arm_of(j)
        seen += 1
    return seen == n
