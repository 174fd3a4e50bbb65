"""Per-city coordination between the agent layer and the epidemic ODE.

The coordinator aggregates agent statuses into integer compartment
counts, applies the lockdown policy, hands the counts to the continuous
model, and pushes the continuous result back onto agents.  The
micro/macro round trip is exactly conserving: real-valued compartments
are apportioned back to integers by largest-remainder rounding, and
status changes are realized as forward flows only (S to E to I to R),
so no individual is ever lost or resurrected by discretization.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ForeignAgent, TotalMismatch, UnreachableCensus
from .rng import RngStream, sample_without_replacement

# Status codes, in flow order.  Used as array values and count indices.
S, E, I, R = 0, 1, 2, 3
STATUS_LABELS = ("S", "E", "I", "R")

REGULAR, ESSENTIAL = 0, 1


class PolicyMode(enum.Enum):
    NONE = "none"
    FULL = "full"
    ESSENTIAL_ONLY = "essential_only"


class MobilityGate(enum.Enum):
    """Who may leave a city this step (infected never leave anywhere)."""

    OPEN = "open"
    ESSENTIAL_ONLY = "essential_only"
    CLOSED = "closed"


@dataclass(frozen=True)
class LockdownPolicy:
    mode: PolicyMode
    lockdown_contagion_factor: float = 0.5
    infected_threshold: int = 50

    def __post_init__(self):
        if not (0.0 < self.lockdown_contagion_factor <= 1.0):
            raise ValueError("lockdown_contagion_factor must be in (0, 1]")


@dataclass
class LocationState:
    """Per-city record the coordinator carries between steps."""

    city_id: int
    counts: np.ndarray
    lockdown: bool
    beta_effective: float
    infected_threshold: int


def aggregate(agent_cities: np.ndarray, agent_statuses: np.ndarray,
              city_id: int) -> np.ndarray:
    """Census of the agents currently in a city.

    Returns int64 counts indexed (S, E, I, R); their sum equals the
    roster size.  Raises ForeignAgent if any agent's current city
    disagrees with the coordinator's.
    """
    if agent_cities.size and not np.all(agent_cities == city_id):
        stranger = int(np.flatnonzero(agent_cities != city_id)[0])
        raise ForeignAgent(
            f"agent at roster position {stranger} is in city "
            f"{int(agent_cities[stranger])}, not {city_id}"
        )
    return np.bincount(agent_statuses, minlength=4).astype(np.int64)


def apply_policy(
    counts: np.ndarray,
    policy: LockdownPolicy,
    beta_base: float,
    already_locked: bool = False,
    latching: bool = True,
) -> tuple[bool, float, MobilityGate]:
    """Decide lockdown, effective contagion rate and the mobility gate.

    Lockdown engages when the infected census reaches the threshold and
    the policy mode is not NONE; with latching (the default) it stays
    engaged for the rest of the run once triggered.
    """
    triggered = policy.mode is not PolicyMode.NONE and int(counts[I]) >= policy.infected_threshold
    lockdown = triggered or (latching and already_locked and policy.mode is not PolicyMode.NONE)
    if not lockdown:
        return False, beta_base, MobilityGate.OPEN
    beta_eff = beta_base * policy.lockdown_contagion_factor
    if policy.mode is PolicyMode.FULL:
        gate = MobilityGate.CLOSED
    else:
        gate = MobilityGate.ESSENTIAL_ONLY
    return True, beta_eff, gate


def discretize_conserving(real_values: np.ndarray, target_total: int) -> np.ndarray:
    """Largest-remainder rounding of nonnegative reals to a fixed total.

    Floors every component, then hands the remaining units one each to
    the largest fractional parts, ties going to the lowest index.  The
    output sums to target_total exactly and each component moves by
    less than one from its input.  The caller guarantees the inputs sum
    to within 0.5 of the target (continuous-model conservation);
    anything else is an upstream bug reported as TotalMismatch.
    """
    values = np.asarray(real_values, dtype=np.float64)
    total = float(values.sum())
    if abs(total - target_total) >= 0.5:
        raise TotalMismatch(
            f"compartments sum to {total}, target {target_total}"
        )
    floors = np.floor(values).astype(np.int64)
    leftover = int(target_total - floors.sum())
    if leftover:
        fractions = values - floors
        # Stable sort on -fraction keeps the lowest index first on ties.
        order = np.argsort(-fractions, kind="stable")
        floors[order[:leftover]] += 1
    return floors


def forward_flows(old_counts: np.ndarray, new_counts: np.ndarray,
                  error: type[Exception]) -> np.ndarray:
    """Flow sizes along a one-directional compartment chain.

    flows[k] is how many members must cross from compartment k to k+1,
    from the cumulative census differences.  Raises ``error`` when the
    new census is not reachable by forward flows (some cumulative total
    grew, or the grand totals differ).
    """
    old = np.asarray(old_counts, dtype=np.int64)
    new = np.asarray(new_counts, dtype=np.int64)
    if old.sum() != new.sum():
        raise error(f"totals differ: {old.sum()} -> {new.sum()}")
    flows = np.cumsum(old)[:-1] - np.cumsum(new)[:-1]
    if np.any(flows < 0):
        k = int(np.flatnonzero(flows < 0)[0])
        raise error(
            f"cumulative count through compartment {k} grew "
            f"({old[: k + 1].sum()} -> {new[: k + 1].sum()}); not reachable "
            "by forward flows"
        )
    return flows


def chain_transitions(
    members_by_compartment: list[np.ndarray],
    flows: np.ndarray,
    rng: RngStream,
) -> dict[int, int]:
    """Pick which members realize the forward flows along a chain.

    members_by_compartment[k] holds the ids currently in compartment k,
    sorted ascending.  For each flow k -> k+1, movers are a uniform
    sample without replacement; members that were in the compartment
    before this cycle leave before any member that arrived during it
    (last in, last out), so a large flow first drains the old layer and
    only then dips into the newcomers.  Returns {id: final compartment}
    for every member that moved.
    """
    final: dict[int, int] = {}
    arrivals = np.empty(0, dtype=np.int64)
    for k, flow in enumerate(flows):
        flow = int(flow)
        old_layer = members_by_compartment[k]
        take_old = min(flow, len(old_layer))
        moved = sample_without_replacement(old_layer, take_old, rng)
        if flow > take_old:
            fresh = sample_without_replacement(arrivals, flow - take_old, rng)
            moved = np.concatenate([moved, fresh])
            arrivals = np.setdiff1d(arrivals, fresh, assume_unique=True)
        for ident in moved:
            final[int(ident)] = k + 1
        arrivals = np.sort(moved)
    return final


def assign_transitions(
    roster_ids: np.ndarray,
    statuses: np.ndarray,
    old_counts: np.ndarray,
    new_counts: np.ndarray,
    rng: RngStream,
) -> list[tuple[int, int]]:
    """Choose which agents change status to realize the new census.

    roster_ids are the ids of the agents in this city, ascending;
    statuses are their current codes, aligned with roster_ids.  The
    selection is a pure function of the inputs and the stream state.
    Raises UnreachableCensus when the new census would need a backward
    transition.

    Returns (agent_id, new_status) pairs, one per agent that changes,
    sorted by agent id.
    """
    flows = forward_flows(old_counts, new_counts, UnreachableCensus)
    members = [roster_ids[statuses == code] for code in (S, E, I)]
    moved = chain_transitions(members, flows, rng)
    return sorted(moved.items())
