"""Agent-based mobility layer and the coupled epidemic run loop.

Agents live in parallel arrays indexed by agent id (home city, current
city, status, occupation).  Each step the per-city coordinators
aggregate statuses, apply lockdown policy, run the epidemic ODE across
the bracketed interval (cities in parallel), push the discretized
result back onto agents, and finally the single-threaded movement phase
relocates a random fraction of the non-infected population.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coordinator import (
    ESSENTIAL,
    I,
    LocationState,
    LockdownPolicy,
    MobilityGate,
    PolicyMode,
    S,
    STATUS_LABELS,
    aggregate,
    apply_policy,
    assign_transitions,
    discretize_conserving,
)
from .config import RunConfig
from .core import (
    Hierarchy,
    SimClock,
    adapt_lod,
    build_hierarchy,
    run_bracketed,
    run_siblings_parallel,
)
from .errors import EmptyPopulation
from .exchange import MICRO_TO_MACRO, ExchangeRecord, read_exchange, write_exchange
from .ode import SEIR_LABELS, CompartmentState, SeirParams, seir_rhs
from .output import OutputRow
from .rng import RngStream, derive_stream


class SingleCityWarning(UserWarning):
    """Movement requested with only one city; the phase is a no-op."""


@dataclass
class AgentPopulation:
    """Micro-layer state: one row per agent, indexed by agent id."""

    home: np.ndarray        # int32, home city id
    city: np.ndarray        # int32, current city id
    status: np.ndarray      # int8, S/E/I/R code
    occupation: np.ndarray  # int8, REGULAR or ESSENTIAL

    @property
    def n(self) -> int:
        return len(self.status)

    def census(self, num_cities: int) -> np.ndarray:
        """(num_cities, 4) status counts keyed by current city."""
        joint = self.city.astype(np.int64) * 4 + self.status
        flat = np.bincount(joint, minlength=num_cities * 4)
        return flat.reshape(num_cities, 4)


def init_population(populations: list[int], essential_fraction: float,
                    rng: RngStream) -> AgentPopulation:
    """Create agents at home, all susceptible but one patient zero.

    Agent ids are assigned city block by city block.  Draw order is
    fixed: one occupation draw per agent in id order, then the patient
    zero index; identical seeds therefore produce identical
    populations.
    """
    if not populations or sum(populations) < 1:
        raise EmptyPopulation("need at least one city and one agent")
    counts = np.asarray(populations, dtype=np.int64)
    home = np.repeat(np.arange(len(counts), dtype=np.int32), counts)
    n = len(home)
    occupation = (rng.random(n) < essential_fraction).astype(np.int8)
    status = np.full(n, S, dtype=np.int8)
    patient_zero = int(rng.integers(n))
    status[patient_zero] = I
    return AgentPopulation(
        home=home, city=home.copy(), status=status, occupation=occupation
    )


def move_agents(
    pop: AgentPopulation,
    p_by_city: np.ndarray,
    gates: list[MobilityGate],
    rng: RngStream,
) -> int:
    """Relocate agents between cities; returns how many moved.

    Each agent, in id order, moves when its uniform draw falls below
    its current city's move probability, it is not infected, and the
    city's gate admits it (CLOSED admits nobody, ESSENTIAL_ONLY only
    essential workers).  Destinations are uniform over the other
    cities.  One probability draw is consumed per agent regardless of
    eligibility, so stream use depends only on the population size.
    """
    num_cities = len(p_by_city)
    if num_cities < 2:
        warnings.warn(
            "movement phase needs at least two cities; skipping",
            SingleCityWarning,
            stacklevel=2,
        )
        return 0

    u = rng.random(pop.n)
    closed = np.array([g is MobilityGate.CLOSED for g in gates])
    badge_only = np.array([g is MobilityGate.ESSENTIAL_ONLY for g in gates])
    eligible = (pop.status != I) & ~closed[pop.city]
    eligible &= ~badge_only[pop.city] | (pop.occupation == ESSENTIAL)

    movers = np.flatnonzero((u < p_by_city[pop.city]) & eligible)
    if len(movers):
        # Uniform over the other cities: draw in [0, n-1) and skip self.
        raw = rng.integers(num_cities - 1, size=len(movers))
        dest = raw + (raw >= pop.city[movers])
        pop.city[movers] = dest.astype(np.int32)
    return int(len(movers))


@dataclass
class CityStepReport:
    """Per-city diagnostics for one step."""

    city_id: int
    old_counts: np.ndarray
    ode_values: np.ndarray
    new_counts: np.ndarray
    census_after_assign: np.ndarray
    lockdown: bool


@dataclass
class StepReport:
    step: int
    cities: list[CityStepReport]
    movers: int


class EpidemicSimulation:
    """Full multi-city epidemic run: micro mobility + per-city macro ODE.

    Deterministic given (config, master seed): all randomness flows
    through derived streams, cities integrate independently inside each
    bracketed interval, and results merge in node-id order.
    """

    def __init__(self, config: RunConfig, exchange_dir: Path | None = None):
        if config.scenario != "epidemic":
            raise ValueError(f"not an epidemic config: {config.scenario}")
        self.config = config
        self.exchange_dir = exchange_dir
        epi = config.epidemic
        self.num_cities = len(epi.cities)
        self.tree: Hierarchy = build_hierarchy(config)
        self.clock = SimClock()

        init_stream = derive_stream(config.master_seed, "init", 0)
        self.pop = init_population(
            [c.population for c in epi.cities], epi.essential_fraction, init_stream
        )
        self.move_stream = derive_stream(config.master_seed, "agent-move", 0)
        self.assign_streams: list[RngStream] = [
            derive_stream(config.master_seed, "coordinator-assign", c)
            for c in range(self.num_cities)
        ]
        self.patient_zero_city = int(self.pop.home[self.pop.status == I][0])

        self.policies: list[LockdownPolicy] = []
        self.locations: list[LocationState] = []
        for c, city in enumerate(epi.cities):
            threshold = city.infected_threshold
            policy = LockdownPolicy(
                mode=PolicyMode(epi.policy.mode),
                lockdown_contagion_factor=epi.policy.lockdown_contagion_factor,
                infected_threshold=threshold,
            )
            self.policies.append(policy)
            self.locations.append(
                LocationState(
                    city_id=c,
                    counts=np.zeros(4, dtype=np.int64),
                    lockdown=False,
                    beta_effective=city.beta,
                    infected_threshold=threshold,
                )
            )
        self.p_by_city = np.array(
            [c.move_probability for c in epi.cities], dtype=np.float64
        )
        self.prev_infected = self.pop.census(self.num_cities)[:, I].copy()
        self.rows: list[OutputRow] = []
        self._log_rows()

    # node-id helpers: city c has coordinator 1+c and macro child 1+n+c
    def _coord_node(self, c: int):
        return self.tree[1 + c]

    def _macro_node(self, c: int):
        return self.tree[1 + self.num_cities + c]

    def _log_rows(self) -> None:
        census = self.pop.census(self.num_cities)
        for c in range(self.num_cities):
            self.rows.append(
                OutputRow(
                    step=self.clock.step_index,
                    node_id=1 + c,
                    values=tuple(int(v) for v in census[c]),
                )
            )

    def step(self) -> StepReport:
        """One bracketed interval: aggregate, macro ODE, assign, move."""
        epi = self.config.epidemic
        t0, t1 = self.clock.now, self.clock.next_event
        rosters = [
            np.flatnonzero(self.pop.city == c) for c in range(self.num_cities)
        ]

        # Single-threaded pre-phase: censuses, policy, level of detail,
        # and the micro-to-macro exchange (all I/O stays on this thread).
        records: list[ExchangeRecord] = []
        gates: list[MobilityGate] = []
        for c in range(self.num_cities):
            roster = rosters[c]
            counts = aggregate(
                self.pop.city[roster], self.pop.status[roster], c
            )
            loc = self.locations[c]
            if self.config.integrator.adaptive:
                growth = (counts[I] - self.prev_infected[c]) / max(
                    self.prev_infected[c], 1
                )
                adapt_lod(
                    self._macro_node(c), growth, self.config.integrator.g_threshold
                )
            lockdown, beta_eff, gate = apply_policy(
                counts,
                self.policies[c],
                epi.cities[c].beta,
                already_locked=loc.lockdown,
                latching=epi.policy.latching,
            )
            loc.counts = counts
            loc.lockdown = lockdown
            loc.beta_effective = beta_eff
            gates.append(gate)

            record = ExchangeRecord(
                time=t0,
                node_id=self._macro_node(c).id,
                direction=MICRO_TO_MACRO,
                compartments={
                    lab: float(v) for lab, v in zip(STATUS_LABELS, counts)
                },
                params={"beta": beta_eff, "sigma": epi.sigma, "gamma": epi.gamma},
            )
            if self.exchange_dir is not None:
                record = read_exchange(write_exchange(record, self.exchange_dir))
            records.append(record)

        # Parallel phase: one independent ODE bracket per city.
        def macro_task(coord_node):
            c = coord_node.id - 1
            rec = records[c]
            params = SeirParams(
                beta=rec.params["beta"],
                sigma=rec.params["sigma"],
                gamma=rec.params["gamma"],
            )
            state = CompartmentState(
                SEIR_LABELS, [rec.compartments[lab] for lab in SEIR_LABELS]
            )
            return run_bracketed(
                self._macro_node(c),
                lambda y: seir_rhs(y, params),
                state,
                t0,
                t1,
            )

        coord_nodes = [self._coord_node(c) for c in range(self.num_cities)]
        results = run_siblings_parallel(
            coord_nodes, macro_task, self.config.worker_count
        )

        # Merge phase, node-id order: discretize and update agents.
        city_reports = []
        for c, result in enumerate(results):
            roster = rosters[c]
            old_counts = self.locations[c].counts
            new_counts = discretize_conserving(result.values, len(roster))
            updates = assign_transitions(
                roster,
                self.pop.status[roster],
                old_counts,
                new_counts,
                self.assign_streams[c],
            )
            if updates:
                ids = np.fromiter((i for i, _ in updates), dtype=np.int64)
                codes = np.fromiter((s for _, s in updates), dtype=np.int8)
                self.pop.status[ids] = codes
            census_after = aggregate(self.pop.city[roster], self.pop.status[roster], c)
            city_reports.append(
                CityStepReport(
                    city_id=c,
                    old_counts=old_counts,
                    ode_values=result.values,
                    new_counts=new_counts,
                    census_after_assign=census_after,
                    lockdown=self.locations[c].lockdown,
                )
            )
            self.prev_infected[c] = new_counts[I]

        movers = move_agents(self.pop, self.p_by_city, gates, self.move_stream)
        self.clock.advance()
        self._log_rows()
        return StepReport(step=self.clock.step_index, cities=city_reports, movers=movers)

    def run(self) -> list[OutputRow]:
        for _ in range(self.config.steps):
            self.step()
        return self.rows
