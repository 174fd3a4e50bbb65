"""Vehicle pollution on a toroidal patch grid, coupled to the fleet ODE.

Each step every vehicle hops one patch in a random Moore direction and
deposits pollutant according to its fuel (petrol twice the LPG amount,
electric nothing locally), pollution diffuses synchronously to the 8
neighbors, the grid gains the uniformly spread electric-production
share, and evaporation removes a fixed quantity per patch.  Every n
steps the fleet ODE runs across the elapsed bracket and the resulting
compartment counts are pushed back onto vehicles as one-way fuel
conversions (petrol to LPG, petrol to electric, LPG to electric).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .coordinator import chain_transitions, discretize_conserving, forward_flows
from .core import Hierarchy, SimClock, build_hierarchy, run_bracketed, run_siblings_parallel
from .errors import UnreachableFleet
from .exchange import MICRO_TO_MACRO, ExchangeRecord, read_exchange, write_exchange
from .ode import FLEET_LABELS, CompartmentState, FleetParams, fleet_rhs
from .output import OutputRow, write_grid_csv
from .rng import RngStream, derive_stream

PETROL, LPG, ELECTRIC = 0, 1, 2
FUEL_LABELS = FLEET_LABELS  # P, L, E

# Moore directions in fixed index order; vehicles draw an index in [0, 8).
_DIR_X = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)
_DIR_Y = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)

# Local deposit per step, as multiples of the LPG amount.
_DEPOSIT_FACTOR = np.array([2.0, 1.0, 0.0])


@dataclass
class PollutionGrid:
    """Toroidal patch grid; levels[y, x] is the pollutant on patch (x, y)."""

    width: int
    height: int
    levels: np.ndarray

    @classmethod
    def zeros(cls, width: int, height: int) -> "PollutionGrid":
        return cls(width=width, height=height,
                   levels=np.zeros((height, width), dtype=np.float64))

    def total(self) -> float:
        return float(self.levels.sum())


@dataclass
class VehicleFleet:
    """One row per vehicle, indexed by vehicle id."""

    fuel: np.ndarray  # int8, PETROL/LPG/ELECTRIC
    x: np.ndarray     # int64 patch column
    y: np.ndarray     # int64 patch row

    @property
    def n(self) -> int:
        return len(self.fuel)

    def counts(self) -> np.ndarray:
        return np.bincount(self.fuel, minlength=3).astype(np.int64)


def init_fleet(petrol: int, lpg: int, electric: int, width: int, height: int,
               rng: RngStream) -> VehicleFleet:
    """Vehicles with block-assigned fuel types on uniform random patches."""
    fuel = np.repeat(
        np.array([PETROL, LPG, ELECTRIC], dtype=np.int8),
        [petrol, lpg, electric],
    )
    n = len(fuel)
    x = rng.integers(width, size=n).astype(np.int64)
    y = rng.integers(height, size=n).astype(np.int64)
    return VehicleFleet(fuel=fuel, x=x, y=y)


def move_vehicles(fleet: VehicleFleet, grid: PollutionGrid, deposit_lpg: float,
                  rng: RngStream) -> None:
    """One random Moore hop per vehicle (torus), depositing on arrival."""
    dirs = rng.integers(8, size=fleet.n)
    fleet.x = (fleet.x + _DIR_X[dirs]) % grid.width
    fleet.y = (fleet.y + _DIR_Y[dirs]) % grid.height
    deposits = _DEPOSIT_FACTOR[fleet.fuel] * deposit_lpg
    np.add.at(grid.levels, (fleet.y, fleet.x), deposits)


def diffuse(grid: PollutionGrid, d: float) -> PollutionGrid:
    """Synchronous Moore diffusion: keep (1-d), send d/8 to each neighbor.

    Double-buffered (reads the old grid, writes a new one), so the
    update order of patches cannot matter.  Total pollution on the
    torus is conserved up to float associativity.
    """
    if not (0.0 <= d <= 1.0):
        raise ValueError(f"diffusion fraction must be in [0, 1], got {d}")
    v = grid.levels
    incoming = np.zeros_like(v)
    for dx, dy in zip(_DIR_X, _DIR_Y):
        incoming += np.roll(v, shift=(dy, dx), axis=(0, 1))
    grid.levels = (1.0 - d) * v + (d / 8.0) * incoming
    return grid


def evaporate(grid: PollutionGrid, e: float) -> PollutionGrid:
    """Remove a fixed quantity per patch, clamped at zero."""
    if e < 0:
        raise ValueError(f"evaporation must be >= 0, got {e}")
    np.maximum(grid.levels - e, 0.0, out=grid.levels)
    return grid


def add_global_electric_pollution(grid: PollutionGrid, num_electric: int,
                                  epol: float) -> PollutionGrid:
    """Spread the electricity-production share uniformly over all patches.

    Adds num_electric * epol in total per step, regardless of where the
    electric vehicles are.
    """
    if num_electric and epol:
        grid.levels += num_electric * epol / (grid.width * grid.height)
    return grid


def update_fleet(fleet: VehicleFleet, new_counts: np.ndarray,
                 rng: RngStream) -> list[tuple[int, int]]:
    """Convert vehicles so the fuel census matches the macro result.

    new_counts comes from discretize_conserving on the fleet ODE
    output.  Conversions run only forward (petrol to LPG to electric,
    with petrol-to-electric realized through the chain), vehicles are
    picked uniformly without replacement in id order, and the census
    afterwards matches new_counts exactly.  Returns the applied
    (vehicle_id, new_fuel) pairs.
    """
    old_counts = fleet.counts()
    flows = forward_flows(old_counts, new_counts, UnreachableFleet)
    ids = np.arange(fleet.n, dtype=np.int64)
    members = [ids[fleet.fuel == code] for code in (PETROL, LPG)]
    moved = chain_transitions(members, flows, rng)
    updates = sorted(moved.items())
    if updates:
        idx = np.fromiter((i for i, _ in updates), dtype=np.int64)
        codes = np.fromiter((f for _, f in updates), dtype=np.int8)
        fleet.fuel[idx] = codes
    return updates


class PollutionSimulation:
    """Grid micro model with a periodically bracketed fleet macro model.

    With grid_dump_dir set, every grid_dump_period-th step (and step 0)
    the full patch matrix is written as grid_<step>.csv.
    """

    def __init__(self, config: RunConfig, exchange_dir: Path | None = None,
                 grid_dump_dir: Path | None = None, grid_dump_period: int = 1):
        if config.scenario != "pollution":
            raise ValueError(f"not a pollution config: {config.scenario}")
        if grid_dump_period < 1:
            raise ValueError("grid_dump_period must be >= 1")
        self.config = config
        self.exchange_dir = exchange_dir
        self.grid_dump_dir = grid_dump_dir
        self.grid_dump_period = grid_dump_period
        pol = config.pollution
        self.params = FleetParams(beta=pol.beta, sigma=pol.sigma, gamma=pol.gamma)
        self.tree: Hierarchy = build_hierarchy(config)
        self.clock = SimClock()
        self.grid = PollutionGrid.zeros(pol.grid_width, pol.grid_height)
        init_stream = derive_stream(config.master_seed, "init", 0)
        self.fleet = init_fleet(
            pol.petrol, pol.lpg, pol.electric,
            pol.grid_width, pol.grid_height, init_stream,
        )
        self.move_stream = derive_stream(config.master_seed, "vehicle-move", 0)
        self.assign_stream = derive_stream(config.master_seed, "fleet-assign", 0)
        self.last_macro_time = 0.0
        self.rows: list[OutputRow] = []
        self._log_row()
        self._dump_grid()

    @property
    def _grid_node_id(self) -> int:
        return 1

    @property
    def _fleet_node(self):
        return self.tree[2]

    def _dump_grid(self) -> None:
        if self.grid_dump_dir is not None:
            write_grid_csv(
                self.grid.levels,
                self.grid_dump_dir / f"grid_{self.clock.step_index}.csv",
            )

    def _log_row(self) -> None:
        counts = self.fleet.counts()
        self.rows.append(
            OutputRow(
                step=self.clock.step_index,
                node_id=self._grid_node_id,
                values=(
                    self.grid.total(),
                    int(counts[PETROL]),
                    int(counts[LPG]),
                    int(counts[ELECTRIC]),
                ),
            )
        )

    def step(self) -> None:
        pol = self.config.pollution
        move_vehicles(self.fleet, self.grid, pol.deposit_lpg, self.move_stream)
        diffuse(self.grid, pol.diffusion_fraction)
        num_electric = int(np.count_nonzero(self.fleet.fuel == ELECTRIC))
        add_global_electric_pollution(
            self.grid, num_electric, pol.electricity_production_pollution
        )
        evaporate(self.grid, pol.evaporation)
        self.clock.advance()

        if self.clock.step_index % pol.fleet_update_period == 0:
            self._macro_update()
        self._log_row()
        if self.clock.step_index % self.grid_dump_period == 0:
            self._dump_grid()

    def _macro_update(self) -> None:
        """Bracketed fleet ODE over the interval since the last update."""
        t1 = self.clock.now
        t0 = self.last_macro_time
        counts = self.fleet.counts()
        record = ExchangeRecord(
            time=t1,
            node_id=self._fleet_node.id,
            direction=MICRO_TO_MACRO,
            compartments={
                lab: float(v) for lab, v in zip(FUEL_LABELS, counts)
            },
            params={
                "beta": self.params.beta,
                "sigma": self.params.sigma,
                "gamma": self.params.gamma,
            },
        )
        if self.exchange_dir is not None:
            record = read_exchange(write_exchange(record, self.exchange_dir))

        params = FleetParams(
            beta=record.params["beta"],
            sigma=record.params["sigma"],
            gamma=record.params["gamma"],
        )
        state = CompartmentState(
            FUEL_LABELS, [record.compartments[lab] for lab in FUEL_LABELS]
        )

        def macro_task(node):
            return run_bracketed(
                node, lambda y: fleet_rhs(y, params), state, t0, t1
            )

        (result,) = run_siblings_parallel(
            [self._fleet_node], macro_task, self.config.worker_count
        )
        new_counts = discretize_conserving(result.values, self.fleet.n)
        update_fleet(self.fleet, new_counts, self.assign_stream)
        self.last_macro_time = t1

    def run(self) -> list[OutputRow]:
        for _ in range(self.config.steps):
            self.step()
        return self.rows
