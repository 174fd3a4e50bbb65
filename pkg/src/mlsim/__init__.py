"""Multilevel micro/macro simulation engine.

A discrete time-stepped agent layer coupled with continuous
compartmental ODE layers, executed deterministically in parallel.  Two
bundled scenarios: a multi-city epidemic with lockdown policies and a
grid-based vehicle pollution model with fleet transition.
"""

from .config import RunConfig, config_from_dict, parse_config
from .coordinator import (
    LocationState,
    LockdownPolicy,
    MobilityGate,
    PolicyMode,
    aggregate,
    apply_policy,
    assign_transitions,
    discretize_conserving,
)
from .core import (
    Hierarchy,
    ModelNode,
    NodeKind,
    SimClock,
    adapt_lod,
    build_hierarchy,
    run_bracketed,
    run_siblings_parallel,
)
from .epidemic import AgentPopulation, EpidemicSimulation, init_population, move_agents
from .exchange import ExchangeRecord, read_exchange, write_exchange
from .ode import (
    CompartmentState,
    FleetParams,
    SeirParams,
    fleet_derivative,
    integrate,
    seir_derivative,
)
from .output import OutputRow, emit_svg_plots, write_csv
from .pollution import (
    PollutionGrid,
    PollutionSimulation,
    VehicleFleet,
    add_global_electric_pollution,
    diffuse,
    evaporate,
    move_vehicles,
    update_fleet,
)
from .rng import RngStream, derive_stream

__version__ = "0.1.0"
