"""Run configuration: JSON parsing, strict validation, defaults.

Configs are JSON objects.  Unknown keys are rejected everywhere (the
cheapest typo detector there is), every default lives in the
``DEFAULTS`` table below, and every violation is reported as a
SchemaError naming the file and the dotted key path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaError

MAX_SEED = 2**64 - 1

# Reference table of every defaultable key (mirrored in the README).
DEFAULTS = {
    "master_seed": 42,
    "steps": 200,
    "worker_count": 1,
    "exchange_mode": "in_process",
    "integrator.dt": 0.25,
    "integrator.dt_min": 0.03125,
    "integrator.dt_max": 1.0,
    "integrator.g_threshold": 0.05,
    "integrator.adaptive": True,
    "epidemic.beta": 0.001,
    "epidemic.sigma": 0.2,
    "epidemic.gamma": 0.1,
    "epidemic.move_probability": 0.01,
    "epidemic.essential_fraction": 0.1,
    "epidemic.cities[i].population": 1000,
    "epidemic.cities[i].beta": "epidemic.beta",
    "epidemic.cities[i].move_probability": "epidemic.move_probability",
    "epidemic.policy.mode": "none",
    "epidemic.policy.lockdown_contagion_factor": 0.5,
    "epidemic.policy.infected_threshold": None,
    "epidemic.policy.infected_threshold_fraction": 0.05,
    "epidemic.policy.latching": True,
    "pollution.grid.width": 50,
    "pollution.grid.height": 50,
    "pollution.fleet.petrol": 450,
    "pollution.fleet.lpg": 50,
    "pollution.fleet.electric": 0,
    "pollution.deposit_lpg": 0.05,
    "pollution.diffusion_fraction": 0.5,
    "pollution.evaporation": 0.01,
    "pollution.electricity_production_pollution": 0.0,
    "pollution.fleet_update_period": 10,
    "pollution.rates.beta": 0.003,
    "pollution.rates.sigma": 0.001,
    "pollution.rates.gamma": 0.005,
}


@dataclass
class IntegratorConfig:
    dt: float
    dt_min: float
    dt_max: float
    g_threshold: float
    adaptive: bool


@dataclass
class CityConfig:
    population: int
    beta: float
    move_probability: float
    infected_threshold: int


@dataclass
class PolicyConfig:
    mode: str
    lockdown_contagion_factor: float
    infected_threshold: int | None
    infected_threshold_fraction: float
    latching: bool


@dataclass
class EpidemicConfig:
    beta: float
    sigma: float
    gamma: float
    move_probability: float
    essential_fraction: float
    policy: PolicyConfig
    cities: list[CityConfig] = field(default_factory=list)


@dataclass
class PollutionConfig:
    grid_width: int
    grid_height: int
    petrol: int
    lpg: int
    electric: int
    deposit_lpg: float
    diffusion_fraction: float
    evaporation: float
    electricity_production_pollution: float
    fleet_update_period: int
    beta: float
    sigma: float
    gamma: float

    @property
    def num_vehicles(self) -> int:
        return self.petrol + self.lpg + self.electric


@dataclass
class RunConfig:
    scenario: str
    master_seed: int
    steps: int
    worker_count: int
    exchange_mode: str
    integrator: IntegratorConfig
    epidemic: EpidemicConfig | None = None
    pollution: PollutionConfig | None = None


class _Section:
    """One JSON object being validated; tracks consumed keys."""

    def __init__(self, data, where: str, prefix: str):
        if not isinstance(data, dict):
            raise SchemaError(where, prefix or "<root>", "must be an object")
        self.data = dict(data)
        self.where = where
        self.prefix = prefix

    def _path(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key

    def fail(self, key: str, reason: str):
        raise SchemaError(self.where, self._path(key), reason)

    def take(self, key: str, default=None, required: bool = False):
        if key not in self.data:
            if required:
                self.fail(key, "required key is missing")
            return default
        return self.data.pop(key)

    def take_number(self, key: str, default, low=None, high=None,
                    integer: bool = False, required: bool = False,
                    allow_none: bool = False):
        if key not in self.data:
            if required:
                self.fail(key, "required key is missing")
            return default
        value = self.data.pop(key)
        if value is None:
            if allow_none:
                return None
            self.fail(key, "expected a number, got null")
        ok_types = (int,) if integer else (int, float)
        if isinstance(value, bool) or not isinstance(value, ok_types):
            self.fail(key, f"expected {'an integer' if integer else 'a number'}, "
                           f"got {value!r}")
        if low is not None and value < low:
            self.fail(key, f"must be >= {low}, got {value}")
        if high is not None and value > high:
            self.fail(key, f"must be <= {high}, got {value}")
        return value

    def take_bool(self, key: str, default):
        value = self.take(key, default)
        if not isinstance(value, bool):
            self.fail(key, f"expected true/false, got {value!r}")
        return value

    def take_choice(self, key: str, choices, default=None, required: bool = False):
        value = self.take(key, default, required)
        if value not in choices:
            self.fail(key, f"expected one of {sorted(choices)}, got {value!r}")
        return value

    def subsection(self, key: str) -> "_Section":
        value = self.take(key, {})
        return _Section(value, self.where, self._path(key))

    def finish(self):
        if self.data:
            key = sorted(self.data)[0]
            self.fail(key, "unknown key")


def _parse_integrator(sec: _Section) -> IntegratorConfig:
    dt = sec.take_number("dt", DEFAULTS["integrator.dt"])
    dt_min = sec.take_number("dt_min", DEFAULTS["integrator.dt_min"])
    dt_max = sec.take_number("dt_max", DEFAULTS["integrator.dt_max"])
    g_threshold = sec.take_number("g_threshold", DEFAULTS["integrator.g_threshold"], low=0.0)
    adaptive = sec.take_bool("adaptive", DEFAULTS["integrator.adaptive"])
    sec.finish()
    if not (0 < dt_min <= dt <= dt_max):
        sec.fail("dt", f"need 0 < dt_min <= dt <= dt_max, got "
                       f"{dt_min}, {dt}, {dt_max}")
    return IntegratorConfig(dt=dt, dt_min=dt_min, dt_max=dt_max,
                            g_threshold=g_threshold, adaptive=adaptive)


def _parse_policy(sec: _Section) -> PolicyConfig:
    mode = sec.take_choice(
        "mode", {"none", "full", "essential_only"},
        DEFAULTS["epidemic.policy.mode"],
    )
    factor = sec.take_number(
        "lockdown_contagion_factor",
        DEFAULTS["epidemic.policy.lockdown_contagion_factor"],
        low=0.0, high=1.0,
    )
    if factor == 0.0:
        sec.fail("lockdown_contagion_factor", "must be in (0, 1]")
    threshold = sec.take_number("infected_threshold", None, low=0,
                                integer=True, allow_none=True)
    fraction = sec.take_number(
        "infected_threshold_fraction",
        DEFAULTS["epidemic.policy.infected_threshold_fraction"],
        low=0.0, high=1.0,
    )
    latching = sec.take_bool("latching", DEFAULTS["epidemic.policy.latching"])
    sec.finish()
    return PolicyConfig(
        mode=mode,
        lockdown_contagion_factor=factor,
        infected_threshold=threshold,
        infected_threshold_fraction=fraction,
        latching=latching,
    )


def _parse_epidemic(sec: _Section) -> EpidemicConfig:
    beta = sec.take_number("beta", DEFAULTS["epidemic.beta"], low=0.0)
    sigma = sec.take_number("sigma", DEFAULTS["epidemic.sigma"], low=0.0)
    gamma = sec.take_number("gamma", DEFAULTS["epidemic.gamma"], low=0.0)
    p = sec.take_number(
        "move_probability", DEFAULTS["epidemic.move_probability"],
        low=0.0, high=1.0,
    )
    essential = sec.take_number(
        "essential_fraction", DEFAULTS["epidemic.essential_fraction"],
        low=0.0, high=1.0,
    )
    policy = _parse_policy(sec.subsection("policy"))

    raw_cities = sec.take("cities", required=True)
    if not isinstance(raw_cities, list) or not raw_cities:
        sec.fail("cities", "expected a non-empty list of city objects")
    cities = []
    for idx, raw in enumerate(raw_cities):
        csec = _Section(raw, sec.where, f"{sec.prefix}.cities[{idx}]")
        population = csec.take_number(
            "population", DEFAULTS["epidemic.cities[i].population"],
            low=1, integer=True,
        )
        city_beta = csec.take_number("beta", beta, low=0.0)
        city_p = csec.take_number("move_probability", p, low=0.0, high=1.0)
        csec.finish()
        if policy.infected_threshold is not None:
            threshold = policy.infected_threshold
        else:
            threshold = max(1, round(policy.infected_threshold_fraction * population))
        cities.append(
            CityConfig(
                population=population,
                beta=city_beta,
                move_probability=city_p,
                infected_threshold=threshold,
            )
        )
    sec.finish()
    return EpidemicConfig(
        beta=beta, sigma=sigma, gamma=gamma, move_probability=p,
        essential_fraction=essential, policy=policy, cities=cities,
    )


def _parse_pollution(sec: _Section) -> PollutionConfig:
    grid = sec.subsection("grid")
    width = grid.take_number("width", DEFAULTS["pollution.grid.width"], low=1, integer=True)
    height = grid.take_number("height", DEFAULTS["pollution.grid.height"], low=1, integer=True)
    grid.finish()

    fleet = sec.subsection("fleet")
    petrol = fleet.take_number("petrol", DEFAULTS["pollution.fleet.petrol"], low=0, integer=True)
    lpg = fleet.take_number("lpg", DEFAULTS["pollution.fleet.lpg"], low=0, integer=True)
    electric = fleet.take_number("electric", DEFAULTS["pollution.fleet.electric"], low=0, integer=True)
    fleet.finish()
    if petrol + lpg + electric == 0:
        sec.fail("fleet", "needs at least one vehicle")

    deposit = sec.take_number("deposit_lpg", DEFAULTS["pollution.deposit_lpg"], low=0.0)
    diffusion = sec.take_number(
        "diffusion_fraction", DEFAULTS["pollution.diffusion_fraction"],
        low=0.0, high=1.0,
    )
    evaporation = sec.take_number("evaporation", DEFAULTS["pollution.evaporation"], low=0.0)
    epol = sec.take_number(
        "electricity_production_pollution",
        DEFAULTS["pollution.electricity_production_pollution"], low=0.0,
    )
    period = sec.take_number(
        "fleet_update_period", DEFAULTS["pollution.fleet_update_period"],
        low=1, integer=True,
    )
    rates = sec.subsection("rates")
    beta = rates.take_number("beta", DEFAULTS["pollution.rates.beta"], low=0.0)
    sigma = rates.take_number("sigma", DEFAULTS["pollution.rates.sigma"], low=0.0)
    gamma = rates.take_number("gamma", DEFAULTS["pollution.rates.gamma"], low=0.0)
    rates.finish()
    sec.finish()
    return PollutionConfig(
        grid_width=width, grid_height=height,
        petrol=petrol, lpg=lpg, electric=electric,
        deposit_lpg=deposit, diffusion_fraction=diffusion,
        evaporation=evaporation, electricity_production_pollution=epol,
        fleet_update_period=period, beta=beta, sigma=sigma, gamma=gamma,
    )


def config_from_dict(data: dict, where: str = "<dict>") -> RunConfig:
    """Validate a configuration mapping into a RunConfig."""
    root = _Section(data, where, "")
    scenario = root.take_choice("scenario", {"epidemic", "pollution"}, required=True)
    master_seed = root.take_number(
        "master_seed", DEFAULTS["master_seed"], low=0, high=MAX_SEED, integer=True
    )
    steps = root.take_number("steps", DEFAULTS["steps"], low=1, integer=True)
    workers = root.take_number(
        "worker_count", DEFAULTS["worker_count"], low=1, integer=True
    )
    exchange_mode = root.take_choice(
        "exchange_mode", {"in_process", "json_files"}, DEFAULTS["exchange_mode"]
    )
    integrator = _parse_integrator(root.subsection("integrator"))

    # The inactive scenario block is still validated when present, so a
    # shared config file stays well-formed for both subcommands.
    epidemic = None
    pollution = None
    if scenario == "epidemic" and "epidemic" not in root.data:
        root.fail("epidemic", "required for the epidemic scenario")
    if "epidemic" in root.data:
        epidemic = _parse_epidemic(root.subsection("epidemic"))
    if scenario == "pollution" or "pollution" in root.data:
        pollution = _parse_pollution(root.subsection("pollution"))
    root.finish()

    return RunConfig(
        scenario=scenario,
        master_seed=master_seed,
        steps=steps,
        worker_count=workers,
        exchange_mode=exchange_mode,
        integrator=integrator,
        epidemic=epidemic,
        pollution=pollution,
    )


def parse_config(path: str | Path) -> RunConfig:
    """Load and validate a JSON run configuration file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), "<json>", f"invalid JSON: {exc}") from exc
    return config_from_dict(data, where=str(path))
