"""Compartmental models and a fixed-step RK4 integrator.

Two systems are bundled: the four-compartment epidemic model
(susceptible/exposed/infected/recovered, with absolute-count mass
action) and the three-compartment fleet transition model
(petrol/LPG/electric).  Both have derivatives that cancel term by term,
so the total population is conserved analytically; the integrator
preserves it to floating-point accuracy.

The integrator is a classical 4th-order Runge-Kutta scheme with a fixed
sub-step.  A fixed-step scheme is required: the level-of-detail
mechanism in the engine tunes accuracy by manipulating the sub-step
directly, which an error-controlled adaptive solver would not permit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NegativeStateBlowup, NonFiniteState, WrongLabels

SEIR_LABELS = ("S", "E", "I", "R")
FLEET_LABELS = ("P", "L", "E")

# Negatives beyond this are a parameter blowup, not floating-point noise.
NEGATIVE_TOLERANCE = 1e-9

Derivative = Callable[[np.ndarray], np.ndarray]


@dataclass
class CompartmentState:
    """Named nonnegative compartments with a conserved total.

    values are float64 counts (individuals or vehicles), one per label.
    """

    labels: tuple[str, ...]
    values: np.ndarray

    def __init__(self, labels: Sequence[str], values: Sequence[float]):
        self.labels = tuple(labels)
        self.values = np.asarray(values, dtype=np.float64)
        if len(self.labels) != len(self.values):
            raise WrongLabels(
                f"{len(self.labels)} labels for {len(self.values)} values"
            )

    def total(self) -> float:
        return float(self.values.sum())

    def as_dict(self) -> dict[str, float]:
        return {lab: float(v) for lab, v in zip(self.labels, self.values)}


@dataclass(frozen=True)
class SeirParams:
    """Epidemic rates.

    beta is per individual per tick (mass action on absolute counts, so
    configurations must scale it with population size), sigma is the
    exposed-to-infected rate and gamma the recovery rate, both per tick.
    """

    beta: float
    sigma: float
    gamma: float

    def __post_init__(self):
        for name in ("beta", "sigma", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class FleetParams:
    """Fleet transition rates, per tick.

    beta: petrol to LPG; sigma: petrol to electric; gamma: LPG to
    electric.  No reverse transitions exist.
    """

    beta: float
    sigma: float
    gamma: float

    def __post_init__(self):
        for name in ("beta", "sigma", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def _check_labels(state: CompartmentState, expected: tuple[str, ...]) -> None:
    if state.labels != expected:
        raise WrongLabels(f"expected labels {expected}, got {state.labels}")


def seir_derivative(state: CompartmentState, params: SeirParams) -> np.ndarray:
    """Time derivative of (S, E, I, R) under mass action on counts."""
    _check_labels(state, SEIR_LABELS)
    return seir_rhs(state.values, params)


def seir_rhs(values: np.ndarray, params: SeirParams) -> np.ndarray:
    s, e, i, _ = values
    infection = params.beta * i * s
    incubation = params.sigma * e
    recovery = params.gamma * i
    return np.array(
        [-infection, infection - incubation, incubation - recovery, recovery]
    )


def fleet_derivative(state: CompartmentState, params: FleetParams) -> np.ndarray:
    """Time derivative of (P, L, E) under one-directional transitions."""
    _check_labels(state, FLEET_LABELS)
    return fleet_rhs(state.values, params)


def fleet_rhs(values: np.ndarray, params: FleetParams) -> np.ndarray:
    p, l, _ = values
    petrol_to_lpg = params.beta * p
    petrol_to_electric = params.sigma * p
    lpg_to_electric = params.gamma * l
    return np.array(
        [
            -petrol_to_lpg - petrol_to_electric,
            petrol_to_lpg - lpg_to_electric,
            petrol_to_electric + lpg_to_electric,
        ]
    )


def integrate(
    model: Derivative,
    state: CompartmentState,
    t0: float,
    t1: float,
    dt: float,
    trace: list[float] | None = None,
) -> CompartmentState:
    """Advance ``state`` from t0 to exactly t1 with classical RK4.

    The trajectory uses fixed sub-steps of size dt; the final sub-step
    is shortened so it lands exactly on t1, and no internal timestamp
    ever exceeds t1.  After each sub-step, components in (-1e-9, 0) are
    clamped to 0 (floating-point noise); anything below -1e-9 raises
    NegativeStateBlowup, and NaN/Inf raises NonFiniteState.

    Args:
        model: Derivative function, values -> dvalues/dt.
        state: Initial compartment state (not mutated).
        t0, t1: Interval bounds, t1 > t0.
        dt: Sub-step size in ticks, > 0.
        trace: Optional list; sub-step end timestamps are appended.

    Returns:
        New CompartmentState at time t1.
    """
    if t1 <= t0:
        raise ValueError(f"t1 ({t1}) must exceed t0 ({t0})")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")

    y = state.values.copy()
    t = t0
    while t < t1:
        remaining = t1 - t
        # Treat a remainder within one part in 1e9 of dt as the final
        # step, so accumulated float error cannot spawn a dust step.
        if remaining <= dt * (1.0 + 1e-9):
            h = remaining
            t_next = t1
        else:
            h = dt
            t_next = t + dt

        k1 = model(y)
        k2 = model(y + 0.5 * h * k1)
        k3 = model(y + 0.5 * h * k2)
        k4 = model(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if not np.all(np.isfinite(y)):
            raise NonFiniteState(
                f"non-finite compartment value at t={t_next}: {y}"
            )
        low = y.min()
        if low < 0.0:
            if low < -NEGATIVE_TOLERANCE:
                raise NegativeStateBlowup(
                    f"compartment fell to {low} at t={t_next}"
                )
            np.clip(y, 0.0, None, out=y)

        t = t_next
        if trace is not None:
            trace.append(t)

    return CompartmentState(state.labels, y)
