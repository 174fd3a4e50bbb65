"""Exception hierarchy shared by all engine components.

Every error carries a ``component`` tag naming the subsystem it belongs
to; the CLI uses it to produce one-line diagnostics.
"""

from __future__ import annotations


class MlsimError(Exception):
    """Base class for all engine errors."""

    component = "mlsim"


# ── model hierarchy / execution ─────────────────────────────────────────

class DuplicateNodeId(MlsimError):
    component = "hierarchy"


class EmptyScenario(MlsimError):
    component = "hierarchy"


class ChildFailure(MlsimError):
    """A sub-model failed during a bracketed interval; the step is aborted."""

    component = "engine"

    def __init__(self, node_id: int, cause: BaseException):
        super().__init__(f"node {node_id} failed: {cause}")
        self.node_id = node_id
        self.cause = cause


class UnknownDomainTag(MlsimError):
    component = "rng"


# ── ODE integration ─────────────────────────────────────────────────────

class WrongLabels(MlsimError):
    component = "ode"


class NonFiniteState(MlsimError):
    """NaN/Inf produced by integration; signals parameter misconfiguration."""

    component = "ode"


class NegativeStateBlowup(MlsimError):
    """A compartment dropped below -1e-9 after a sub-step."""

    component = "ode"


# ── coordinator / disaggregation ────────────────────────────────────────

class EmptyPopulation(MlsimError):
    component = "epidemic"


class ForeignAgent(MlsimError):
    component = "coordinator"


class TotalMismatch(MlsimError):
    """Real-valued compartments do not sum to the integer target; upstream
    conservation bug."""

    component = "coordinator"


class UnreachableCensus(MlsimError):
    """Requested census cannot be reached by forward flows only."""

    component = "coordinator"


class UnreachableFleet(MlsimError):
    component = "pollution"


# ── configuration and I/O ───────────────────────────────────────────────

class SchemaError(MlsimError):
    component = "config"

    def __init__(self, path: str, key: str, reason: str):
        super().__init__(f"{path}: key '{key}': {reason}")
        self.path = path
        self.key = key
        self.reason = reason


class IoError(MlsimError):
    component = "io"


class ParseError(MlsimError):
    component = "io"

    def __init__(self, where: str, reason: str):
        super().__init__(f"{where}: {reason}")
        self.where = where
        self.reason = reason


class ContractError(MlsimError):
    """A documented precondition was violated by the caller."""

    component = "io"


class EmptyData(MlsimError):
    component = "plots"
