"""Model hierarchy, simulation clock, bracketed execution and the
deterministic parallel contract.

A run is organized as a tree of nodes: discrete micro models at the
leaves, continuous macro models bracketed between their parent's
decision points, and coordinators orchestrating both.  Sibling
coordinators never share mutable state inside a bracketed interval, so
they may execute on any number of workers; results are merged by node
id, which makes every run bit-identical regardless of worker count or
completion order.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence, TypeVar

from .errors import ChildFailure, DuplicateNodeId, EmptyScenario
from .ode import CompartmentState, Derivative, integrate

if TYPE_CHECKING:
    from .config import RunConfig

T = TypeVar("T")


class NodeKind(enum.Enum):
    DISCRETE_MICRO = "discrete_micro"
    CONTINUOUS_MACRO = "continuous_macro"
    COORDINATOR = "coordinator"


@dataclass
class SimClock:
    """Simulated time as an exact multiple of the micro step.

    Time is stored as an integer step count so that decision points are
    exact; ``now`` is derived, never accumulated, and is non-decreasing
    over a run.
    """

    micro_step: float = 1.0
    step_index: int = 0

    @property
    def now(self) -> float:
        return self.step_index * self.micro_step

    @property
    def next_event(self) -> float:
        return (self.step_index + 1) * self.micro_step

    def advance(self) -> None:
        self.step_index += 1


@dataclass
class ModelNode:
    """One node of the model tree.

    integrator_dt and its [dt_min, dt_max] bounds are only meaningful
    for CONTINUOUS_MACRO nodes; the level-of-detail mechanism moves
    integrator_dt inside the bounds and never outside them.
    """

    id: int
    kind: NodeKind
    children: list[int] = field(default_factory=list)
    integrator_dt: float = 0.25
    dt_min: float = 0.03125
    dt_max: float = 1.0

    def __post_init__(self):
        if self.kind is NodeKind.CONTINUOUS_MACRO:
            if not (0 < self.dt_min <= self.integrator_dt <= self.dt_max):
                raise ValueError(
                    f"node {self.id}: need 0 < dt_min <= integrator_dt <= "
                    f"dt_max, got {self.dt_min}, {self.integrator_dt}, "
                    f"{self.dt_max}"
                )


class Hierarchy:
    """A validated tree of ModelNodes, addressable by id."""

    def __init__(self, root: ModelNode):
        self.root = root
        self.nodes: dict[int, ModelNode] = {}
        self._register(root)

    def _register(self, node: ModelNode) -> None:
        if node.id in self.nodes:
            raise DuplicateNodeId(f"node id {node.id} used twice")
        self.nodes[node.id] = node

    def add(self, parent_id: int, node: ModelNode) -> ModelNode:
        self._register(node)
        self.nodes[parent_id].children.append(node.id)
        return node

    def __getitem__(self, node_id: int) -> ModelNode:
        return self.nodes[node_id]

    def children_of(self, node_id: int) -> list[ModelNode]:
        return [self.nodes[c] for c in self.nodes[node_id].children]

    def validate_tree(self) -> None:
        """Check the parent-of relation: acyclic, one parent per node."""
        parents: dict[int, int] = {}
        for node in self.nodes.values():
            for child in node.children:
                if child in parents:
                    raise DuplicateNodeId(
                        f"node {child} has two parents "
                        f"({parents[child]} and {node.id})"
                    )
                if child not in self.nodes:
                    raise EmptyScenario(f"dangling child id {child}")
                parents[child] = node.id
        seen: set[int] = set()
        stack = [self.root.id]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise DuplicateNodeId(f"cycle through node {nid}")
            seen.add(nid)
            stack.extend(self.nodes[nid].children)
        if seen != set(self.nodes):
            unreachable = sorted(set(self.nodes) - seen)
            raise EmptyScenario(f"nodes unreachable from root: {unreachable}")


def build_hierarchy(config: "RunConfig") -> Hierarchy:
    """Build the model tree for a validated run configuration.

    Epidemic: a root coordinator, one coordinator per city, each owning
    one continuous macro (epidemic ODE) child.  Pollution: a root
    coordinator with one discrete micro (grid) child and one continuous
    macro (fleet ODE) child.
    """
    integ = config.integrator
    root = ModelNode(id=0, kind=NodeKind.COORDINATOR)
    tree = Hierarchy(root)

    if config.scenario == "epidemic":
        cities = config.epidemic.cities
        if not cities:
            raise EmptyScenario("epidemic scenario with no cities")
        n = len(cities)
        for i in range(n):
            tree.add(0, ModelNode(id=1 + i, kind=NodeKind.COORDINATOR))
        for i in range(n):
            tree.add(
                1 + i,
                ModelNode(
                    id=1 + n + i,
                    kind=NodeKind.CONTINUOUS_MACRO,
                    integrator_dt=integ.dt,
                    dt_min=integ.dt_min,
                    dt_max=integ.dt_max,
                ),
            )
    elif config.scenario == "pollution":
        pol = config.pollution
        if pol.grid_width * pol.grid_height == 0:
            raise EmptyScenario("pollution scenario with zero grid size")
        tree.add(0, ModelNode(id=1, kind=NodeKind.DISCRETE_MICRO))
        tree.add(
            0,
            ModelNode(
                id=2,
                kind=NodeKind.CONTINUOUS_MACRO,
                integrator_dt=integ.dt,
                dt_min=integ.dt_min,
                dt_max=integ.dt_max,
            ),
        )
    else:
        raise EmptyScenario(f"unknown scenario {config.scenario!r}")

    tree.validate_tree()
    return tree


def run_bracketed(
    node: ModelNode,
    model: Derivative,
    state: CompartmentState,
    t_start: float,
    t_end: float,
) -> CompartmentState:
    """Advance a continuous macro node across one bracketed interval.

    The trajectory uses the node's current integrator_dt and lands
    exactly on t_end (the caller's next discrete event); it never
    integrates past it.  Sub-step timestamps are checked against the
    bracket on every call.
    """
    if node.kind is not NodeKind.CONTINUOUS_MACRO:
        raise ValueError(f"node {node.id} is {node.kind}, not a macro model")
    trace: list[float] = []
    out = integrate(model, state, t_start, t_end, node.integrator_dt, trace=trace)
    if trace[-1] != t_end or max(trace) > t_end:
        raise AssertionError(
            f"bracketing violated on node {node.id}: trace ends at "
            f"{trace[-1]}, bracket ends at {t_end}"
        )
    return out


def run_siblings_parallel(
    nodes: Sequence[ModelNode],
    work: Callable[[ModelNode], T],
    worker_count: int,
) -> list[T]:
    """Execute independent sibling nodes, merging results by node id.

    ``work`` must touch only state owned by its node.  Results come
    back ordered by node id and are identical for every worker_count;
    with one worker the pool is bypassed.  Any child exception aborts
    the step and surfaces as ChildFailure for the lowest failing id.
    """
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    ordered = sorted(nodes, key=lambda n: n.id)
    if worker_count == 1 or len(ordered) <= 1:
        results = []
        for node in ordered:
            try:
                results.append(work(node))
            except Exception as exc:
                raise ChildFailure(node.id, exc) from exc
        return results

    with ThreadPoolExecutor(max_workers=worker_count) as pool:
        futures = [pool.submit(work, node) for node in ordered]
    results = []
    for node, fut in zip(ordered, futures):
        exc = fut.exception()
        if exc is not None:
            raise ChildFailure(node.id, exc) from exc
        results.append(fut.result())
    return results


def adapt_lod(
    node: ModelNode, observed_growth: float, g_threshold: float = 0.05
) -> float:
    """Tune a macro node's sub-step from the observed infected growth.

    Fast growth halves the sub-step (more accuracy in the critical
    phase), growth below half the threshold doubles it back; the band
    in between leaves it alone so the step size cannot oscillate.
    Always clamped to [dt_min, dt_max].
    """
    if node.kind is not NodeKind.CONTINUOUS_MACRO:
        raise ValueError(f"node {node.id} is {node.kind}, not a macro model")
    if observed_growth > g_threshold:
        node.integrator_dt = max(node.integrator_dt / 2.0, node.dt_min)
    elif observed_growth < g_threshold / 2.0:
        node.integrator_dt = min(node.integrator_dt * 2.0, node.dt_max)
    return node.integrator_dt
