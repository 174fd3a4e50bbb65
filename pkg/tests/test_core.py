"""Clock, hierarchy construction, bracketing and the parallel contract."""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from mlsim.config import config_from_dict
from mlsim.core import (
    Hierarchy,
    ModelNode,
    NodeKind,
    SimClock,
    adapt_lod,
    build_hierarchy,
    run_bracketed,
    run_siblings_parallel,
)
from mlsim.errors import ChildFailure, DuplicateNodeId, EmptyScenario, NonFiniteState
from mlsim.ode import CompartmentState, FleetParams, fleet_rhs


def epidemic_config(n_cities=3):
    return config_from_dict(
        {
            "scenario": "epidemic",
            "epidemic": {"cities": [{"population": 100}] * n_cities},
        }
    )


def pollution_config():
    return config_from_dict({"scenario": "pollution"})


class TestSimClock:
    def test_now_is_exact_multiple(self):
        clock = SimClock(micro_step=1.0)
        seen = []
        for _ in range(10):
            seen.append(clock.now)
            clock.advance()
        assert seen == [float(k) for k in range(10)]

    def test_non_decreasing(self):
        clock = SimClock()
        prev = clock.now
        for _ in range(100):
            clock.advance()
            assert clock.now > prev
            prev = clock.now

    def test_next_event_brackets_now(self):
        clock = SimClock()
        clock.advance()
        assert clock.next_event == clock.now + clock.micro_step


class TestHierarchy:
    def test_epidemic_three_cities_seven_nodes(self):
        tree = build_hierarchy(epidemic_config(3))
        assert len(tree.nodes) == 7
        assert tree.root.kind is NodeKind.COORDINATOR
        coords = tree.children_of(0)
        assert [c.kind for c in coords] == [NodeKind.COORDINATOR] * 3
        for c in coords:
            (macro,) = tree.children_of(c.id)
            assert macro.kind is NodeKind.CONTINUOUS_MACRO

    def test_pollution_three_nodes(self):
        tree = build_hierarchy(pollution_config())
        assert len(tree.nodes) == 3
        kinds = {n.id: n.kind for n in tree.children_of(0)}
        assert kinds == {
            1: NodeKind.DISCRETE_MICRO,
            2: NodeKind.CONTINUOUS_MACRO,
        }

    def test_duplicate_id_rejected(self):
        tree = Hierarchy(ModelNode(id=0, kind=NodeKind.COORDINATOR))
        tree.add(0, ModelNode(id=1, kind=NodeKind.DISCRETE_MICRO))
        with pytest.raises(DuplicateNodeId):
            tree.add(0, ModelNode(id=1, kind=NodeKind.DISCRETE_MICRO))

    def test_two_parents_rejected(self):
        tree = Hierarchy(ModelNode(id=0, kind=NodeKind.COORDINATOR))
        tree.add(0, ModelNode(id=1, kind=NodeKind.COORDINATOR))
        tree.add(0, ModelNode(id=2, kind=NodeKind.DISCRETE_MICRO))
        tree.nodes[1].children.append(2)
        with pytest.raises(DuplicateNodeId):
            tree.validate_tree()

    def test_empty_scenario_rejected(self):
        cfg = pollution_config()
        cfg.pollution.grid_width = 0
        with pytest.raises(EmptyScenario):
            build_hierarchy(cfg)

    def test_dt_bounds_enforced_on_macro_nodes(self):
        with pytest.raises(ValueError):
            ModelNode(id=1, kind=NodeKind.CONTINUOUS_MACRO,
                      integrator_dt=2.0, dt_min=0.1, dt_max=1.0)


class TestRunBracketed:
    def macro(self, dt=0.25):
        return ModelNode(id=5, kind=NodeKind.CONTINUOUS_MACRO,
                         integrator_dt=dt, dt_min=0.01, dt_max=1.0)

    def test_lands_exactly_on_t_end(self):
        params = FleetParams(0.01, 0.01, 0.01)
        out = run_bracketed(
            self.macro(0.3),
            lambda y: fleet_rhs(y, params),
            CompartmentState(("P", "L", "E"), [100, 0, 0]),
            5.0,
            6.0,
        )
        assert out.total() == pytest.approx(100.0, abs=1e-9)

    def test_rejects_non_macro_node(self):
        with pytest.raises(ValueError):
            run_bracketed(
                ModelNode(id=1, kind=NodeKind.COORDINATOR),
                lambda y: y,
                CompartmentState(("P", "L", "E"), [1, 0, 0]),
                0.0,
                1.0,
            )


class TestRunSiblingsParallel:
    def nodes(self, k=3):
        return [ModelNode(id=i + 1, kind=NodeKind.COORDINATOR) for i in range(k)]

    def work(self, node):
        # Deterministic per-node payload with real float work.
        params = FleetParams(0.01 * node.id, 0.005, 0.02)
        state = CompartmentState(("P", "L", "E"), [100.0 + node.id, 10.0, 0.0])
        macro = ModelNode(id=100 + node.id, kind=NodeKind.CONTINUOUS_MACRO,
                          integrator_dt=0.125, dt_min=0.01, dt_max=1.0)
        out = run_bracketed(macro, lambda y: fleet_rhs(y, params), state, 0.0, 1.0)
        return out.values.tolist()

    def test_worker_counts_agree_byte_for_byte(self):
        results = {
            w: json.dumps(run_siblings_parallel(self.nodes(), self.work, w))
            for w in (1, 3, 8)
        }
        assert results[1] == results[3] == results[8]

    def test_single_node_equals_sequential(self):
        (got,) = run_siblings_parallel(self.nodes(1), self.work, 4)
        assert got == self.work(self.nodes(1)[0])

    def test_results_ordered_by_node_id_despite_input_order(self):
        nodes = self.nodes(4)
        shuffled = [nodes[2], nodes[0], nodes[3], nodes[1]]
        got = run_siblings_parallel(shuffled, lambda n: n.id, 4)
        assert got == [1, 2, 3, 4]

    def test_completion_order_does_not_matter(self):
        def slow_first(node):
            if node.id == 1:
                time.sleep(0.05)
            return node.id * 10

        got = run_siblings_parallel(self.nodes(3), slow_first, 3)
        assert got == [10, 20, 30]

    def test_nan_child_becomes_child_failure(self):
        def work(node):
            if node.id == 2:
                raise NonFiniteState("nan in compartment")
            return node.id

        with pytest.raises(ChildFailure) as err:
            run_siblings_parallel(self.nodes(3), work, 3)
        assert err.value.node_id == 2
        assert isinstance(err.value.cause, NonFiniteState)

    def test_lowest_failing_id_wins_when_several_fail(self):
        def work(node):
            raise RuntimeError(f"boom {node.id}")

        with pytest.raises(ChildFailure) as err:
            run_siblings_parallel(self.nodes(3), work, 3)
        assert err.value.node_id == 1

    def test_worker_count_validated(self):
        with pytest.raises(ValueError):
            run_siblings_parallel(self.nodes(1), self.work, 0)


class TestAdaptLod:
    def macro(self, dt, dt_min=0.125, dt_max=1.0):
        return ModelNode(id=9, kind=NodeKind.CONTINUOUS_MACRO,
                         integrator_dt=dt, dt_min=dt_min, dt_max=dt_max)

    def test_fast_growth_halves_dt(self):
        node = self.macro(0.5)
        assert adapt_lod(node, 0.2, g_threshold=0.05) == 0.25

    def test_halving_clamps_at_dt_min(self):
        node = self.macro(0.125)
        assert adapt_lod(node, 0.2, g_threshold=0.05) == 0.125

    def test_slow_growth_doubles_dt(self):
        node = self.macro(0.25)
        assert adapt_lod(node, 0.01, g_threshold=0.05) == 0.5

    def test_hysteresis_band_leaves_dt_alone(self):
        node = self.macro(0.25)
        assert adapt_lod(node, 0.03, g_threshold=0.05) == 0.25

    def test_dt_never_leaves_bounds(self):
        node = self.macro(0.5, dt_min=0.0625, dt_max=1.0)
        rng = np.random.default_rng(4)
        for _ in range(500):
            adapt_lod(node, float(rng.normal(0.05, 0.2)), g_threshold=0.05)
            assert node.dt_min <= node.integrator_dt <= node.dt_max

    def test_rejects_non_macro(self):
        with pytest.raises(ValueError):
            adapt_lod(ModelNode(id=1, kind=NodeKind.COORDINATOR), 0.1)
