"""Shared helpers for scripted simulation scenarios."""

import pytest

from manetsim.kernel import Engine
from manetsim.scenario import Scenario
from manetsim.trace import MemoryTrace


def make_engine(positions, *, protocol="tspba", cost_fn=None, tables=None,
                flows=(), trace=None, collect_window=None, **overrides):
    """Engine with nodes pinned at the given coordinates and no default
    traffic; scenario knobs can be overridden by keyword."""
    params = dict(
        nodes=len(positions), duration=30.0, v_min=0.0, v_max=0.0,
        protocol=protocol, seed=1,
    )
    params.update(overrides)
    scenario = Scenario(**params).validate()
    return Engine(scenario, scenario.seed, positions=list(positions),
                  cost_fn=cost_fn, tables=tables, trace=trace,
                  flows=list(flows) if flows is not None else None,
                  collect_window=collect_window)


def frozen_cost_fn(costs):
    """Cost function that always reports the given per-node value."""
    def fn(engine, node, app):
        return costs[node.id]
    return fn


@pytest.fixture
def memtrace():
    return MemoryTrace()
