"""Top-level run orchestration: scenario + seed -> metrics."""

from __future__ import annotations

from dataclasses import dataclass

from .kernel import Engine
from .metrics import MetricsLedger, RunMetrics
from .scenario import Scenario
from .trace import TraceWriter


@dataclass(slots=True)
class RunResult:
    ledger: MetricsLedger
    metrics: RunMetrics
    final_energy: list[float]
    dead_nodes: int


def run(scenario: Scenario, seed: int, trace_path: str | None = None) -> RunResult:
    """Execute one seeded simulation of the scenario."""
    trace = TraceWriter(trace_path) if trace_path else None
    try:
        engine = Engine(scenario, seed, trace=trace)
        ledger = engine.run()
    finally:
        if trace is not None:
            trace.close()
    return RunResult(
        ledger=ledger,
        metrics=RunMetrics.from_ledger(ledger),
        final_energy=[node.energy for node in engine.nodes],
        dead_nodes=sum(1 for node in engine.nodes if not node.alive),
    )


def run_seeded(scenario: Scenario, runs: int | None = None,
               trace_pattern: str | None = None) -> list[tuple[int, RunResult]]:
    """Run `runs` simulations with seeds master, master+1, ...

    trace_pattern, when given, receives the run index via %-formatting
    when it contains a placeholder, else gets `.runN` appended for N > 0.
    """
    count = scenario.runs if runs is None else runs
    out = []
    for idx in range(count):
        seed = scenario.seed + idx
        path = None
        if trace_pattern:
            path = (trace_pattern % idx if "%" in trace_pattern
                    else (trace_pattern if count == 1 else f"{trace_pattern}.run{idx}"))
        out.append((seed, run(scenario, seed, path)))
    return out
