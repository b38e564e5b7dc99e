"""Constant-rate datagram flows.

Every node sources one flow toward a destination drawn uniformly at
scenario setup.  Departures are spaced exactly 1/rate apart starting one
interval after the flow opens, so a flow of duration D at rate r emits
floor(D * r) packets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .packets import AppType
from .scenario import Scenario


@dataclass(frozen=True, slots=True)
class FlowSpec:
    src: int
    dst: int
    app_type: AppType
    rate: float          # packets/s, > 0
    size_bytes: int
    start_us: int
    stop_us: int

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("flow source equals destination")
        if self.rate <= 0:
            raise ValueError(f"flow rate must be positive, got {self.rate}")
        if self.start_us > self.stop_us:
            raise ValueError("flow starts after it stops")


def packet_count(flow: FlowSpec) -> int:
    """floor(duration * rate); the epsilon absorbs float dust when the
    product is meant to be integral."""
    duration_s = (flow.stop_us - flow.start_us) / 1e6
    return math.floor(duration_s * flow.rate + 1e-9)


def departure_us(flow: FlowSpec, k: int) -> int:
    """Departure time of packet k (0-based); spacing is exactly 1/rate."""
    return flow.start_us + round((k + 1) * 1_000_000 / flow.rate)


def build_flows(scenario: Scenario, rng: np.random.Generator) -> list[FlowSpec]:
    """One flow per node to a uniformly drawn fixed destination."""
    n = scenario.nodes
    duration_us = round(scenario.duration * 1e6)
    flows = []
    for src in range(n):
        dst = int(rng.integers(0, n - 1))
        if dst >= src:
            dst += 1
        flows.append(FlowSpec(src, dst, scenario.app_type, scenario.send_rate,
                              scenario.packet_size, 0, duration_us))
    return flows
