"""Cross-layer node and route cost functions.

A node's cost blends three instantaneous signals, each a fraction in
[0, 1]: radio utilization over a sliding window, transmit-queue
occupancy, and battery already consumed.  Route cost is the plain sum of
node costs over every node on the path, endpoints included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .packets import AppType


class EmptyRoute(ValueError):
    """Route cost requested for an empty node list (upstream logic error)."""


@dataclass(frozen=True, slots=True)
class CostComponents:
    """The three per-node signals, each a proper fraction."""

    bandwidth: float  # busy-airtime fraction of the sliding window
    delay: float      # queue occupancy / capacity
    power: float      # battery consumed / initial capacity

    def __post_init__(self):
        for name, v in (("bandwidth", self.bandwidth), ("delay", self.delay),
                        ("power", self.power)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} component {v!r} outside [0, 1]")


@dataclass(frozen=True, slots=True)
class WeightProfile:
    b: float
    d: float
    p: float


# Weights are used verbatim; the TYPE1 profile deliberately sums to 0.99
# and must not be renormalized (that would change route selection).
WEIGHTS: dict[AppType, WeightProfile] = {
    AppType.TYPE1: WeightProfile(0.33, 0.33, 0.33),
    AppType.TYPE2: WeightProfile(0.30, 0.40, 0.30),
}


def node_cost(app: AppType, c: CostComponents) -> float:
    """Weighted node cost for the given application class."""
    w = WEIGHTS[app]
    return w.b * c.bandwidth + w.d * c.delay + w.p * c.power


def route_cost(node_costs: list[float] | tuple[float, ...]) -> float:
    """Sum of per-node costs along a route, endpoints included.

    fsum keeps the result independent of node order.
    """
    if not node_costs:
        raise EmptyRoute("route with no nodes")
    return math.fsum(node_costs)


def radio_utilization(busy_intervals, now_us: int, window_us: int) -> float:
    """Fraction of [now - window, now] covered by busy airtime.

    busy_intervals is an iterable of (start_us, end_us) in nondecreasing
    start order; overlapping intervals are unioned, not double counted.
    """
    lo = now_us - window_us
    total = 0
    cur_start = cur_end = None
    for s, e in busy_intervals:
        s = max(s, lo)
        e = min(e, now_us)
        if e <= s:
            continue
        if cur_end is None:
            cur_start, cur_end = s, e
        elif s <= cur_end:
            if e > cur_end:
                cur_end = e
        else:
            total += cur_end - cur_start
            cur_start, cur_end = s, e
    if cur_end is not None:
        total += cur_end - cur_start
    return min(1.0, total / window_us)


def queue_fraction(occupancy: int, capacity: int) -> float:
    """Occupied fraction of the bounded transmit queue."""
    return occupancy / capacity


def battery_used_fraction(initial: float, remaining: float) -> float:
    """Fraction of the initial battery consumed so far, clamped to [0, 1]."""
    used = (initial - remaining) / initial
    return min(1.0, max(0.0, used))


def cpacl_node_cost(initial: float, remaining: float) -> float:
    """Battery-only node cost used by the cpacl protocol variant."""
    return battery_used_fraction(initial, remaining)
