"""manetsim: packet-level MANET routing simulator.

Compares three on-demand routing variants under identical conditions:
plain hop-count AODV, a battery-consumption cost variant (cpacl), and a
cross-layer QoS variant (tspba) that keeps one routing table per
application class and weighs radio load, queue occupancy and battery
drain when choosing routes.
"""

from .cost import CostComponents, WeightProfile, node_cost, route_cost
from .metrics import MetricsLedger, RunMetrics, aggregate
from .packets import AppType, DataPacket, Rerr, Rrep, Rreq, RouteEntry, decode, encode
from .runner import RunResult, run, run_seeded
from .scenario import ConfigError, Scenario, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "AppType", "ConfigError", "CostComponents", "DataPacket", "MetricsLedger",
    "Rerr", "Rrep", "Rreq", "RouteEntry", "RunMetrics", "RunResult",
    "Scenario", "WeightProfile", "aggregate", "decode", "encode",
    "load_scenario", "node_cost", "parse_scenario", "route_cost", "run",
    "run_seeded", "__version__",
]
