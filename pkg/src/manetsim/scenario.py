"""Scenario parameters and the key=value configuration parser."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .packets import AppType

PROTOCOLS = ("aodv", "cpacl", "tspba")
TRAFFIC_TYPES = ("type1", "type2")

# DataPacket timestamps ride in 32-bit microseconds on the wire.
MAX_DURATION_S = (2**32 - 1) / 1e6


class ConfigError(ValueError):
    """Bad scenario configuration; carries the offending line when parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, slots=True)
class Scenario:
    """A complete simulation configuration with defaults for every knob."""

    nodes: int = 60
    field_x: float = 1000.0
    field_y: float = 1000.0
    duration: float = 600.0          # s
    v_min: float = 2.0               # m/s
    v_max: float = 6.0
    pause: float = 10.0              # s at each waypoint
    granularity: float = 10.0        # s between position re-evaluations
    send_rate: float = 1.0           # packets/s per source node
    packet_size: int = 512           # bytes
    protocol: str = "tspba"
    traffic_type: str = "type1"
    seed: int = 1
    runs: int = 10

    # radio
    radio_range: float = 250.0       # m, unit disk
    bitrate: float = 2_000_000.0     # bits/s
    frame_overhead: float = 0.0      # s of fixed per-frame airtime

    # node resources; the energy rates keep a 2:1 tx:rx ratio and are
    # scaled so a default run depletes batteries progressively instead of
    # flattening the whole network in the first seconds
    initial_energy: float = 100.0    # battery units
    e_tx_per_byte: float = 5e-5      # units per transmitted byte
    e_rx_per_byte: float = 2.5e-5    # units per received byte
    queue_capacity: int = 50         # outbound frames

    # routing
    utilization_window: float = 1.0  # s, radio-busy measurement window
    active_route_timeout: float = 10.0  # s
    collect_window: float = 0.05     # s the destination gathers route requests
    discovery_timeout: float = 1.0   # s per discovery attempt
    discovery_retries: int = 3       # attempts before giving up
    mac_retries: int = 3             # unicast retransmissions before link break
    ttl: int = 35                    # route request flood radius
    reforward_limit: int = 3         # improved-duplicate re-broadcasts per node
    cost_epsilon: float = 1e-6       # minimum improvement worth re-broadcasting

    def validate(self) -> "Scenario":
        for name in _FIELD_TYPES:
            _check_field(name, getattr(self, name))
        if self.v_min > self.v_max:
            raise ConfigError(f"v_min {self.v_min} > v_max {self.v_max}")
        return self

    @property
    def app_type(self) -> AppType:
        return AppType.TYPE1 if self.traffic_type == "type1" else AppType.TYPE2


_FIELD_TYPES = {f.name: f.type for f in fields(Scenario)}
_INT_FIELDS = {f.name for f in fields(Scenario) if f.type == "int"}
_STR_FIELDS = {f.name for f in fields(Scenario) if f.type == "str"}

_POSITIVE = {"field_x", "field_y", "duration", "send_rate", "bitrate",
             "radio_range", "initial_energy", "granularity"}
_NON_NEGATIVE = {"v_min", "v_max", "pause", "frame_overhead", "e_tx_per_byte",
                 "e_rx_per_byte", "utilization_window", "active_route_timeout",
                 "collect_window", "discovery_timeout", "cost_epsilon"}
_AT_LEAST_ONE = {"packet_size", "queue_capacity", "runs", "discovery_retries",
                 "mac_retries", "ttl", "reforward_limit"}


def _check_field(name: str, value) -> None:
    """Single-field constraints, shared by the parser and validate()."""
    if name == "nodes" and value < 2:
        raise ConfigError(f"nodes must be >= 2, got {value}")
    if name in _POSITIVE and value <= 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    if name in _NON_NEGATIVE and value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value}")
    if name in _AT_LEAST_ONE and value < 1:
        raise ConfigError(f"{name} must be >= 1, got {value}")
    if name == "duration" and value > MAX_DURATION_S:
        raise ConfigError(f"duration {value} exceeds {MAX_DURATION_S:.0f} s")
    if name == "seed" and not 0 <= value < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {value}")
    if name == "protocol" and value not in PROTOCOLS:
        raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {value!r}")
    if name == "traffic_type" and value not in TRAFFIC_TYPES:
        raise ConfigError(f"traffic_type must be one of {TRAFFIC_TYPES}, got {value!r}")


def parse_scenario(text: str) -> Scenario:
    """Parse a line-oriented key=value document; '#' starts a comment.

    Unknown keys and malformed values are rejected with the line number;
    missing keys take the defaults above.
    """
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r}", lineno)
        try:
            if key in _STR_FIELDS:
                parsed: object = val.lower()
            elif key in _INT_FIELDS:
                parsed = int(val)
            else:
                parsed = float(val)
        except ValueError:
            raise ConfigError(f"malformed value {val!r} for {key}", lineno) from None
        try:
            _check_field(key, parsed)
        except ConfigError as exc:
            raise ConfigError(str(exc), lineno) from None
        values[key] = parsed
    return Scenario(**values).validate()


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from None
    return parse_scenario(text)


def with_overrides(base: Scenario, **kw) -> Scenario:
    return replace(base, **kw).validate()
