"""Run counters and the four performance metrics derived from them."""

from __future__ import annotations

from dataclasses import dataclass, field


class NoDeliveries(ValueError):
    """Metric undefined because no data packet reached its destination."""


class NoTraffic(ValueError):
    """Metric undefined because no data packet was generated."""


@dataclass(slots=True)
class MetricsLedger:
    """Event counters accumulated by one simulation run.

    sum_delay is kept in integer microseconds so that recomputing it from
    a trace file reproduces the ledger bit for bit.
    """

    duration_s: float
    generated: int = 0
    delivered: int = 0
    delivered_bits: int = 0
    sum_delay_us: int = 0
    routing_tx: int = 0
    drops: dict = field(default_factory=dict)  # reason -> count, diagnostics only

    def count_drop(self, reason: str) -> None:
        self.drops[reason] = self.drops.get(reason, 0) + 1

    def core_tuple(self):
        """The counters the four metrics are computed from."""
        return (self.generated, self.delivered, self.delivered_bits,
                self.sum_delay_us, self.routing_tx)


def avg_end_to_end_delay(ledger: MetricsLedger) -> float:
    """Mean creation-to-delivery time in seconds, buffering included."""
    if ledger.delivered == 0:
        raise NoDeliveries("no delivered packets; delay is undefined")
    return (ledger.sum_delay_us / 1e6) / ledger.delivered


def throughput(ledger: MetricsLedger) -> float:
    """Successfully delivered bits per second over the whole run."""
    return ledger.delivered_bits / ledger.duration_s


def packet_delivery_ratio(ledger: MetricsLedger) -> float:
    """Delivered / generated data packets, duplicates counted once."""
    if ledger.generated == 0:
        raise NoTraffic("no generated packets; delivery ratio is undefined")
    return ledger.delivered / ledger.generated


def control_overhead(ledger: MetricsLedger) -> float:
    """Hop-wise routing-packet transmissions per delivered data packet."""
    if ledger.delivered == 0:
        raise NoDeliveries("no delivered packets; overhead is undefined")
    return ledger.routing_tx / ledger.delivered


@dataclass(frozen=True, slots=True)
class RunMetrics:
    """The four metrics of one run; None marks an undefined value."""

    avg_delay_s: float | None
    throughput_bps: float
    pdr: float
    control_overhead: float | None

    @classmethod
    def from_ledger(cls, ledger: MetricsLedger) -> "RunMetrics":
        try:
            delay = avg_end_to_end_delay(ledger)
            overhead = control_overhead(ledger)
        except NoDeliveries:
            delay = None
            overhead = None
        return cls(delay, throughput(ledger), packet_delivery_ratio(ledger), overhead)


@dataclass(frozen=True, slots=True)
class AggregateMetrics:
    mean: RunMetrics
    excluded_runs: int  # runs without deliveries, skipped in delay/overhead means


def aggregate(runs: list[RunMetrics]) -> AggregateMetrics:
    """Arithmetic mean per metric across runs.

    Runs where delay/overhead are undefined are excluded from those two
    means; the count of exclusions is reported alongside.
    """
    if not runs:
        raise ValueError("aggregate of zero runs")
    with_delivery = [r for r in runs if r.avg_delay_s is not None]
    excluded = len(runs) - len(with_delivery)
    mean = RunMetrics(
        avg_delay_s=(sum(r.avg_delay_s for r in with_delivery) / len(with_delivery)
                     if with_delivery else None),
        throughput_bps=sum(r.throughput_bps for r in runs) / len(runs),
        pdr=sum(r.pdr for r in runs) / len(runs),
        control_overhead=(sum(r.control_overhead for r in with_delivery)
                          / len(with_delivery) if with_delivery else None),
    )
    return AggregateMetrics(mean, excluded)
