"""Command-line front end: single runs, experiment sweeps, CSV, figures.

Sweeps compare the two cost-based variants (cpacl, tspba) cell by cell,
writing one CSV row per run plus a mean row per cell.  Output is
deterministic: the same configuration and master seed reproduce the CSV
byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .metrics import RunMetrics, aggregate
from .runner import run_seeded
from .scenario import ConfigError, Scenario, load_scenario

CSV_HEADER = ("protocol,traffic_type,v_min,v_max,send_rate,run,seed,"
              "avg_delay_s,throughput_bps,pdr,control_overhead")

SWEEP_PROTOCOLS = ("cpacl", "tspba")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _row(scenario: Scenario, run_label, seed, m: RunMetrics) -> str:
    return ",".join((
        scenario.protocol, scenario.traffic_type,
        _fmt(scenario.v_min), _fmt(scenario.v_max), _fmt(scenario.send_rate),
        str(run_label), "" if seed is None else str(seed),
        _fmt(m.avg_delay_s), _fmt(m.throughput_bps), _fmt(m.pdr),
        _fmt(m.control_overhead)))


def _run_cell(scenario: Scenario, out, trace_pattern=None) -> None:
    """Run one scenario cell and append its data rows plus a mean row."""
    results = run_seeded(scenario, trace_pattern=trace_pattern)
    metrics = []
    for idx, (seed, result) in enumerate(results):
        metrics.append(result.metrics)
        out.write(_row(scenario, idx, seed, result.metrics) + "\n")
        print(f"done protocol={scenario.protocol} traffic={scenario.traffic_type} "
              f"v={scenario.v_min}-{scenario.v_max} rate={scenario.send_rate} "
              f"run={idx} seed={seed} pdr={result.metrics.pdr:.4f}")
    agg = aggregate(metrics)
    out.write(_row(scenario, "mean", None, agg.mean) + "\n")
    out.flush()
    if agg.excluded_runs:
        print(f"note: {agg.excluded_runs} run(s) without deliveries excluded "
              f"from delay/overhead means")


def cmd_simulate(scenario: Scenario, out, trace: str | None) -> None:
    out.write(CSV_HEADER + "\n")
    _run_cell(scenario, out, trace_pattern=trace)


def _cell_trace_pattern(trace: str | None, cell: Scenario) -> str | None:
    if not trace:
        return None
    tag = (f"{cell.protocol}-v{cell.v_min:g}-{cell.v_max:g}"
           f"-r{cell.send_rate:g}")
    return f"{trace}.{tag}.run%d"


def run_speed_sweep(base: Scenario, ranges: list[tuple[float, float]], out,
                    trace: str | None = None) -> None:
    """Vary the node speed range for both cost-based protocols."""
    out.write(CSV_HEADER + "\n")
    for v_min, v_max in ranges:
        for protocol in SWEEP_PROTOCOLS:
            cell = replace(base, v_min=v_min, v_max=v_max,
                           protocol=protocol).validate()
            _run_cell(cell, out, trace_pattern=_cell_trace_pattern(trace, cell))


def run_send_rate_sweep(base: Scenario, rates: list[float], out,
                        pin_speeds: bool = True,
                        trace: str | None = None) -> None:
    """Vary the per-node send rate; speeds pinned to 2-6 m/s by default."""
    if pin_speeds:
        base = replace(base, v_min=2.0, v_max=6.0)
    out.write(CSV_HEADER + "\n")
    for rate in rates:
        for protocol in SWEEP_PROTOCOLS:
            cell = replace(base, send_rate=rate, protocol=protocol).validate()
            _run_cell(cell, out, trace_pattern=_cell_trace_pattern(trace, cell))


def _parse_ranges(text: str) -> list[tuple[float, float]]:
    ranges = []
    for part in text.split(","):
        lo, sep, hi = part.partition(":")
        if not sep:
            raise ConfigError(f"speed range {part!r} is not MIN:MAX")
        try:
            pair = (float(lo), float(hi))
        except ValueError:
            raise ConfigError(f"malformed speed range {part!r}") from None
        if pair[0] < 0 or pair[0] > pair[1]:
            raise ConfigError(f"invalid speed range {part!r}")
        ranges.append(pair)
    if not ranges:
        raise ConfigError("empty speed range list")
    return ranges


def _parse_rates(text: str) -> list[float]:
    rates = []
    for part in text.split(","):
        try:
            rate = float(part)
        except ValueError:
            raise ConfigError(f"malformed rate {part!r}") from None
        if rate <= 0:
            raise ConfigError(f"rate must be positive, got {part!r}")
        rates.append(rate)
    if not rates:
        raise ConfigError("empty rate list")
    return rates


DEFAULT_SPEED_RANGES = "0:2,2:6,6:11,11:17"
DEFAULT_RATES = "0.5,1,2,4"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="manetsim",
        description="Packet-level MANET routing simulator and experiment driver")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="scenario file (key=value lines, # comments)")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--trace", help="binary event-trace path prefix (per run)")

    p = sub.add_parser("simulate", help="run a single scenario cell")
    add_common(p)
    p.add_argument("--runs", type=int, help="override the run count")

    p = sub.add_parser("sweep-speed", help="sweep node speed ranges")
    add_common(p)
    p.add_argument("--ranges", default=DEFAULT_SPEED_RANGES,
                   help="comma-separated MIN:MAX m/s pairs (default: %(default)s)")

    p = sub.add_parser("sweep-rate", help="sweep per-node send rates")
    add_common(p)
    p.add_argument("--rates", default=DEFAULT_RATES,
                   help="comma-separated packets/s values (default: %(default)s)")
    p.add_argument("--no-speed-pin", action="store_true",
                   help="keep the config's speed range instead of 2-6 m/s")

    p = sub.add_parser("plot", help="render figures from a sweep CSV")
    p.add_argument("csv", help="CSV produced by a sweep command")
    p.add_argument("--out-dir", default=".", help="directory for the PNG files")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            from .plotting import plot_sweep
            for path in plot_sweep(args.csv, args.out_dir):
                print(f"wrote {path}")
            return 0

        scenario = load_scenario(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if getattr(args, "runs", None) is not None:
            overrides["runs"] = args.runs
        if overrides:
            scenario = replace(scenario, **overrides).validate()

        out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
        try:
            if args.command == "simulate":
                cmd_simulate(scenario, out, args.trace)
            elif args.command == "sweep-speed":
                run_speed_sweep(scenario, _parse_ranges(args.ranges), out,
                                trace=args.trace)
            elif args.command == "sweep-rate":
                run_send_rate_sweep(scenario, _parse_rates(args.rates), out,
                                    pin_speeds=not args.no_speed_pin,
                                    trace=args.trace)
        finally:
            if out is not sys.stdout:
                out.close()
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
