"""Binary event traces and metric recomputation from them.

Record layout: 8-byte big-endian timestamp in simulation microseconds,
1-byte event code, 4-byte big-endian node id, then the packet in its
wire encoding.  A length prefix is unnecessary because every packet kind
has a self-describing size.
"""

from __future__ import annotations

import struct
from typing import Iterator

from .metrics import MetricsLedger
from .packets import (
    KIND_DATA, KIND_RERR, Packet, DataPacket, MalformedPacket, decode, encode,
    _RERR_HEAD, _RERR_PAIR, _DATA, _RREQ, _RREP, KIND_RREQ, KIND_RREP,
)

EV_SEND = 1      # frame left a node's radio (one record per emission)
EV_RECV = 2      # frame heard by a node (one record per paying receiver)
EV_DROP = 3      # packet discarded at a node
EV_GEN = 4       # data packet created at its source
EV_DELIVER = 5   # data packet accepted at its destination

_HEAD = struct.Struct(">QBI")


class TraceWriter:
    """Appends records to a binary file; close() flushes it."""

    def __init__(self, path: str):
        self._fh = open(path, "wb")

    def record(self, ts_us: int, event: int, node: int, pkt: Packet) -> None:
        self._fh.write(_HEAD.pack(ts_us, event, node) + encode(pkt))

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class MemoryTrace:
    """Trace sink that keeps decoded records in a list, for tests."""

    def __init__(self):
        self.records: list[tuple[int, int, int, Packet]] = []

    def record(self, ts_us, event, node, pkt):
        self.records.append((ts_us, event, node, pkt))

    def close(self):
        pass

    def to_bytes(self) -> bytes:
        return b"".join(_HEAD.pack(t, e, n) + encode(p)
                        for t, e, n, p in self.records)


def _packet_length(kind: int, payload: memoryview) -> int:
    if kind == KIND_RREQ:
        return _RREQ.size
    if kind == KIND_RREP:
        return _RREP.size
    if kind == KIND_DATA:
        return _DATA.size
    if kind == KIND_RERR:
        if len(payload) < _RERR_HEAD.size:
            raise MalformedPacket("truncated RERR record")
        (count,) = struct.unpack_from(">I", payload, 2)
        return _RERR_HEAD.size + _RERR_PAIR.size * count
    raise MalformedPacket(f"unknown packet kind {kind} in trace")


def read_trace(path: str) -> Iterator[tuple[int, int, int, Packet]]:
    """Yield (timestamp_us, event, node, packet) records from a trace file."""
    with open(path, "rb") as fh:
        blob = memoryview(fh.read())
    yield from iter_records(blob)


def iter_records(blob) -> Iterator[tuple[int, int, int, Packet]]:
    blob = memoryview(blob)
    off = 0
    total = len(blob)
    while off < total:
        if total - off < _HEAD.size:
            raise MalformedPacket("truncated trace record header")
        ts, event, node = _HEAD.unpack_from(blob, off)
        off += _HEAD.size
        if total - off < 1:
            raise MalformedPacket("trace record without packet")
        plen = _packet_length(blob[off], blob[off:])
        if total - off < plen:
            raise MalformedPacket("truncated packet in trace record")
        yield ts, event, node, decode(bytes(blob[off:off + plen]))
        off += plen


def ledger_from_records(records, duration_s: float) -> MetricsLedger:
    """Rebuild a run's counters from its trace records.

    Mirrors the kernel's accounting rules exactly: routing transmissions
    are counted per emission, deliveries are deduplicated per
    (src, dst, app, seq), and delay is summed in integer microseconds.
    """
    ledger = MetricsLedger(duration_s=duration_s)
    seen_deliveries: set[tuple[int, int, int, int]] = set()
    for ts, event, node, pkt in records:
        if event == EV_GEN:
            ledger.generated += 1
        elif event == EV_SEND:
            if pkt.__class__ is not DataPacket:
                ledger.routing_tx += 1
        elif event == EV_DELIVER:
            key = (pkt.src, pkt.dst, int(pkt.app_type), pkt.seq)
            if key in seen_deliveries:
                continue
            seen_deliveries.add(key)
            ledger.delivered += 1
            ledger.delivered_bits += pkt.size_bytes * 8
            ledger.sum_delay_us += ts - pkt.created_at_us
    return ledger


def ledger_from_trace(path: str, duration_s: float) -> MetricsLedger:
    return ledger_from_records(read_trace(path), duration_s)


def replay_energy(records, node_count: int, initial: float,
                  e_tx_per_byte: float, e_rx_per_byte: float,
                  wire_size_fn) -> list[float]:
    """Replay per-node battery levels from send/receive records.

    Applies the same debit arithmetic in the same order as the kernel, so
    the result must match the kernel's final energies exactly.
    """
    energy = [initial] * node_count
    for ts, event, node, pkt in records:
        if event == EV_SEND:
            energy[node] = max(0.0, energy[node] - e_tx_per_byte * wire_size_fn(pkt))
        elif event == EV_RECV:
            energy[node] = max(0.0, energy[node] - e_rx_per_byte * wire_size_fn(pkt))
    return energy
