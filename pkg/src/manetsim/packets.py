"""Protocol messages, routing-table entries, and their binary codec.

All packet types are immutable value objects.  The byte layout is fixed
(big-endian, 32-bit unsigned integers, 64-bit IEEE-754 costs) so traces
written on one machine decode identically on another.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum


class AppType(IntEnum):
    """Application class: 1 = loss-tolerant bulk, 2 = delay-sensitive."""

    TYPE1 = 1
    TYPE2 = 2


class MalformedPacket(ValueError):
    """Byte sequence cannot be decoded as any known packet."""


KIND_RREQ = 1
KIND_RREP = 2
KIND_RERR = 3
KIND_DATA = 4

FLAG_COMPUTE_COST = 0x01  # bit0, route requests only
FLAG_APP_TYPE = 0x02      # bit1: 0 = TYPE1, 1 = TYPE2


@dataclass(frozen=True, slots=True)
class Rreq:
    """Route request, flooded from a source looking for a destination."""

    source_addr: int
    source_seq: int
    broadcast_id: int
    dest_addr: int
    dest_seq: int        # 0 = destination sequence number unknown
    hop_count: int
    ttl: int
    is_compute_cost: bool
    app_type: AppType
    cumulative_cost: float  # grows hop by hop; never decreases in flight


@dataclass(frozen=True, slots=True)
class Rrep:
    """Route reply, unicast back along the reverse path.

    cumulative_cost is the full source-to-destination route cost and is
    copied verbatim at every forwarding hop.
    """

    source_addr: int   # originator the reply travels to
    dest_addr: int     # destination that generated the reply
    dest_seq: int
    hop_count: int
    lifetime_ms: int
    app_type: AppType
    cumulative_cost: float


@dataclass(frozen=True, slots=True)
class Rerr:
    """Route error listing destinations that became unreachable."""

    unreachable: tuple[tuple[int, int], ...]  # (node id, sequence number), non-empty
    app_type: AppType


@dataclass(frozen=True, slots=True)
class DataPacket:
    """Application datagram; size_bytes is what the radio and battery see."""

    src: int
    dst: int
    app_type: AppType
    seq: int
    size_bytes: int
    created_at_us: int


@dataclass(slots=True)
class RouteEntry:
    """Per-destination routing state; usable only while expiry_us > now."""

    dest: int
    next_hop: int
    dest_seq: int
    hop_count: int
    expiry_us: int
    cumulative_cost: float


Packet = Rreq | Rrep | Rerr | DataPacket

_RREQ = struct.Struct(">BBIIIIIIId")
_RREP = struct.Struct(">BBIIIIId")
_RERR_HEAD = struct.Struct(">BBI")
_RERR_PAIR = struct.Struct(">II")
_DATA = struct.Struct(">BBIIIII")

RREQ_WIRE_BYTES = _RREQ.size
RREP_WIRE_BYTES = _RREP.size


def wire_size(pkt: Packet) -> int:
    """Bytes the frame occupies on air (drives airtime and energy)."""
    cls = pkt.__class__
    if cls is DataPacket:
        return pkt.size_bytes
    if cls is Rreq:
        return _RREQ.size
    if cls is Rrep:
        return _RREP.size
    return _RERR_HEAD.size + _RERR_PAIR.size * len(pkt.unreachable)


def _flags(app_type: AppType, compute_cost: bool = False) -> int:
    f = FLAG_APP_TYPE if app_type == AppType.TYPE2 else 0
    if compute_cost:
        f |= FLAG_COMPUTE_COST
    return f


def encode(pkt: Packet) -> bytes:
    """Serialize a packet.  Total on valid inputs; see decode for the inverse."""
    cls = pkt.__class__
    if cls is Rreq:
        return _RREQ.pack(
            KIND_RREQ, _flags(pkt.app_type, pkt.is_compute_cost),
            pkt.source_addr, pkt.source_seq, pkt.broadcast_id,
            pkt.dest_addr, pkt.dest_seq, pkt.hop_count, pkt.ttl,
            pkt.cumulative_cost)
    if cls is Rrep:
        return _RREP.pack(
            KIND_RREP, _flags(pkt.app_type),
            pkt.source_addr, pkt.dest_addr, pkt.dest_seq,
            pkt.hop_count, pkt.lifetime_ms, pkt.cumulative_cost)
    if cls is Rerr:
        out = [_RERR_HEAD.pack(KIND_RERR, _flags(pkt.app_type), len(pkt.unreachable))]
        out.extend(_RERR_PAIR.pack(dest, seq) for dest, seq in pkt.unreachable)
        return b"".join(out)
    if cls is DataPacket:
        return _DATA.pack(
            KIND_DATA, _flags(pkt.app_type),
            pkt.src, pkt.dst, pkt.seq, pkt.size_bytes, pkt.created_at_us)
    raise TypeError(f"not a packet: {pkt!r}")


def _check_flags(flags: int, allow_compute: bool) -> tuple[AppType, bool]:
    mask = FLAG_APP_TYPE | (FLAG_COMPUTE_COST if allow_compute else 0)
    if flags & ~mask:
        raise MalformedPacket(f"undefined flag bits 0x{flags:02x}")
    app = AppType.TYPE2 if flags & FLAG_APP_TYPE else AppType.TYPE1
    return app, bool(flags & FLAG_COMPUTE_COST)


def _check_cost(cost: float) -> float:
    if math.isnan(cost) or math.isinf(cost) or cost < 0.0:
        raise MalformedPacket(f"cumulative cost out of range: {cost!r}")
    return cost


def decode(data: bytes) -> Packet:
    """Inverse of encode.  Raises MalformedPacket on anything else."""
    if len(data) < 2:
        raise MalformedPacket("truncated packet")
    kind = data[0]
    if kind == KIND_RREQ:
        if len(data) != _RREQ.size:
            raise MalformedPacket(f"bad RREQ length {len(data)}")
        (_, flags, src, sseq, bid, dst, dseq, hops, ttl, cost) = _RREQ.unpack(data)
        app, compute = _check_flags(flags, allow_compute=True)
        return Rreq(src, sseq, bid, dst, dseq, hops, ttl, compute, app,
                    _check_cost(cost))
    if kind == KIND_RREP:
        if len(data) != _RREP.size:
            raise MalformedPacket(f"bad RREP length {len(data)}")
        (_, flags, src, dst, dseq, hops, life, cost) = _RREP.unpack(data)
        app, _ = _check_flags(flags, allow_compute=False)
        return Rrep(src, dst, dseq, hops, life, app, _check_cost(cost))
    if kind == KIND_RERR:
        if len(data) < _RERR_HEAD.size:
            raise MalformedPacket(f"bad RERR length {len(data)}")
        (_, flags, count) = _RERR_HEAD.unpack_from(data)
        app, _ = _check_flags(flags, allow_compute=False)
        if count == 0:
            raise MalformedPacket("RERR with empty unreachable list")
        if len(data) != _RERR_HEAD.size + _RERR_PAIR.size * count:
            raise MalformedPacket(f"RERR length {len(data)} != header count {count}")
        pairs = tuple(
            _RERR_PAIR.unpack_from(data, _RERR_HEAD.size + _RERR_PAIR.size * i)
            for i in range(count))
        return Rerr(pairs, app)
    if kind == KIND_DATA:
        if len(data) != _DATA.size:
            raise MalformedPacket(f"bad DATA length {len(data)}")
        (_, flags, src, dst, seq, size, created) = _DATA.unpack(data)
        app, _ = _check_flags(flags, allow_compute=False)
        if size == 0:
            raise MalformedPacket("data packet with zero size")
        return DataPacket(src, dst, app, seq, size, created)
    raise MalformedPacket(f"unknown packet kind {kind}")
