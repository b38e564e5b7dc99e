"""Route discovery, reply handling, maintenance and error propagation.

All three protocol variants run this same machinery; they differ only in
the cost function the engine injects and in how many routing tables a
node keeps (one, or one per application type).  Discovery walks four
steps at every node that hears a route request: filter duplicates,
renew the reverse route, reply if we are the destination, otherwise
propagate.  Destinations gather competing requests for a short window
and answer the cheapest; duplicate requests are re-broadcast only when
they improve the best known cost, the request asks for cost refresh, and
the per-node re-forward budget is not exhausted.
"""

from __future__ import annotations

from collections import deque

from .packets import AppType, DataPacket, RouteEntry, Rerr, Rrep, Rreq

# timer event kinds handled by the kernel loop
EV_COLLECT_TIMER = 1
EV_DISCOVERY_TIMER = 2

# seen-record table is pruned past this size; records older than the
# retention window can no longer affect an in-flight flood
_SEEN_PRUNE_SIZE = 2048
_SEEN_RETENTION_US = 5_000_000


class RreqSeenRecord:
    """Duplicate-filtration state for one (source, broadcast, app) flood."""

    __slots__ = ("best_cost", "forward_count", "first_seen_us")

    def __init__(self, best_cost: float, first_seen_us: int):
        self.best_cost = best_cost
        self.forward_count = 0
        self.first_seen_us = first_seen_us


class PendingDiscovery:
    """An unanswered route discovery with the data waiting on it."""

    __slots__ = ("attempt", "buffered")

    def __init__(self, first_packet: DataPacket | None = None):
        self.attempt = 1
        self.buffered: deque[DataPacket] = deque()
        if first_packet is not None:
            self.buffered.append(first_packet)


class CollectWindow:
    """Cheapest route request seen by a destination within the window.

    A fired window stays behind as a tombstone so stragglers from the
    same flood cannot trigger a second (staler-path, fresher-sequence)
    reply.
    """

    __slots__ = ("best_cost", "app_type", "opened_us", "fired")

    def __init__(self, best_cost: float, app_type: AppType, opened_us: int):
        self.best_cost = best_cost
        self.app_type = app_type
        self.opened_us = opened_us
        self.fired = False


class RoutingState:
    """Per-node protocol state; tables has one dict per application type."""

    __slots__ = ("tables", "pending", "seen", "collect")

    def __init__(self, n_tables: int):
        self.tables = [dict() for _ in range(n_tables)]
        self.pending: dict = {}
        self.seen: dict = {}
        self.collect: dict = {}

    def table_for(self, app: AppType) -> dict:
        tables = self.tables
        return tables[app - 1] if len(tables) == 2 else tables[0]


# -- table maintenance ---------------------------------------------------------

def update_route(table: dict, dest: int, next_hop: int, seq: int, hops: int,
                 cost: float, expiry_us: int, now_us: int) -> bool:
    """Install or refresh an entry under the shared replacement policy.

    A fresher sequence number always wins; at equal sequence a lower
    cost wins, then a lower hop count.  Expired entries never block a
    replacement, but their sequence knowledge is retained.
    """
    old = table.get(dest)
    if old is not None and old.expiry_us > now_us:
        if seq < old.dest_seq:
            return False
        if seq == old.dest_seq:
            if cost > old.cumulative_cost:
                return False
            if cost == old.cumulative_cost and hops >= old.hop_count:
                return False
    new_seq = seq if old is None else max(seq, old.dest_seq)
    table[dest] = RouteEntry(dest, next_hop, new_seq, hops, expiry_us, cost)
    return True


def lookup_route(engine, node, dest: int, app: AppType) -> RouteEntry | None:
    """Unexpired entry for dest in the app's table; refreshes expiry on use."""
    table = node.rt.table_for(app)
    entry = table.get(dest)
    if entry is None:
        return None
    if entry.expiry_us <= engine.now:
        del table[dest]
        return None
    entry.expiry_us = engine.now + engine.art_us
    return entry


# -- data plane -----------------------------------------------------------------

def send_data(engine, node, pkt: DataPacket) -> None:
    """Route a locally originated packet, starting discovery if needed."""
    if pkt.dst == node.id:
        engine.deliver_data(node, pkt)
        return
    entry = lookup_route(engine, node, pkt.dst, pkt.app_type)
    if entry is not None:
        engine.transmit(node, pkt, entry.next_hop)
        return
    key = (pkt.dst, pkt.app_type)
    pend = node.rt.pending.get(key)
    if pend is not None:
        pend.buffered.append(pkt)
        return
    node.rt.pending[key] = PendingDiscovery(pkt)
    _emit_rreq(engine, node, pkt.dst, pkt.app_type, refresh=False)
    engine.schedule(engine.now + engine.discovery_timeout_us,
                    EV_DISCOVERY_TIMER, (node.id, pkt.dst, pkt.app_type, 1))


def start_discovery(engine, node, dest: int, app: AppType,
                    refresh: bool = False) -> None:
    """Begin a discovery with no data waiting (scripted scenarios)."""
    key = (dest, app)
    if key in node.rt.pending:
        return
    node.rt.pending[key] = PendingDiscovery()
    _emit_rreq(engine, node, dest, app, refresh=refresh)
    engine.schedule(engine.now + engine.discovery_timeout_us,
                    EV_DISCOVERY_TIMER, (node.id, dest, app, 1))


def _emit_rreq(engine, node, dest: int, app: AppType, refresh: bool) -> None:
    node.seq_no += 1
    node.bcast_counter += 1
    known = node.rt.table_for(app).get(dest)
    rreq = Rreq(
        source_addr=node.id, source_seq=node.seq_no,
        broadcast_id=node.bcast_counter, dest_addr=dest,
        dest_seq=known.dest_seq if known is not None else 0,
        hop_count=0, ttl=engine.ttl, is_compute_cost=refresh,
        app_type=app, cumulative_cost=engine.cost_of(node, app))
    engine.transmit(node, rreq, None)


# -- packet dispatch ----------------------------------------------------------

def on_packet(engine, node, pkt, prev_hop: int) -> None:
    cls = pkt.__class__
    if cls is DataPacket:
        _handle_data(engine, node, pkt, prev_hop)
    elif cls is Rreq:
        _handle_rreq(engine, node, pkt, prev_hop)
    elif cls is Rrep:
        handle_rrep(engine, node, pkt, prev_hop)
    else:
        handle_rerr(engine, node, pkt, prev_hop)


def _handle_data(engine, node, pkt: DataPacket, prev_hop: int) -> None:
    if pkt.dst == node.id:
        engine.deliver_data(node, pkt)
        return
    entry = lookup_route(engine, node, pkt.dst, pkt.app_type)
    if entry is not None:
        engine.transmit(node, pkt, entry.next_hop)
        return
    # relay without a route: the path decayed under us; report it upstream
    engine.drop_data(node, pkt, "no_route")
    engine.transmit(node, Rerr(((pkt.dst, 0),), pkt.app_type), None)


# -- the four discovery steps ---------------------------------------------------

def request_filtration(engine, node, rreq: Rreq) -> bool:
    """Accept a request the first time, or when a refreshable duplicate
    improves the best known cost and re-forward budget remains."""
    key = (rreq.source_addr, rreq.broadcast_id, rreq.app_type)
    seen = node.rt.seen
    rec = seen.get(key)
    if rec is None:
        if len(seen) >= _SEEN_PRUNE_SIZE:
            _prune_seen(seen, engine.now)
        seen[key] = RreqSeenRecord(rreq.cumulative_cost, engine.now)
        return True
    if (rreq.is_compute_cost
            and rreq.cumulative_cost + engine.cost_epsilon < rec.best_cost
            and rec.forward_count < engine.reforward_limit):
        rec.best_cost = rreq.cumulative_cost
        return True
    return False


def _prune_seen(seen: dict, now_us: int) -> None:
    cutoff = now_us - _SEEN_RETENTION_US
    stale = [k for k, r in seen.items() if r.first_seen_us <= cutoff]
    for k in stale:
        del seen[k]


def source_entry_renewal(engine, node, rreq: Rreq, prev_hop: int) -> bool:
    """Create or refresh the reverse route toward the request's source."""
    return update_route(
        node.rt.table_for(rreq.app_type), rreq.source_addr, prev_hop,
        rreq.source_seq, rreq.hop_count + 1, rreq.cumulative_cost,
        engine.now + engine.art_us, engine.now)


def reply_generation(engine, node, rreq: Rreq) -> None:
    """At the destination: fold the request into the collect window."""
    key = (rreq.source_addr, rreq.broadcast_id)
    collect = node.rt.collect
    win = collect.get(key)
    if win is None:
        if len(collect) >= _SEEN_PRUNE_SIZE:
            _prune_collect(collect, engine.now)
        collect[key] = CollectWindow(rreq.cumulative_cost, rreq.app_type,
                                     engine.now)
        engine.schedule(engine.now + engine.collect_us, EV_COLLECT_TIMER,
                        (node.id, rreq.source_addr, rreq.broadcast_id))
    elif not win.fired and rreq.cumulative_cost < win.best_cost:
        win.best_cost = rreq.cumulative_cost
    if rreq.dest_seq > node.seq_no:
        node.seq_no = rreq.dest_seq


def _prune_collect(collect: dict, now_us: int) -> None:
    cutoff = now_us - _SEEN_RETENTION_US
    stale = [k for k, w in collect.items() if w.fired and w.opened_us <= cutoff]
    for k in stale:
        del collect[k]


def request_propagation(engine, node, rreq: Rreq, rec_key) -> None:
    """Re-broadcast with our own cost folded in; ttl exhaustion is silent."""
    if rreq.ttl <= 0:
        return
    node.rt.seen[rec_key].forward_count += 1
    engine.transmit(node, Rreq(
        source_addr=rreq.source_addr, source_seq=rreq.source_seq,
        broadcast_id=rreq.broadcast_id, dest_addr=rreq.dest_addr,
        dest_seq=rreq.dest_seq, hop_count=rreq.hop_count + 1,
        ttl=rreq.ttl - 1, is_compute_cost=rreq.is_compute_cost,
        app_type=rreq.app_type,
        cumulative_cost=rreq.cumulative_cost + engine.cost_of(node, rreq.app_type),
    ), None)


def _handle_rreq(engine, node, rreq: Rreq, prev_hop: int) -> None:
    if rreq.source_addr == node.id:
        return  # own flood echoed back
    # Every heard copy may refine the reverse route (the renewal policy
    # only ever keeps a fresher or cheaper entry); filtration decides
    # propagation, and the destination weighs all copies for its reply.
    accepted = request_filtration(engine, node, rreq)
    source_entry_renewal(engine, node, rreq, prev_hop)
    if rreq.dest_addr == node.id:
        reply_generation(engine, node, rreq)
    elif accepted:
        request_propagation(engine, node, rreq,
                            (rreq.source_addr, rreq.broadcast_id, rreq.app_type))


def on_collect_timer(engine, payload) -> None:
    node_id, src, bcast = payload
    node = engine.nodes[node_id]
    if not node.alive:
        return
    win = node.rt.collect.get((src, bcast))
    if win is None or win.fired:
        return
    win.fired = True
    app = win.app_type
    node.seq_no += 1
    rrep = Rrep(
        source_addr=src, dest_addr=node.id, dest_seq=node.seq_no,
        hop_count=0, lifetime_ms=engine.art_us // 1000, app_type=app,
        cumulative_cost=win.best_cost + engine.cost_of(node, app))
    reverse = lookup_route(engine, node, src, app)
    if reverse is None:
        engine.ledger.count_drop("no_reverse_route")
        return
    engine.transmit(node, rrep, reverse.next_hop)


# -- replies ------------------------------------------------------------------

def handle_rrep(engine, node, rrep: Rrep, prev_hop: int) -> None:
    """Install the forward route; forward toward the originator or, if we
    are the originator, release the data that was waiting."""
    app = rrep.app_type
    update_route(
        node.rt.table_for(app), rrep.dest_addr, prev_hop, rrep.dest_seq,
        rrep.hop_count + 1, rrep.cumulative_cost,
        engine.now + rrep.lifetime_ms * 1000, engine.now)
    if rrep.source_addr == node.id:
        pend = node.rt.pending.pop((rrep.dest_addr, app), None)
        if pend is not None:
            for pkt in pend.buffered:
                send_data(engine, node, pkt)
        return
    reverse = lookup_route(engine, node, rrep.source_addr, app)
    if reverse is None:
        engine.ledger.count_drop("no_reverse_route")
        return
    engine.transmit(node, Rrep(
        source_addr=rrep.source_addr, dest_addr=rrep.dest_addr,
        dest_seq=rrep.dest_seq, hop_count=rrep.hop_count + 1,
        lifetime_ms=rrep.lifetime_ms, app_type=app,
        cumulative_cost=rrep.cumulative_cost), reverse.next_hop)


# -- failures -------------------------------------------------------------------

def on_link_break(engine, node, broken_next_hop: int, failed_pkt) -> None:
    """Invalidate every route through the dead link and advertise the loss."""
    tables = node.rt.tables
    for idx, table in enumerate(tables):
        affected = [(dest, entry.dest_seq + 1) for dest, entry in table.items()
                    if entry.next_hop == broken_next_hop]
        if not affected:
            continue
        for dest, _ in affected:
            del table[dest]
        if len(tables) == 2:
            app = AppType(idx + 1)
        else:
            app = failed_pkt.app_type
        engine.transmit(node, Rerr(tuple(affected), app), None)
    if failed_pkt.__class__ is DataPacket:
        engine.drop_data(node, failed_pkt, "link_break")
    else:
        engine.ledger.count_drop("control_undeliverable")


def handle_rerr(engine, node, rerr: Rerr, prev_hop: int) -> None:
    """Invalidate matching routes learned via the reporter and pass it on."""
    table = node.rt.table_for(rerr.app_type)
    propagated = []
    for dest, seq in rerr.unreachable:
        entry = table.get(dest)
        if entry is not None and entry.next_hop == prev_hop:
            del table[dest]
            propagated.append((dest, max(entry.dest_seq, seq)))
    if propagated:
        engine.transmit(node, Rerr(tuple(propagated), rerr.app_type), None)


# -- timers ---------------------------------------------------------------------

def on_discovery_timer(engine, payload) -> None:
    node_id, dest, app, attempt = payload
    node = engine.nodes[node_id]
    if not node.alive:
        return
    key = (dest, app)
    pend = node.rt.pending.get(key)
    if pend is None or pend.attempt != attempt:
        return
    if pend.attempt >= engine.discovery_retries:
        for pkt in pend.buffered:
            engine.drop_data(node, pkt, "discovery_failed")
        del node.rt.pending[key]
        return
    pend.attempt += 1
    _emit_rreq(engine, node, dest, app, refresh=True)
    engine.schedule(engine.now + engine.discovery_timeout_us,
                    EV_DISCOVERY_TIMER, (node.id, dest, app, pend.attempt))


def on_node_death(engine, node) -> None:
    """Drop everything a dying node was holding for later."""
    for pend in node.rt.pending.values():
        for pkt in pend.buffered:
            engine.drop_data(node, pkt, "dead_node_buffer")
    node.rt.pending.clear()
    node.rt.collect.clear()

