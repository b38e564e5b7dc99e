"""Deterministic discrete-event engine, node physical state, radio medium.

Time is integer microseconds.  Events are totally ordered by
(time, schedule sequence number), so two runs with the same scenario and
seed replay identically.  The medium is a unit disk: a frame reaches
exactly the alive nodes within range at transmission start, after an
airtime of overhead + bits/bitrate.  Energy debits are proportional to
frame bytes; a node whose battery reaches zero is dead and neither sends
nor receives from then on.
"""

from __future__ import annotations

from collections import deque
from heapq import heappop, heappush

import numpy as np

from . import mobility, routing, traffic
from .cost import CostComponents, battery_used_fraction, node_cost, queue_fraction, radio_utilization
from .metrics import MetricsLedger
from .packets import AppType, DataPacket, wire_size
from .scenario import Scenario
from .trace import EV_DELIVER, EV_DROP, EV_GEN, EV_RECV, EV_SEND

# event kinds, processed in (time, seq) order; the two timer kinds are
# owned by the routing module
EV_TX_END = 0
EV_COLLECT_TIMER = routing.EV_COLLECT_TIMER    # 1
EV_DISCOVERY_TIMER = routing.EV_DISCOVERY_TIMER  # 2
EV_MOBILITY_TICK = 3
EV_TRAFFIC_GEN = 4

# rng stream purposes under the master seed
_STREAM_MOBILITY = 1
_STREAM_TRAFFIC = 2


class PastEvent(RuntimeError):
    """An event was scheduled before the current simulation time."""


class Node:
    """Physical state of one node; routing state hangs off .rt."""

    __slots__ = ("id", "energy", "alive", "txq", "tx_busy", "busy_intervals",
                 "seq_no", "bcast_counter", "rt", "mob", "rng")

    def __init__(self, node_id: int, energy: float, tables: int):
        self.id = node_id
        self.energy = energy
        self.alive = energy > 0
        self.txq: deque = deque()
        self.tx_busy = False
        self.busy_intervals: deque = deque()
        self.seq_no = 0
        self.bcast_counter = 0
        self.rt = routing.RoutingState(tables)
        self.mob: mobility.WaypointState | None = None
        self.rng: np.random.Generator | None = None


def _node_stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, purpose, index]))


class Engine:
    """One simulation run: builds nodes, flows and mobility, then run()."""

    def __init__(self, scenario: Scenario, seed: int, *,
                 cost_fn=None, tables: int | None = None,
                 positions: list[tuple[float, float]] | None = None,
                 flows: list[traffic.FlowSpec] | None = None,
                 trace=None, collect_window: float | None = None):
        self.scenario = scenario
        self.seed = seed
        self.trace = trace
        self.now = 0
        self._heap: list = []
        self._seq = 0

        s = scenario
        self.duration_us = round(s.duration * 1e6)
        self.granularity_us = round(s.granularity * 1e6)
        self.pause_us = round(s.pause * 1e6)
        self.window_us = max(1, round(s.utilization_window * 1e6))
        self.art_us = round(s.active_route_timeout * 1e6)
        self.collect_us = round((s.collect_window if collect_window is None
                                 else collect_window) * 1e6)
        self.discovery_timeout_us = round(s.discovery_timeout * 1e6)
        self.overhead_us = round(s.frame_overhead * 1e6)
        self.bitrate_bps = int(s.bitrate)
        self.range_sq = s.radio_range * s.radio_range
        self.e_tx = s.e_tx_per_byte
        self.e_rx = s.e_rx_per_byte
        self.queue_capacity = s.queue_capacity
        self.mac_retries = s.mac_retries
        self.ttl = s.ttl
        self.reforward_limit = s.reforward_limit
        self.cost_epsilon = s.cost_epsilon
        self.discovery_retries = s.discovery_retries

        n_tables = tables if tables is not None else (2 if s.protocol == "tspba" else 1)
        self.nodes = [Node(i, s.initial_energy, n_tables) for i in range(s.nodes)]
        self.alive_mask = np.ones(s.nodes, dtype=bool)

        self.cost_fn = cost_fn if cost_fn is not None else _protocol_cost_fn(s.protocol)

        self.ledger = MetricsLedger(duration_s=s.duration)
        self._delivered_keys: set = set()

        self._init_mobility(positions)
        self.flows = (traffic.build_flows(s, _node_stream(seed, _STREAM_TRAFFIC))
                      if flows is None else flows)
        for idx, flow in enumerate(self.flows):
            if traffic.packet_count(flow) > 0:
                self.schedule(traffic.departure_us(flow, 0), EV_TRAFFIC_GEN, (idx, 0))

    # -- setup -------------------------------------------------------------

    def _init_mobility(self, positions):
        s = self.scenario
        for node in self.nodes:
            node.rng = _node_stream(self.seed, _STREAM_MOBILITY, node.id)
            if positions is None:
                node.mob = mobility.initial_state(s.field_x, s.field_y,
                                                  s.v_min, s.v_max, node.rng)
            else:
                x, y = positions[node.id]
                node.mob = mobility.initial_state_at(x, y, s.field_x, s.field_y,
                                                     s.v_min, s.v_max, node.rng)
        self.tick_us = 0
        self._px = np.array([node.mob.x for node in self.nodes])
        self._py = np.array([node.mob.y for node in self.nodes])
        self._advance_states(self.granularity_us)
        if self.granularity_us <= self.duration_us:
            self.schedule(self.granularity_us, EV_MOBILITY_TICK, None)

    def _advance_states(self, to_us: int):
        """Advance every waypoint state to to_us and refresh the velocities."""
        s = self.scenario
        for node in self.nodes:
            mobility.advance(node.mob, to_us, s.field_x, s.field_y,
                             s.v_min, s.v_max, self.pause_us, node.rng)
        nx = np.array([node.mob.x for node in self.nodes])
        ny = np.array([node.mob.y for node in self.nodes])
        span = to_us - self.tick_us
        self._vx = (nx - self._px) / span
        self._vy = (ny - self._py) / span
        self._nx = nx
        self._ny = ny

    # -- event queue ---------------------------------------------------------

    def schedule(self, t_us: int, kind: int, payload) -> None:
        if t_us < self.now:
            raise PastEvent(f"event at {t_us} us scheduled at {self.now} us")
        self._seq += 1
        heappush(self._heap, (t_us, self._seq, kind, payload))

    def run(self, horizon_us: int | None = None) -> MetricsLedger:
        """Process events up to and including horizon (default: duration)."""
        horizon = self.duration_us if horizon_us is None else horizon_us
        heap = self._heap
        while heap and heap[0][0] <= horizon:
            t, _, kind, payload = heappop(heap)
            self.now = t
            if kind == EV_TX_END:
                self._on_tx_end(payload)
            elif kind == EV_TRAFFIC_GEN:
                self._on_traffic(payload)
            elif kind == EV_COLLECT_TIMER:
                routing.on_collect_timer(self, payload)
            elif kind == EV_DISCOVERY_TIMER:
                routing.on_discovery_timer(self, payload)
            elif kind == EV_MOBILITY_TICK:
                self._on_mobility_tick()
        return self.ledger

    # -- positions and neighbours ---------------------------------------------

    def _on_mobility_tick(self):
        self._px = self._nx
        self._py = self._ny
        self.tick_us = self.now
        next_us = self.now + self.granularity_us
        self._advance_states(next_us)
        if next_us <= self.duration_us:
            self.schedule(next_us, EV_MOBILITY_TICK, None)

    def positions_at(self, t_us: int):
        """Interpolated coordinates of every node at time t_us."""
        dt = t_us - self.tick_us
        return self._px + self._vx * dt, self._py + self._vy * dt

    def position_of(self, node_id: int, t_us: int) -> tuple[float, float]:
        dt = t_us - self.tick_us
        return (self._px[node_id] + self._vx[node_id] * dt,
                self._py[node_id] + self._vy[node_id] * dt)

    def _in_range(self, sender: int) -> tuple[int, ...]:
        xs, ys = self.positions_at(self.now)
        dx = xs - xs[sender]
        dy = ys - ys[sender]
        mask = (dx * dx + dy * dy) <= self.range_sq
        mask &= self.alive_mask
        mask[sender] = False
        return tuple(np.nonzero(mask)[0].tolist())

    # -- transmission ---------------------------------------------------------

    def transmit(self, node: Node, pkt, unicast_to: int | None = None) -> str:
        """Queue or start a frame; returns the immediate disposition."""
        if not node.alive:
            self.ledger.count_drop("sender_dead")
            if pkt.__class__ is DataPacket:
                self._drop_data(node, pkt)
            return "sender_dead"
        if node.tx_busy or node.txq:
            if len(node.txq) >= self.queue_capacity:
                self.ledger.count_drop("queue_overflow")
                if pkt.__class__ is DataPacket:
                    self._drop_data(node, pkt)
                return "dropped_overflow"
            node.txq.append((pkt, unicast_to))
            return "queued"
        self._start_frame(node, pkt, unicast_to, 0)
        return "sent"

    def _start_frame(self, node: Node, pkt, unicast_to, attempt: int):
        now = self.now
        wire = wire_size(pkt)
        self._debit(node, wire, self.e_tx)
        if self.trace is not None:
            self.trace.record(now, EV_SEND, node.id, pkt)
        if pkt.__class__ is not DataPacket:
            self.ledger.routing_tx += 1
        bits = wire * 8
        airtime = self.overhead_us + (bits * 1_000_000 + self.bitrate_bps - 1) // self.bitrate_bps
        end = now + airtime
        node.tx_busy = True
        node.busy_intervals.append((now, end))
        receivers = self._in_range(node.id)
        nodes = self.nodes
        for rid in receivers:
            nodes[rid].busy_intervals.append((now, end))
        self.schedule(end, EV_TX_END, (node.id, pkt, unicast_to, attempt, receivers))

    def _on_tx_end(self, payload):
        sender_id, pkt, unicast_to, attempt, receivers = payload
        nodes = self.nodes
        snode = nodes[sender_id]
        wire = wire_size(pkt)
        trace = self.trace
        addressee_got = False
        for rid in receivers:
            if unicast_to is not None and rid != unicast_to:
                continue  # overheard frame: radio was busy, nothing decoded
            rnode = nodes[rid]
            if not rnode.alive:
                continue
            self._debit(rnode, wire, self.e_rx)
            if trace is not None:
                trace.record(self.now, EV_RECV, rid, pkt)
            if not rnode.alive:
                continue  # the receive debit finished it; frame not processed
            if rid == unicast_to:
                addressee_got = True
            routing.on_packet(self, rnode, pkt, sender_id)
        if unicast_to is not None and not addressee_got and snode.alive:
            if attempt < self.mac_retries:
                self._start_frame(snode, pkt, unicast_to, attempt + 1)
                return
            routing.on_link_break(self, snode, unicast_to, pkt)
        if snode.alive:
            if snode.txq:
                nxt, uni = snode.txq.popleft()
                self._start_frame(snode, nxt, uni, 0)
            else:
                snode.tx_busy = False

    # -- energy -----------------------------------------------------------------

    def _debit(self, node: Node, nbytes: int, rate: float):
        e = node.energy - rate * nbytes
        if e <= 0.0:
            e = 0.0
        node.energy = e
        if e == 0.0 and node.alive:
            self._kill(node)

    def _kill(self, node: Node):
        node.alive = False
        self.alive_mask[node.id] = False
        for pkt, _ in node.txq:
            if pkt.__class__ is DataPacket:
                self.ledger.count_drop("dead_node_queue")
                self._drop_data(node, pkt)
        node.txq.clear()
        routing.on_node_death(self, node)

    # -- data bookkeeping ---------------------------------------------------------

    def _drop_data(self, node: Node, pkt: DataPacket):
        if self.trace is not None:
            self.trace.record(self.now, EV_DROP, node.id, pkt)

    def drop_data(self, node: Node, pkt: DataPacket, reason: str):
        self.ledger.count_drop(reason)
        self._drop_data(node, pkt)

    def deliver_data(self, node: Node, pkt: DataPacket):
        key = (pkt.src, pkt.dst, int(pkt.app_type), pkt.seq)
        if key in self._delivered_keys:
            self.ledger.count_drop("duplicate_delivery")
            return
        self._delivered_keys.add(key)
        self.ledger.delivered += 1
        self.ledger.delivered_bits += pkt.size_bytes * 8
        self.ledger.sum_delay_us += self.now - pkt.created_at_us
        if self.trace is not None:
            self.trace.record(self.now, EV_DELIVER, node.id, pkt)

    # -- traffic ---------------------------------------------------------------

    def _on_traffic(self, payload):
        flow_idx, k = payload
        flow = self.flows[flow_idx]
        pkt = DataPacket(flow.src, flow.dst, flow.app_type, k,
                         flow.size_bytes, self.now)
        self.ledger.generated += 1
        node = self.nodes[flow.src]
        if self.trace is not None:
            self.trace.record(self.now, EV_GEN, node.id, pkt)
        if node.alive:
            routing.send_data(self, node, pkt)
        else:
            self.drop_data(node, pkt, "dead_source")
        nxt = k + 1
        if nxt < traffic.packet_count(flow):
            self.schedule(traffic.departure_us(flow, nxt), EV_TRAFFIC_GEN,
                          (flow_idx, nxt))

    # -- cost inputs -------------------------------------------------------------

    def components(self, node: Node) -> CostComponents:
        busy = node.busy_intervals
        cutoff = self.now - self.window_us
        while busy and busy[0][1] <= cutoff:
            busy.popleft()
        return CostComponents(
            radio_utilization(busy, self.now, self.window_us),
            queue_fraction(len(node.txq), self.queue_capacity),
            battery_used_fraction(self.scenario.initial_energy, node.energy),
        )

    def cost_of(self, node: Node, app: AppType) -> float:
        return self.cost_fn(self, node, app)


def _protocol_cost_fn(protocol: str):
    if protocol == "aodv":
        return lambda engine, node, app: 0.0
    if protocol == "cpacl":
        return lambda engine, node, app: battery_used_fraction(
            engine.scenario.initial_energy, node.energy)
    return lambda engine, node, app: node_cost(app, engine.components(node))
