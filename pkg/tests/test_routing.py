"""Discovery steps, reply handling, maintenance and error propagation."""

import pytest

from conftest import frozen_cost_fn, make_engine
from manetsim import routing
from manetsim.packets import AppType, DataPacket, Rerr, Rreq, RouteEntry, Rrep
from manetsim.trace import EV_SEND, MemoryTrace

T1, T2 = AppType.TYPE1, AppType.TYPE2


def rreq(src=0, sseq=1, bcast=1, dst=9, hops=0, ttl=35, compute=False,
         app=T1, cost=0.0, dseq=0):
    return Rreq(src, sseq, bcast, dst, dseq, hops, ttl, compute, app, cost)


def data(src, dst, seq=0, app=T1, size=512, created=0):
    return DataPacket(src, dst, app, seq, size, created)


def sent_packets(tr, kind):
    return [r[3] for r in tr.records if r[1] == EV_SEND and r[3].__class__ is kind]


# -- request filtration ------------------------------------------------------

def test_filtration_first_copy_accepted():
    eng = make_engine([(0, 0), (100, 0)])
    node = eng.nodes[1]
    assert routing.request_filtration(eng, node, rreq(cost=0.5))
    rec = node.rt.seen[(0, 1, T1)]
    assert rec.best_cost == 0.5 and rec.forward_count == 0


def test_filtration_duplicate_without_refresh_dropped():
    eng = make_engine([(0, 0), (100, 0)])
    node = eng.nodes[1]
    assert routing.request_filtration(eng, node, rreq(cost=0.5))
    assert not routing.request_filtration(eng, node, rreq(cost=0.5))
    assert not routing.request_filtration(eng, node, rreq(cost=0.1))


def test_filtration_improved_refresh_duplicate_accepted():
    eng = make_engine([(0, 0), (100, 0)])
    node = eng.nodes[1]
    assert routing.request_filtration(eng, node, rreq(cost=0.55))
    assert routing.request_filtration(eng, node, rreq(cost=0.30, compute=True))
    assert node.rt.seen[(0, 1, T1)].best_cost == 0.30
    # equal or worse refresh duplicates stay dropped
    assert not routing.request_filtration(eng, node, rreq(cost=0.30, compute=True))
    assert not routing.request_filtration(eng, node, rreq(cost=0.40, compute=True))


def test_filtration_reforward_budget():
    eng = make_engine([(0, 0), (100, 0)], reforward_limit=2)
    node = eng.nodes[1]
    routing.request_filtration(eng, node, rreq(cost=0.9))
    rec = node.rt.seen[(0, 1, T1)]
    rec.forward_count = 2
    assert not routing.request_filtration(eng, node, rreq(cost=0.1, compute=True))


# -- source entry renewal -------------------------------------------------------

def test_renewal_creates_and_improves_entry():
    eng = make_engine([(0, 0), (100, 0)])
    node = eng.nodes[1]
    assert routing.source_entry_renewal(eng, node, rreq(sseq=5, cost=0.7), 0)
    entry = node.rt.table_for(T1)[0]
    assert entry.cumulative_cost == 0.7 and entry.next_hop == 0

    # same sequence, cheaper path wins
    assert routing.source_entry_renewal(eng, node, rreq(sseq=5, cost=0.4, hops=1), 7)
    entry = node.rt.table_for(T1)[0]
    assert entry.cumulative_cost == 0.4 and entry.next_hop == 7

    # staler sequence never overwrites
    assert not routing.source_entry_renewal(eng, node, rreq(sseq=3, cost=0.0), 8)
    assert node.rt.table_for(T1)[0].cumulative_cost == 0.4


def test_renewal_hop_tiebreak_and_seq_freshness():
    eng = make_engine([(0, 0), (100, 0)])
    node = eng.nodes[1]
    routing.source_entry_renewal(eng, node, rreq(sseq=5, cost=0.4, hops=3), 2)
    # equal sequence and cost, fewer hops wins
    assert routing.source_entry_renewal(eng, node, rreq(sseq=5, cost=0.4, hops=1), 3)
    assert node.rt.table_for(T1)[0].next_hop == 3
    # fresher sequence wins even at higher cost
    assert routing.source_entry_renewal(eng, node, rreq(sseq=6, cost=0.9, hops=4), 4)
    assert node.rt.table_for(T1)[0].next_hop == 4


# -- discovery end to end ---------------------------------------------------------

def test_originate_uses_source_cost_zero():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (100, 0)], cost_fn=frozen_cost_fn([0.0, 0.0]),
                      trace=tr)
    routing.start_discovery(eng, eng.nodes[0], 1, T1)
    out = sent_packets(tr, Rreq)
    assert out[0].cumulative_cost == 0.0
    assert out[0].is_compute_cost is False
    assert out[0].hop_count == 0 and out[0].ttl == eng.ttl


def test_originate_uses_weighted_source_cost():
    # components (0.2, 0.8, 0.1) under delay-sensitive weights cost 0.41
    from manetsim.cost import CostComponents, node_cost

    def fn(engine, node, app):
        return node_cost(app, CostComponents(0.2, 0.8, 0.1))

    tr = MemoryTrace()
    eng = make_engine([(0, 0), (100, 0)], cost_fn=fn, trace=tr)
    routing.start_discovery(eng, eng.nodes[0], 1, T2)
    out = sent_packets(tr, Rreq)
    assert out[0].cumulative_cost == pytest.approx(0.41)


def test_retry_sets_refresh_flag_then_gives_up():
    tr = MemoryTrace()
    # destination is unreachable: retries fire, then the buffer drops
    eng = make_engine([(0, 0), (600, 0)], trace=tr, duration=10.0)
    routing.send_data(eng, eng.nodes[0], data(0, 1))
    eng.run()
    out = sent_packets(tr, Rreq)
    assert len(out) == 3
    assert [p.is_compute_cost for p in out] == [False, True, True]
    assert {p.broadcast_id for p in out} == {1, 2, 3}
    assert eng.ledger.drops.get("discovery_failed") == 1
    assert not eng.nodes[0].rt.pending


def test_propagation_accumulates_cost():
    # incoming 0.3 through a node costing 0.2 leaves at 0.5
    tr = MemoryTrace()
    costs = [0.3, 0.2, 0.0]
    eng = make_engine([(0, 0), (100, 0), (200, 0)],
                      cost_fn=frozen_cost_fn(costs), trace=tr)
    routing.start_discovery(eng, eng.nodes[0], 2, T1)
    eng.run()
    forwarded = [p for p in sent_packets(tr, Rreq) if p.hop_count == 1]
    assert forwarded and forwarded[0].cumulative_cost == pytest.approx(0.5)


def test_propagation_zero_cost_node_keeps_cost():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (100, 0), (200, 0)],
                      cost_fn=frozen_cost_fn([0.3, 0.0, 0.0]), trace=tr)
    routing.start_discovery(eng, eng.nodes[0], 2, T1)
    eng.run()
    forwarded = [p for p in sent_packets(tr, Rreq) if p.hop_count == 1]
    assert forwarded and forwarded[0].cumulative_cost == pytest.approx(0.3)


def test_ttl_exhaustion_stops_flood():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (100, 0), (200, 0)], trace=tr, ttl=1)
    routing.start_discovery(eng, eng.nodes[0], 2, T1)
    eng.run()
    floods = sent_packets(tr, Rreq)
    # node 1 forwards with the budget spent; node 2 hears ttl=0 and stays quiet
    assert any(p.hop_count == 1 and p.ttl == 0 for p in floods)
    assert all(p.hop_count < 2 for p in floods)


def test_destination_replies_with_endpoint_cost_added():
    # destination cost is folded into the reply: 0.6 on arrival + 0.1 own
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (100, 0)],
                      cost_fn=frozen_cost_fn([0.6, 0.1]), trace=tr)
    routing.start_discovery(eng, eng.nodes[0], 1, T1)
    eng.run()
    reps = sent_packets(tr, Rrep)
    assert reps and reps[0].cumulative_cost == pytest.approx(0.7)


def test_destination_picks_cheaper_of_two_paths():
    # diamond: 0 -> {1, 2} -> 3, with node 2 much cheaper than node 1
    positions = [(0, 0), (200, 100), (200, -100), (400, 0)]
    costs = [0.0, 0.9, 0.2, 0.1]
    tr = MemoryTrace()
    eng = make_engine(positions, cost_fn=frozen_cost_fn(costs), trace=tr)
    routing.start_discovery(eng, eng.nodes[0], 3, T1)
    eng.run()
    reps = sent_packets(tr, Rrep)
    assert reps[0].cumulative_cost == pytest.approx(0.2 + 0.1)
    route = eng.nodes[0].rt.table_for(T1)[3]
    assert route.next_hop == 2
    # the reply's cost is recorded verbatim on the installed route
    assert route.cumulative_cost == pytest.approx(0.3)


def test_rrep_cost_constant_across_hops():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (200, 0), (400, 0)],
                      cost_fn=frozen_cost_fn([0.1, 0.2, 0.3]), trace=tr)
    routing.start_discovery(eng, eng.nodes[0], 2, T1)
    eng.run()
    reps = sent_packets(tr, Rrep)
    assert len(reps) == 2  # destination emission plus one forward
    assert reps[0].cumulative_cost == reps[1].cumulative_cost
    assert reps[1].hop_count == reps[0].hop_count + 1


def test_originator_flushes_buffer_fifo():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (200, 0), (400, 0)], trace=tr, duration=20.0)
    for seq in range(5):
        routing.send_data(eng, eng.nodes[0], data(0, 2, seq=seq))
    assert len(eng.nodes[0].rt.pending[(2, T1)].buffered) == 5
    eng.run()
    assert eng.ledger.delivered == 5
    first_hop = [r[3] for r in tr.records
                 if r[1] == EV_SEND and r[3].__class__ is DataPacket and r[2] == 0]
    assert [p.seq for p in first_hop] == [0, 1, 2, 3, 4]


def test_empty_buffer_discovery_sends_no_data():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (200, 0)], trace=tr)
    routing.start_discovery(eng, eng.nodes[0], 1, T1)
    eng.run()
    assert eng.nodes[0].rt.table_for(T1)[1] is not None
    assert not sent_packets(tr, DataPacket)


# -- route lookup ---------------------------------------------------------------

def test_lookup_empty_and_expired():
    eng = make_engine([(0, 0), (100, 0)])
    node = eng.nodes[0]
    assert routing.lookup_route(eng, node, 1, T1) is None
    node.rt.table_for(T1)[1] = RouteEntry(1, 1, 1, 1, expiry_us=5, cumulative_cost=0.0)
    eng.now = 10
    assert routing.lookup_route(eng, node, 1, T1) is None
    assert 1 not in node.rt.table_for(T1)


def test_lookup_refreshes_expiry():
    eng = make_engine([(0, 0), (100, 0)])
    node = eng.nodes[0]
    node.rt.table_for(T1)[1] = RouteEntry(1, 1, 1, 1, expiry_us=100, cumulative_cost=0.0)
    eng.now = 50
    entry = routing.lookup_route(eng, node, 1, T1)
    assert entry is not None and entry.expiry_us == 50 + eng.art_us


def test_tables_are_independent():
    eng = make_engine([(0, 0), (100, 0)], protocol="tspba")
    node = eng.nodes[0]
    node.rt.table_for(T1)[1] = RouteEntry(1, 1, 1, 1, expiry_us=10**9,
                                          cumulative_cost=0.0)
    assert routing.lookup_route(eng, node, 1, T2) is None
    assert routing.lookup_route(eng, node, 1, T1) is not None


def test_single_table_protocols_share_lookups():
    eng = make_engine([(0, 0), (100, 0)], protocol="cpacl")
    node = eng.nodes[0]
    node.rt.table_for(T1)[1] = RouteEntry(1, 1, 1, 1, expiry_us=10**9,
                                          cumulative_cost=0.0)
    assert routing.lookup_route(eng, node, 1, T2) is not None


# -- link breaks and route errors ---------------------------------------------

def entry(dest, nh, seq=4):
    return RouteEntry(dest, nh, seq, 2, expiry_us=10**12, cumulative_cost=0.5)


def test_link_break_emits_one_rerr_per_affected_table():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (100, 0), (200, 0)], protocol="tspba", trace=tr)
    node = eng.nodes[0]
    node.rt.table_for(T1)[5] = entry(5, 1)
    node.rt.table_for(T1)[6] = entry(6, 1)
    node.rt.table_for(T2)[7] = entry(7, 1)
    node.rt.table_for(T2)[8] = entry(8, 2)  # different next hop, survives
    routing.on_link_break(eng, node, 1, data(0, 5))
    eng.run()
    errs = sent_packets(tr, Rerr)
    assert len(errs) == 2
    by_app = {e.app_type: e for e in errs}
    assert set(by_app[T1].unreachable) == {(5, 5), (6, 5)}
    assert set(by_app[T2].unreachable) == {(7, 5)}
    # no usable entry through the broken hop remains anywhere
    for table in node.rt.tables:
        assert all(e.next_hop != 1 for e in table.values())
    assert node.rt.table_for(T2)[8].next_hop == 2


def test_link_break_without_routes_is_silent():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (100, 0)], trace=tr)
    routing.on_link_break(eng, eng.nodes[0], 1, data(0, 5))
    eng.run()
    assert not sent_packets(tr, Rerr)


def test_rerr_receiver_invalidates_and_propagates():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (100, 0)], trace=tr)
    node = eng.nodes[0]
    node.rt.table_for(T1)[5] = entry(5, 1, seq=4)
    routing.handle_rerr(eng, node, Rerr(((5, 9),), T1), prev_hop=1)
    assert 5 not in node.rt.table_for(T1)
    eng.run()
    errs = sent_packets(tr, Rerr)
    assert errs and errs[0].unreachable == ((5, 9),)


def test_rerr_receiver_absorbs_when_unaffected():
    tr = MemoryTrace()
    eng = make_engine([(0, 0), (100, 0)], trace=tr)
    node = eng.nodes[0]
    node.rt.table_for(T1)[5] = entry(5, 2)  # learned via a different neighbour
    routing.handle_rerr(eng, node, Rerr(((5, 9), (6, 1)), T1), prev_hop=1)
    assert 5 in node.rt.table_for(T1)
    eng.run()
    assert not sent_packets(tr, Rerr)


def test_mid_route_break_recovers_end_to_end():
    # relay dies mid-run; the source re-discovers around it
    positions = [(0, 0), (150, 80), (150, -80), (300, 0)]
    tr = MemoryTrace()
    eng = make_engine(positions, trace=tr, duration=40.0, flows=None,
                      send_rate=1.0)
    eng.run()
    assert eng.ledger.delivered > 0
    assert eng.ledger.generated == 4 * 40


# -- protocol variant equivalence ----------------------------------------------

def test_cpacl_equals_power_only_single_table_tspba():
    from manetsim.cost import battery_used_fraction, node_cost, CostComponents

    def tspba_power_only(engine, node, app):
        # weights (0, 0, 1) over live components reduce to the battery term
        c = engine.components(node)
        return 0.0 * c.bandwidth + 0.0 * c.delay + 1.0 * c.power

    blobs = []
    for cost_fn, proto in ((None, "cpacl"), (tspba_power_only, "tspba")):
        tr = MemoryTrace()
        eng = make_engine([(0, 0), (140, 60), (140, -60), (280, 0), (420, 0)],
                          protocol=proto, cost_fn=cost_fn, tables=1,
                          flows=None, duration=30.0, trace=tr,
                          e_tx_per_byte=2e-3, e_rx_per_byte=1e-3)
        eng.run()
        blobs.append(tr.to_bytes())
    assert blobs[0] == blobs[1]
