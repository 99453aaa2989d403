from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobihost import ChurnSpec, MessageKind, PeerId, Role, apply_churn, create_overlay, rebind_endpoint, route
from mobihost.errors import DanglingRendezvous, DuplicatePeerId, EmptyTopology, SourceOffline, UnknownPeer
from mobihost.overlay import OverlayMessage
from oracles import flood_enumeration


def ring_overlay(n_supers=4, seed=0):
    peers = [{"name": f"S{i}", "role": "super"} for i in range(n_supers)]
    peers += [{"name": f"E{i}", "role": "edge", "rendezvous": f"S{i}"} for i in range(n_supers)]
    links = [[f"S{i}", f"S{(i + 1) % n_supers}"] for i in range(n_supers)]
    return create_overlay({"peers": peers, "links": links}, seed)


class TestCreate:
    def test_star(self, star):
        assert len(star.peers) == 3
        assert set(star.super_graph()) == {star.resolve("S").id}
        a = star.resolve("A")
        assert a.role is Role.EDGE and a.rendezvous == star.resolve("S").id and a.online

    def test_cross_rendezvous_path(self, chain):
        path = chain.path("A", "B", 7)
        assert [chain.name_of(p) for p in path] == ["A", "S1", "S2", "B"]

    def test_dangling_rendezvous(self):
        with pytest.raises(DanglingRendezvous):
            create_overlay({"peers": [{"name": "A", "role": "edge", "rendezvous": "S9"}]})

    def test_rendezvous_must_be_super(self):
        with pytest.raises(DanglingRendezvous):
            create_overlay(
                {
                    "peers": [
                        {"name": "S", "role": "super"},
                        {"name": "A", "role": "edge", "rendezvous": "S"},
                        {"name": "B", "role": "edge", "rendezvous": "A"},
                    ]
                }
            )

    def test_duplicate_and_empty(self):
        with pytest.raises(DuplicatePeerId):
            create_overlay({"peers": [{"name": "S", "role": "super"}, {"name": "S", "role": "super"}]})
        with pytest.raises(EmptyTopology):
            create_overlay({"peers": []})

    def test_relay_acts_as_rendezvous(self):
        ov = create_overlay({"peers": [{"name": "R", "role": "relay"}, {"name": "A", "rendezvous": "R"}]})
        assert ov.resolve("R").is_super

    def test_peer_ids_are_128_bit_hex(self, star):
        for pid in star.peers:
            assert len(pid.value) == 32 and int(pid.value, 16) >= 0
        with pytest.raises(ValueError):
            PeerId("XYZ")

    def test_dual_addressing(self, star):
        assert star.resolve("4917000001") is star.resolve("A")
        assert star.resolve(star.resolve("A").id.value) is star.resolve("A")


class TestRoute:
    def test_one_rendezvous_two_hops(self, star):
        star.clock.tick = 10
        msg = star.new_message(MessageKind.SERVICE_INVOKE, "A", "B", hops=2)
        report = route(msg, star)
        assert [(star.name_of(d.peer), d.tick) for d in report] == [("B", 12)]

    def test_budget_exhausted_at_second_super(self, chain):
        msg = chain.new_message(MessageKind.SERVICE_INVOKE, "A", "B", hops=2)
        assert route(msg, chain) == []
        msg = chain.new_message(MessageKind.SERVICE_INVOKE, "A", "B", hops=3)
        assert [d.hops for d in route(msg, chain)] == [3]

    def test_source_offline(self, star):
        star.set_online("A", False)
        with pytest.raises(SourceOffline):
            star.route(star.new_message(MessageKind.QUERY_REQUEST, "A"))

    def test_offline_destination_is_partition(self, star):
        star.set_online("B", False)
        assert star.route(star.new_message(MessageKind.SERVICE_INVOKE, "A", "B")) == []

    def test_ring_broadcast_matches_flood_enumeration(self):
        ov = ring_overlay(4)
        report = ov.route(ov.new_message(MessageKind.QUERY_REQUEST, "E0", None, hops=8))
        names = [ov.name_of(d.peer) for d in report]
        assert len(names) == len(set(names)) == 7  # every peer but the source, once
        adj = {ov.name_of(p): [ov.name_of(n) for n in ov.neighbours(p)] for p in ov.peers}
        relays = {n for n in adj if n.startswith("S")}
        expected = flood_enumeration(adj, relays, "E0", 8)
        assert {ov.name_of(d.peer): d.hops for d in report} == expected
        # both ring directions reach S2; the second copy is dropped
        assert ov.stats["duplicates_suppressed"] >= 1

    def test_duplicate_msg_id_not_reprocessed(self, star):
        msg = star.new_message(MessageKind.QUERY_REQUEST, "A", None, hops=3)
        assert len(star.route(msg)) == 2
        assert star.route(msg) == []

    def test_edges_do_not_relay(self, star):
        # B is reached but must not forward back into the overlay
        report = star.route(star.new_message(MessageKind.QUERY_REQUEST, "A", None, hops=7))
        assert max(d.hops for d in report) == 2

    def test_hops_remaining_non_negative(self):
        with pytest.raises(ValueError):
            OverlayMessage("m", MessageKind.QUERY_REQUEST, PeerId.derive("x"), None, -1)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(2, 8),
    extra=st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=8),
    budget=st.integers(1, 10),
    src=st.integers(0, 7),
)
def test_broadcast_properties(n, extra, budget, src):
    peers = [{"name": f"S{i}", "role": "super"} for i in range(n)]
    peers += [{"name": f"E{i}", "role": "edge", "rendezvous": f"S{i}"} for i in range(n)]
    links = {tuple(sorted((f"S{i}", f"S{i + 1}"))) for i in range(n - 1)}
    links |= {tuple(sorted((f"S{a % n}", f"S{b % n}"))) for a, b in extra if a % n != b % n}
    ov = create_overlay({"peers": peers, "links": [list(l) for l in sorted(links)]})
    source = f"E{src % n}"
    report = ov.route(ov.new_message(MessageKind.QUERY_REQUEST, source, None, hops=budget))
    reached = [d.peer for d in report]
    assert len(reached) == len(set(reached))  # no duplicate processing
    assert all(d.hops <= budget for d in report)  # hop soundness
    adj = {ov.name_of(p): [ov.name_of(x) for x in ov.neighbours(p)] for p in ov.peers}
    expected = flood_enumeration(adj, {f"S{i}" for i in range(n)}, source, budget)
    assert {ov.name_of(d.peer): d.hops for d in report} == expected


class TestRebind:
    def test_rebind_keeps_delivery(self, star):
        rebind_endpoint("A", "10.0.9.9:80", star)
        report = star.route(star.new_message(MessageKind.SERVICE_INVOKE, "S", "A", hops=1))
        assert [star.name_of(d.peer) for d in report] == ["A"]
        assert star.resolve("A").endpoint.address == "10.0.9.9:80"

    def test_unknown_peer(self, star):
        with pytest.raises(UnknownPeer):
            star.rebind_endpoint("Z", "1.2.3.4:5")

    def test_history(self, star):
        star.clock.tick = 5
        star.rebind_endpoint("A", "10.0.0.6:80")
        star.clock.tick = 9
        star.rebind_endpoint("A", "10.0.0.7:80")
        assert [e.valid_from for e in star.resolve("A").endpoint_history] == [0, 5, 9]

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from(["A", "B", "S"]), st.integers(0, 255)), max_size=6))
    def test_peer_id_stability(self, rebinds):
        def fresh():
            return create_overlay(
                {
                    "peers": [
                        {"name": "S", "role": "super"},
                        {"name": "A", "role": "edge", "rendezvous": "S"},
                        {"name": "B", "role": "edge", "rendezvous": "S"},
                    ]
                }
            )

        plain, moved = fresh(), fresh()
        for i, (peer, octet) in enumerate(rebinds):
            moved.clock.tick = i
            moved.rebind_endpoint(peer, f"10.9.{octet}.1:80")
        moved.clock.tick = 0
        for ov in (plain, moved):
            ov.stats.clear()
        r1 = plain.route(plain.new_message(MessageKind.QUERY_REQUEST, "A", None, hops=3))
        r2 = moved.route(moved.new_message(MessageKind.QUERY_REQUEST, "A", None, hops=3))
        assert r1 == r2


class TestChurn:
    def test_zero_probabilities(self):
        ov = ring_overlay()
        assert apply_churn(ov, ChurnSpec()) == []

    def test_certain_leave(self):
        ov = ring_overlay()
        ov.advance()
        events = apply_churn(ov, ChurnSpec(p_leave=1.0))
        assert {e.event for e in events} == {"leave"}
        assert all(not n.online for n in ov.peers.values() if n.role is Role.EDGE)
        assert all(n.online for n in ov.peers.values() if n.is_super)
        assert {e.tick for e in events} == {1}

    @staticmethod
    def _run(seed):
        ov = create_overlay(
            {"peers": [{"name": "S", "role": "super"}] + [{"name": f"E{i}", "rendezvous": "S"} for i in range(4)]},
            seed,
        )
        log = []
        for _ in range(10):
            ov.advance()
            log += [e.to_json() for e in ov.apply_churn(ChurnSpec(p_leave=0.3, p_join=0.3, p_rebind=0.2))]
        return log

    def test_seeded_determinism(self):
        assert self._run(42) == self._run(42)
        assert self._run(42) != self._run(43)

    def test_probabilities_validated(self):
        with pytest.raises(ValueError):
            ChurnSpec(p_leave=1.5)

    def test_departing_host_ads_stay_cached_elsewhere(self, star):
        from conftest import weather_wsdl
        from mobihost import publish_service

        ads = publish_service(star, "A", weather_wsdl(), lifetime=100)
        star.set_online("A", False)
        s_cache = star.resolve("S").cache
        assert all(s_cache.lookup(a.adv_id, 50) is not None for a in ads)
