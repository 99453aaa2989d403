"""Simulated super-peer overlay driven by a deterministic tick clock.

Edge peers (Mobile Hosts and clients) attach to exactly one rendezvous super
peer and never talk to each other directly; super peers link into a graph and
relay traffic.  Each forwarding step costs one hop and one tick.  Relay peers
behave exactly like super peers.
"""

from __future__ import annotations

import enum
import json
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, NamedTuple

from .adverts import Advertisement, AdvertisementCache, PeerGroup
from .errors import (
    DanglingRendezvous,
    DuplicatePeerId,
    EmptyTopology,
    SourceOffline,
    TopologyError,
    UnknownPeer,
)
from .ids import PeerId

DEFAULT_HOP_BUDGET = 7


class Role(str, enum.Enum):
    EDGE = "edge"
    SUPER = "super"
    RELAY = "relay"

    @property
    def is_super(self) -> bool:
        return self is not Role.EDGE


class MessageKind(str, enum.Enum):
    PUBLISH_ADV = "PublishAdv"
    QUERY_REQUEST = "QueryRequest"
    QUERY_RESPONSE = "QueryResponse"
    SERVICE_INVOKE = "ServiceInvoke"
    SERVICE_RESULT = "ServiceResult"


@dataclass(frozen=True)
class Endpoint:
    address: str
    valid_from: int


@dataclass
class PeerNode:
    id: PeerId
    name: str
    role: Role
    endpoint: Endpoint
    cache: AdvertisementCache
    rendezvous: PeerId | None = None
    phone_number: str | None = None
    online: bool = True
    endpoint_history: list[Endpoint] = field(default_factory=list)
    # advertisements this peer publishes, kept apart from the cache so a
    # swept local copy can still be republished
    own_ads: dict[str, Advertisement] = field(default_factory=dict)

    @property
    def is_super(self) -> bool:
        return self.role.is_super


@dataclass(frozen=True)
class OverlayMessage:
    """A routed message.  ``destination=None`` means broadcast."""

    msg_id: str
    kind: MessageKind
    source: PeerId
    destination: PeerId | None
    hops_remaining: int
    payload: Any = None

    def __post_init__(self) -> None:
        if self.hops_remaining < 0:
            raise ValueError("hops_remaining must be non-negative")

    @property
    def is_broadcast(self) -> bool:
        return self.destination is None


class Delivery(NamedTuple):
    peer: PeerId
    tick: int
    hops: int
    via: PeerId | None


@dataclass
class SimClock:
    seed: int = 0
    tick: int = 0
    rng: random.Random = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.rng = random.Random(self.seed)

    def advance(self) -> int:
        self.tick += 1
        return self.tick


@dataclass(frozen=True)
class Event:
    tick: int
    event: str
    peer: str
    detail: Mapping[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict:
        return {"tick": self.tick, "event": self.event, "peer": self.peer, "detail": dict(self.detail)}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class ChurnSpec:
    """Per-tick Bernoulli probabilities applied to peers whose role is in ``roles``."""

    p_leave: float = 0.0
    p_join: float = 0.0
    p_rebind: float = 0.0
    roles: tuple[Role, ...] = (Role.EDGE,)

    def __post_init__(self) -> None:
        for name in ("p_leave", "p_join", "p_rebind"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        object.__setattr__(self, "roles", tuple(Role(r) for r in self.roles))

    @property
    def inert(self) -> bool:
        return self.p_leave == 0 and self.p_join == 0 and self.p_rebind == 0


class Overlay:
    def __init__(self, seed: int = 0):
        self.clock = SimClock(seed)
        self.peers: dict[PeerId, PeerNode] = {}
        self.links: dict[PeerId, set[PeerId]] = {}
        self.attached: dict[PeerId, set[PeerId]] = {}
        self.groups: dict[str, PeerGroup] = {}
        self.stats: Counter[str] = Counter()
        self.events: list[Event] = []
        self._by_name: dict[str, PeerId] = {}
        self._by_phone: dict[str, PeerId] = {}
        self._seen: dict[PeerId, set[str]] = {}
        self._msg_counter = 0

    # -- construction ------------------------------------------------------

    def add_peer(
        self,
        name: str,
        role: Role | str,
        *,
        rendezvous: str | None = None,
        phone_number: str | None = None,
        address: str | None = None,
        capacity: int | None = None,
    ) -> PeerNode:
        role = Role(role)
        pid = PeerId.derive(name)
        if name in self._by_name or pid in self.peers:
            raise DuplicatePeerId(f"peer {name!r} declared twice")
        rv_id = None
        if role is Role.EDGE:
            if rendezvous is None:
                raise DanglingRendezvous(f"edge peer {name!r} names no rendezvous")
            rv_id = self._by_name.get(rendezvous)
            if rv_id is None or not self.peers[rv_id].is_super:
                raise DanglingRendezvous(f"edge peer {name!r} names unknown or non-super rendezvous {rendezvous!r}")
        elif phone_number is not None:
            raise TopologyError(f"super peer {name!r} cannot carry a phone number")
        if phone_number is not None:
            if not phone_number.isdigit():
                raise TopologyError(f"phone number of {name!r} must be a digit string")
            if phone_number in self._by_phone:
                raise DuplicatePeerId(f"phone number {phone_number} assigned twice")
            self._by_phone[phone_number] = pid
        if address is None:
            n = len(self.peers)
            address = f"10.0.{n // 250}.{n % 250 + 1}:9701"
        endpoint = Endpoint(address, self.clock.tick)
        node = PeerNode(
            id=pid,
            name=name,
            role=role,
            endpoint=endpoint,
            cache=AdvertisementCache(pid, capacity),
            rendezvous=rv_id,
            phone_number=phone_number,
            endpoint_history=[endpoint],
        )
        self.peers[pid] = node
        self._by_name[name] = pid
        self._seen[pid] = set()
        if role.is_super:
            self.links[pid] = set()
            self.attached[pid] = set()
        else:
            self.attached[rv_id].add(pid)
        return node

    def link(self, a: str, b: str) -> None:
        pa, pb = self.resolve(a), self.resolve(b)
        if not (pa.is_super and pb.is_super):
            raise TopologyError(f"only super peers can be linked ({a}-{b})")
        if pa.id == pb.id:
            raise TopologyError(f"self-link on {a}")
        self.links[pa.id].add(pb.id)
        self.links[pb.id].add(pa.id)

    def register_group(self, group: PeerGroup) -> None:
        self.groups[group.id] = group

    # -- lookup -------------------------------------------------------------

    def resolve(self, ref: PeerId | str) -> PeerNode:
        """Find a peer by PeerId, 32-hex id string, name, or phone number."""
        if isinstance(ref, PeerId):
            pid = ref
        elif ref in self._by_name:
            pid = self._by_name[ref]
        elif ref in self._by_phone:
            pid = self._by_phone[ref]
        else:
            try:
                pid = PeerId(ref)
            except (ValueError, TypeError):
                raise UnknownPeer(f"unknown peer {ref!r}") from None
        try:
            return self.peers[pid]
        except KeyError:
            raise UnknownPeer(f"unknown peer {ref!r}") from None

    def name_of(self, pid: PeerId) -> str:
        return self.peers[pid].name

    @property
    def tick(self) -> int:
        return self.clock.tick

    @property
    def caches(self) -> dict[PeerId, AdvertisementCache]:
        return {pid: node.cache for pid, node in self.peers.items()}

    def super_graph(self) -> dict[PeerId, set[PeerId]]:
        return {pid: set(nbrs) for pid, nbrs in self.links.items()}

    # -- routing ------------------------------------------------------------

    def neighbours(self, pid: PeerId) -> list[PeerId]:
        """Online peers a message at ``pid`` may be forwarded to."""
        node = self.peers[pid]
        if node.is_super:
            cand: Iterable[PeerId] = self.links[pid] | self.attached[pid]
        else:
            cand = (node.rendezvous,)
        return sorted(p for p in cand if self.peers[p].online)

    def reachable(self, source: PeerId | str, budget: int) -> dict[PeerId, tuple[int, PeerId | None]]:
        """Breadth-first hop distances from ``source`` within ``budget``; no side effects.

        Edge peers never relay, so they only appear as leaves (or as the source).
        """
        src = self.resolve(source)
        if not src.online:
            return {}
        out: dict[PeerId, tuple[int, PeerId | None]] = {src.id: (0, None)}
        queue = deque([src.id])
        while queue:
            pid = queue.popleft()
            dist = out[pid][0]
            if dist >= budget or (pid != src.id and not self.peers[pid].is_super):
                continue
            for nb in self.neighbours(pid):
                if nb not in out:
                    out[nb] = (dist + 1, pid)
                    queue.append(nb)
        return out

    def path(self, source: PeerId | str, destination: PeerId | str, budget: int) -> list[PeerId] | None:
        dest = self.resolve(destination).id
        tree = self.reachable(source, budget)
        if dest not in tree:
            return None
        hops = [dest]
        while tree[hops[-1]][1] is not None:
            hops.append(tree[hops[-1]][1])
        return hops[::-1]

    def new_message(
        self,
        kind: MessageKind,
        source: PeerId | str,
        destination: PeerId | str | None = None,
        hops: int = DEFAULT_HOP_BUDGET,
        payload: Any = None,
    ) -> OverlayMessage:
        self._msg_counter += 1
        src = self.resolve(source).id
        dst = None if destination is None else self.resolve(destination).id
        return OverlayMessage(f"m{self._msg_counter:08d}", MessageKind(kind), src, dst, hops, payload)

    def route(self, msg: OverlayMessage) -> list[Delivery]:
        """Deliver ``msg`` and report ``(peer, tick, hops, via)`` per receiving peer.

        An unreachable unicast destination yields an empty report.  A peer
        that has already processed ``msg.msg_id`` drops further copies.
        """
        src = self.resolve(msg.source)
        if not src.online:
            raise SourceOffline(f"{src.name} is offline")
        self._seen[src.id].add(msg.msg_id)
        now = self.clock.tick
        if not msg.is_broadcast:
            hops = self.path(src.id, msg.destination, msg.hops_remaining)
            if hops is None:
                return []
            self.stats[msg.kind.value] += len(hops) - 1
            for pid in hops[1:]:
                if msg.msg_id in self._seen[pid]:
                    self.stats["duplicates_suppressed"] += 1
                    return []
                self._seen[pid].add(msg.msg_id)
            d = len(hops) - 1
            return [Delivery(hops[-1], now + d, d, hops[-2] if d else None)]

        report: list[Delivery] = []
        frontier = [(src.id, msg.hops_remaining)]
        step = 0
        while frontier:
            step += 1
            nxt = []
            for pid, remaining in frontier:
                if remaining == 0:
                    continue
                for nb in self.neighbours(pid):
                    self.stats[msg.kind.value] += 1
                    if msg.msg_id in self._seen[nb]:
                        self.stats["duplicates_suppressed"] += 1
                        continue
                    self._seen[nb].add(msg.msg_id)
                    report.append(Delivery(nb, now + step, step, pid))
                    if self.peers[nb].is_super:
                        nxt.append((nb, remaining - 1))
            frontier = nxt
        return report

    # -- membership and endpoints -------------------------------------------

    def _log(self, event: str, node: PeerNode, **detail: Any) -> Event:
        ev = Event(self.clock.tick, event, node.name, detail)
        self.events.append(ev)
        return ev

    def rebind_endpoint(self, peer: PeerId | str, new_address: str) -> Endpoint:
        node = self.resolve(peer)
        old = node.endpoint.address
        node.endpoint = Endpoint(new_address, self.clock.tick)
        node.endpoint_history.append(node.endpoint)
        self._log("rebind", node, old=old, new=new_address)
        return node.endpoint

    def set_online(self, peer: PeerId | str, online: bool) -> Event | None:
        node = self.resolve(peer)
        if node.online == online:
            return None
        node.online = online
        return self._log("join" if online else "leave", node)

    def apply_churn(self, spec: ChurnSpec) -> list[Event]:
        """One tick of churn; peers are visited in PeerId order so draws are reproducible."""
        if spec.inert:
            return []
        rng = self.clock.rng
        events: list[Event] = []
        for pid in sorted(self.peers):
            node = self.peers[pid]
            if node.role not in spec.roles:
                continue
            if node.online:
                if rng.random() < spec.p_leave:
                    events.append(self.set_online(pid, False))
                elif rng.random() < spec.p_rebind:
                    addr = f"10.{rng.randrange(256)}.{rng.randrange(256)}.{rng.randrange(1, 255)}:9701"
                    self.rebind_endpoint(pid, addr)
                    events.append(self.events[-1])
            elif rng.random() < spec.p_join:
                events.append(self.set_online(pid, True))
        return events

    def advance(self) -> int:
        return self.clock.advance()


def create_overlay(topology: Mapping[str, Any], seed: int = 0) -> Overlay:
    """Build an overlay from ``{"peers": [...], "links": [[a, b], ...]}``.

    Peer records: ``{"name", "role", "rendezvous"?, "phone"?, "address"?, "capacity"?}``.
    Declaration order is free: super peers are created before edge peers.
    """
    peers = list(topology.get("peers", []))
    if not peers:
        raise EmptyTopology("topology declares no peers")
    names = [p["name"] for p in peers]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise DuplicatePeerId(f"peer(s) declared twice: {sorted(dup)}")
    ov = Overlay(seed)
    # supers first so edges can resolve their rendezvous regardless of order
    ordered = sorted(peers, key=lambda p: Role(p.get("role", "edge")) is Role.EDGE)
    for p in ordered:
        ov.add_peer(
            p["name"],
            p.get("role", "edge"),
            rendezvous=p.get("rendezvous"),
            phone_number=p.get("phone"),
            address=p.get("address"),
            capacity=p.get("capacity"),
        )
    for a, b in topology.get("links", []):
        ov.link(a, b)
    return ov


def route(msg: OverlayMessage, overlay: Overlay) -> list[Delivery]:
    return overlay.route(msg)


def rebind_endpoint(peer: PeerId | str, new_address: str, overlay: Overlay) -> Overlay:
    overlay.rebind_endpoint(peer, new_address)
    return overlay


def apply_churn(overlay: Overlay, churn_spec: ChurnSpec) -> list[Event]:
    return overlay.apply_churn(churn_spec)
