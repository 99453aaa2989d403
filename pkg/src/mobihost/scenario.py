"""Scenario configuration: a single JSON document validated before any tick runs.

See ``docs/scenario.md`` for the schema and the table of defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .adverts import DEFAULT_LIFETIME, PeerGroup
from .context import (
    DEFAULT_MAX_DISTANCE,
    DEFAULT_MAX_LOAD,
    CapabilitySignature,
    ClientContext,
    ConceptOntology,
    ContextProfile,
)
from .discovery import DEFAULT_MAX_RESULTS, Query
from .errors import ConfigInvalid, MobiHostError
from .overlay import DEFAULT_HOP_BUDGET, ChurnSpec, Overlay, Role, create_overlay
from .ranking import DEFAULT_AMS_THRESHOLD
from .wsdl import WsdlDescriptor, import_wsdl_record

_MISSING = object()


@dataclass(frozen=True)
class Params:
    lifetime: int = DEFAULT_LIFETIME
    republish_period: int | None = DEFAULT_LIFETIME // 2
    hop_budget: int = DEFAULT_HOP_BUDGET
    max_results: int = DEFAULT_MAX_RESULTS
    ams_threshold: float = DEFAULT_AMS_THRESHOLD
    max_distance: float = DEFAULT_MAX_DISTANCE
    max_load: float = DEFAULT_MAX_LOAD


@dataclass(frozen=True)
class ServiceEntry:
    host: str
    wsdl: WsdlDescriptor
    groups: tuple[str, ...] = ()
    platforms: tuple[str, ...] = ("midp",)
    publish_at: int = 0
    version: str = "1.0"
    lifetime: int | None = None


@dataclass(frozen=True)
class ScriptedEvent:
    tick: int
    event: str
    peer: str
    address: str | None = None


@dataclass(frozen=True)
class ScriptedQuery:
    tick: int
    origin: str
    query: Query
    client: ClientContext
    platform: str = "midp"


@dataclass(frozen=True)
class ScriptedInvoke:
    tick: int
    query_id: str
    rank: int = 1


@dataclass
class ScenarioConfig:
    topology: Mapping[str, Any]
    seed: int = 0
    ticks: int = 100
    params: Params = field(default_factory=Params)
    groups: list[PeerGroup] = field(default_factory=list)
    ontology: ConceptOntology = field(default_factory=lambda: ConceptOntology(()))
    profiles: dict[str, ContextProfile] = field(default_factory=dict)
    services: list[ServiceEntry] = field(default_factory=list)
    churn: ChurnSpec = field(default_factory=ChurnSpec)
    events: list[ScriptedEvent] = field(default_factory=list)
    queries: list[ScriptedQuery] = field(default_factory=list)
    invocations: list[ScriptedInvoke] = field(default_factory=list)

    def build_overlay(self) -> Overlay:
        ov = create_overlay(self.topology, self.seed)
        for g in self.groups:
            ov.register_group(g)
        return ov


def _get(doc: Mapping, key: str, path: str, types: type | tuple, default: Any = _MISSING) -> Any:
    where = f"{path}.{key}" if path else key
    if key not in doc or doc[key] is None and default is not _MISSING:
        if default is _MISSING:
            raise ConfigInvalid(where, "required field missing")
        return default
    value = doc[key]
    bad_bool = isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,))
    if not isinstance(value, types) or bad_bool:
        names = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ConfigInvalid(where, f"expected {names}, got {type(value).__name__}")
    return value


def _obj(doc: Any, path: str) -> Mapping:
    if not isinstance(doc, Mapping):
        raise ConfigInvalid(path or "<root>", "expected an object")
    return doc


def _str_list(doc: Mapping, key: str, path: str, default: Any = ()) -> tuple[str, ...]:
    value = _get(doc, key, path, list, list(default))
    for i, v in enumerate(value):
        if not isinstance(v, str):
            raise ConfigInvalid(f"{path}.{key}[{i}]", "expected a string")
    return tuple(value)


def _tick(doc: Mapping, key: str, path: str, default: Any = _MISSING) -> int:
    value = _get(doc, key, path, int, default)
    if value < 0:
        raise ConfigInvalid(f"{path}.{key}", "tick must be non-negative")
    return value


def parse_profile(doc: Any, path: str) -> ContextProfile:
    doc = _obj(doc, path)
    try:
        return ContextProfile.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(path, str(exc)) from None


def parse_signature(doc: Any, path: str, ontology: ConceptOntology) -> CapabilitySignature:
    doc = _obj(doc, path)
    sig = CapabilitySignature(_str_list(doc, "inputs", path), _str_list(doc, "outputs", path))
    for c in sig.concepts():
        if c not in ontology.concepts:
            raise ConfigInvalid(path, f"unknown concept {c!r}")
    return sig


def _params(doc: Mapping) -> Params:
    p = "params"
    lifetime = _get(doc, "lifetime", p, int, DEFAULT_LIFETIME)
    if lifetime <= 0:
        raise ConfigInvalid("params.lifetime", "lifetime must be positive")
    if "republish_period" in doc and doc["republish_period"] is None:
        period = None
    else:
        period = _get(doc, "republish_period", p, int, lifetime // 2)
        if period <= 0:
            raise ConfigInvalid("params.republish_period", "period must be positive (use null to disable)")
    hop_budget = _get(doc, "hop_budget", p, int, DEFAULT_HOP_BUDGET)
    if hop_budget < 1:
        raise ConfigInvalid("params.hop_budget", "hop budget must be positive")
    max_results = _get(doc, "max_results", p, int, DEFAULT_MAX_RESULTS)
    if max_results < 1:
        raise ConfigInvalid("params.max_results", "max_results must be positive")
    thr = float(_get(doc, "ams_threshold", p, (int, float), DEFAULT_AMS_THRESHOLD))
    if not 0.0 <= thr <= 1.0:
        raise ConfigInvalid("params.ams_threshold", "threshold must lie in [0, 1]")
    max_distance = float(_get(doc, "max_distance", p, (int, float), DEFAULT_MAX_DISTANCE))
    max_load = float(_get(doc, "max_load", p, (int, float), DEFAULT_MAX_LOAD))
    return Params(lifetime, period, hop_budget, max_results, thr, max_distance, max_load)


def parse_scenario(doc: Any) -> ScenarioConfig:
    """Validate a decoded scenario document; raise :class:`ConfigInvalid` with a field path."""
    doc = _obj(doc, "")
    seed = _get(doc, "seed", "", int, 0)
    ticks = _get(doc, "ticks", "", int, 100)
    if ticks < 1:
        raise ConfigInvalid("ticks", "must be positive")
    params = _params(_obj(doc.get("params", {}), "params"))

    topology = _obj(_get(doc, "topology", "", dict), "topology")
    peers = _get(topology, "peers", "topology", list)
    for i, peer in enumerate(peers):
        where = f"topology.peers[{i}]"
        peer = _obj(peer, where)
        _get(peer, "name", where, str)
        role = _get(peer, "role", where, str, "edge")
        if role not in {r.value for r in Role}:
            raise ConfigInvalid(f"{where}.role", f"unknown role {role!r}")
    links = _get(topology, "links", "topology", list, [])
    for i, link in enumerate(links):
        if not (isinstance(link, list) and len(link) == 2 and all(isinstance(x, str) for x in link)):
            raise ConfigInvalid(f"topology.links[{i}]", "expected a [peer, peer] pair")

    groups = []
    for i, g in enumerate(_get(doc, "groups", "", list, [])):
        where = f"groups[{i}]"
        g = _obj(g, where)
        path = _str_list(g, "category_path", where)
        name = _get(g, "name", where, str, "/".join(path))
        try:
            group = PeerGroup(g["id"], name, path) if "id" in g else PeerGroup.from_path(name, path)
        except MobiHostError as exc:
            raise ConfigInvalid(where, str(exc)) from None
        groups.append(group)
    group_ids = {g.id for g in groups}

    try:
        ontology = ConceptOntology.from_dict(_obj(doc.get("ontology", {}), "ontology"))
    except MobiHostError as exc:
        raise ConfigInvalid("ontology", str(exc)) from None

    profiles = {}
    for ref, prof in _obj(doc.get("profiles", {}), "profiles").items():
        profiles[ref] = parse_profile(prof, f"profiles.{ref}")

    churn_doc = _obj(doc.get("churn", {}), "churn")
    try:
        churn = ChurnSpec(
            p_leave=float(_get(churn_doc, "p_leave", "churn", (int, float), 0.0)),
            p_join=float(_get(churn_doc, "p_join", "churn", (int, float), 0.0)),
            p_rebind=float(_get(churn_doc, "p_rebind", "churn", (int, float), 0.0)),
            roles=_str_list(churn_doc, "roles", "churn", ("edge",)),
        )
    except ValueError as exc:
        raise ConfigInvalid("churn", str(exc)) from None

    config = ScenarioConfig(topology=topology, seed=seed, ticks=ticks, params=params, groups=groups,
                            ontology=ontology, profiles=profiles, churn=churn)
    try:
        overlay = config.build_overlay()
    except MobiHostError as exc:
        raise ConfigInvalid("topology", str(exc)) from None

    def peer_ref(value: str, where: str, edge_only: bool = False) -> None:
        try:
            node = overlay.resolve(value)
        except MobiHostError:
            raise ConfigInvalid(where, f"unknown peer {value!r}") from None
        if edge_only and node.role is not Role.EDGE:
            raise ConfigInvalid(where, f"peer {value!r} is not an edge peer")

    for i, s in enumerate(_get(doc, "services", "", list, [])):
        where = f"services[{i}]"
        s = _obj(s, where)
        host = _get(s, "host", where, str)
        peer_ref(host, f"{where}.host", edge_only=True)
        try:
            wsdl = import_wsdl_record(_get(s, "wsdl", where, dict))
            wsdl.validate(ontology.concepts)
        except MobiHostError as exc:
            raise ConfigInvalid(f"{where}.wsdl", str(exc)) from None
        sgroups = _str_list(s, "groups", where)
        for j, gid in enumerate(sgroups):
            if gid not in group_ids:
                raise ConfigInvalid(f"{where}.groups[{j}]", f"unknown peer group {gid!r}")
        lifetime = _get(s, "lifetime", where, int, None)
        if lifetime is not None and lifetime <= 0:
            raise ConfigInvalid(f"{where}.lifetime", "lifetime must be positive")
        config.services.append(
            ServiceEntry(
                host=host,
                wsdl=wsdl,
                groups=sgroups,
                platforms=_str_list(s, "platforms", where, ("midp",)),
                publish_at=_tick(s, "publish_at", where, 0),
                version=_get(s, "version", where, str, "1.0"),
                lifetime=lifetime,
            )
        )

    for i, e in enumerate(_get(doc, "events", "", list, [])):
        where = f"events[{i}]"
        e = _obj(e, where)
        kind = _get(e, "event", where, str)
        if kind not in ("leave", "join", "rebind"):
            raise ConfigInvalid(f"{where}.event", f"unknown event {kind!r}")
        peer = _get(e, "peer", where, str)
        peer_ref(peer, f"{where}.peer")
        address = _get(e, "address", where, str) if kind == "rebind" else None
        config.events.append(ScriptedEvent(_tick(e, "tick", where), kind, peer, address))

    query_ids = {}
    for i, q in enumerate(_get(doc, "queries", "", list, [])):
        where = f"queries[{i}]"
        q = _obj(q, where)
        qid = _get(q, "id", where, str, f"q{i + 1}")
        if qid in query_ids:
            raise ConfigInvalid(f"{where}.id", f"duplicate query id {qid!r}")
        origin = _get(q, "origin", where, str)
        peer_ref(origin, f"{where}.origin")
        kw = _get(q, "keywords", where, (str, list))
        group = _get(q, "group", where, str, None)
        if group is not None and group not in group_ids:
            raise ConfigInvalid(f"{where}.group", f"unknown peer group {group!r}")
        try:
            query = Query(
                qid,
                kw,
                group_filter=group,
                search_wsdl=_get(q, "search_wsdl", where, bool, False),
                hop_budget=_get(q, "hop_budget", where, int, params.hop_budget),
                max_results=_get(q, "max_results", where, int, params.max_results),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigInvalid(where, str(exc)) from None
        client = ClientContext(
            parse_profile(q.get("client", {}), f"{where}.client"),
            parse_signature(q.get("requested", {}), f"{where}.requested", ontology),
        )
        tick = _tick(q, "tick", where)
        query_ids[qid] = tick
        config.queries.append(ScriptedQuery(tick, origin, query, client, _get(q, "platform", where, str, "midp")))

    for i, inv in enumerate(_get(doc, "invocations", "", list, [])):
        where = f"invocations[{i}]"
        inv = _obj(inv, where)
        qid = _get(inv, "query", where, str)
        if qid not in query_ids:
            raise ConfigInvalid(f"{where}.query", f"unknown query {qid!r}")
        tick = _tick(inv, "tick", where, query_ids[qid])
        if tick < query_ids[qid]:
            raise ConfigInvalid(f"{where}.tick", "invocation scheduled before its query")
        rank = _get(inv, "rank", where, int, 1)
        config.invocations.append(ScriptedInvoke(tick, qid, rank))
    return config


def load_scenario(source: str | Path | Mapping) -> ScenarioConfig:
    if isinstance(source, Mapping):
        return parse_scenario(source)
    try:
        text = Path(source).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid("<file>", f"cannot read {source}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise ConfigInvalid("<root>", f"not valid JSON: {exc}") from None
    return parse_scenario(doc)
