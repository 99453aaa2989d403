"""Keyword discovery over cached module advertisements.

Matching is case-insensitive whole-token equality on the module class name
and description (plus the linked WSDL text when ``search_wsdl`` is set), with
OR semantics across keywords.  Queries flood through the super-peer graph
within a hop budget; every reached peer answers from its own cache and the
answers travel back along the reverse path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .adverts import Advertisement, AdvertisementCache, AdvKind, ModuleSpecBody
from .errors import EmptyQuery, OriginOffline, SpecNotFound
from .ids import PeerId
from .overlay import DEFAULT_HOP_BUDGET, MessageKind, Overlay
from .text import normalize_terms, tokenize

DEFAULT_MAX_RESULTS = 64


@dataclass(frozen=True)
class Query:
    query_id: str
    keywords: tuple[str, ...]
    group_filter: str | None = None
    search_wsdl: bool = False
    hop_budget: int = DEFAULT_HOP_BUDGET
    max_results: int = DEFAULT_MAX_RESULTS

    def __post_init__(self) -> None:
        terms = tuple(normalize_terms(self.keywords))
        if not terms:
            raise EmptyQuery(f"query {self.query_id}: no keywords left after normalization")
        object.__setattr__(self, "keywords", terms)
        if self.hop_budget < 1:
            raise ValueError("hop_budget must be positive")
        if self.max_results < 1:
            raise ValueError("max_results must be positive")


@dataclass(frozen=True)
class MatchRecord:
    adv: Advertisement
    spec: Advertisement | None
    found_at: PeerId
    hops: int
    matched_terms: tuple[str, ...]

    @property
    def class_id(self) -> str:
        return self.adv.body.class_id

    def to_record(self, query_id: str) -> dict:
        return {
            "query_id": query_id,
            "class_id": self.class_id,
            "hops": self.hops,
            "matched_terms": list(self.matched_terms),
        }


def linked_spec(cache: AdvertisementCache, class_id: str, now: int) -> Advertisement | None:
    for adv in cache.visible(now, AdvKind.MODULE_SPEC):
        if adv.body.class_id == class_id:
            return adv
    return None


def match_local(
    cache: AdvertisementCache,
    q: Query,
    now: int,
    *,
    hops: int = 0,
) -> list[MatchRecord]:
    wanted = set(q.keywords)
    out = []
    for adv in cache.visible(now, AdvKind.MODULE_CLASS):
        if q.group_filter is not None and q.group_filter not in adv.groups:
            continue
        tokens = set(tokenize(f"{adv.body.name} {adv.body.description}"))
        spec = linked_spec(cache, adv.body.class_id, now)
        if q.search_wsdl and spec is not None:
            tokens.update(tokenize(spec.body.wsdl.search_text()))
        hit = wanted & tokens
        if hit:
            matched = tuple(t for t in q.keywords if t in hit)
            out.append(MatchRecord(adv, spec, cache.owner, hops, matched))
    return out


@dataclass(frozen=True)
class DiscoveryRun:
    records: list[MatchRecord]
    latency_ticks: int
    peers_reached: int
    responses: int


def run_discovery(overlay: Overlay, origin: PeerId | str, q: Query, now: int | None = None) -> DiscoveryRun:
    node = overlay.resolve(origin)
    if not node.online:
        raise OriginOffline(f"{node.name} is offline")
    now = overlay.tick if now is None else now
    deliveries = overlay.route(overlay.new_message(MessageKind.QUERY_REQUEST, node.id, None, q.hop_budget, q.query_id))

    candidates = match_local(node.cache, q, now)
    latency = 0
    responses = 0
    for d in deliveries:
        found = match_local(overlay.peers[d.peer].cache, q, now, hops=d.hops)
        if found:
            # one response per answering peer, back along the reverse path
            responses += 1
            overlay.stats[MessageKind.QUERY_RESPONSE.value] += d.hops
            latency = max(latency, 2 * d.hops)
            candidates.extend(found)

    best: dict[str, MatchRecord] = {}
    for rec in candidates:
        cur = best.get(rec.class_id)
        if cur is None or (rec.hops, rec.found_at) < (cur.hops, cur.found_at):
            best[rec.class_id] = rec
    ordered = sorted(best.values(), key=lambda r: (r.hops, r.adv.adv_id))
    return DiscoveryRun(ordered[: q.max_results], latency, len(deliveries), responses)


def discover(overlay: Overlay, origin: PeerId | str, q: Query, now: int | None = None) -> list[MatchRecord]:
    return run_discovery(overlay, origin, q, now).records


def locate_spec(
    overlay: Overlay,
    origin: PeerId | str,
    class_id: str,
    now: int | None = None,
    budget: int = DEFAULT_HOP_BUDGET,
) -> tuple[Advertisement, PeerId, int]:
    """Nearest unexpired spec advertisement for ``class_id``: ``(adv, holder, hops)``."""
    now = overlay.tick if now is None else now
    tree = overlay.reachable(origin, budget)
    for pid, (dist, _) in sorted(tree.items(), key=lambda kv: (kv[1][0], kv[0])):
        spec = linked_spec(overlay.peers[pid].cache, class_id, now)
        if spec is not None:
            return spec, pid, dist
    raise SpecNotFound(f"no unexpired spec for {class_id} within {budget} hops")


def fetch_spec(
    overlay: Overlay,
    origin: PeerId | str,
    class_id: str,
    now: int | None = None,
    budget: int = DEFAULT_HOP_BUDGET,
) -> ModuleSpecBody:
    return locate_spec(overlay, origin, class_id, now, budget)[0].body


def class_ids(records: Iterable[MatchRecord]) -> set[str]:
    return {r.class_id for r in records}
