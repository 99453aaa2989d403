"""Mediation pipeline and tick-by-tick scenario driver.

Per tick, in this order: churn (from tick 1), scripted membership/rebind
events, scheduled publications, auto-republish, expiry sweeps of online
caches, scripted queries, scripted invocations.  A query runs the full
pipeline atomically at its tick:

    discover -> filter_to_ams -> build_services_graph -> rank_final

The mediation stage sits beside the querying peer's rendezvous, so
post-filtering and context matching add ``PIPELINE_OVERHEAD_TICKS`` (zero)
to the discovery round trip.
"""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .adverts import AdvKind, AdvertisementCache, dump_caches, load_caches
from .context import ClientContext, FinalEntry, MatchParams, build_services_graph, rank_final
from .discovery import MatchRecord, Query, locate_spec, run_discovery
from .errors import (
    IoFailure,
    MalformedDocument,
    MobiHostError,
    PublisherUnreachable,
    RankOutOfRange,
    SpecNotFound,
)
from .ids import PeerId
from .overlay import Event, MessageKind, Overlay
from .publishing import auto_republish, publish_service
from .ranking import AmsEntry, filter_to_ams
from .scenario import ScenarioConfig, ScriptedQuery, load_scenario

log = logging.getLogger(__name__)

PIPELINE_OVERHEAD_TICKS = 0


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class PipelineTrace:
    query_id: str
    tick: int
    origin: PeerId
    keyword_matches: list[MatchRecord]
    ams: list[AmsEntry]
    final: list[FinalEntry]
    latency_ticks: int
    graph_edges: int = 0
    platform: str = "midp"
    hop_budget: int = 7
    error: str | None = None

    @property
    def stage_counts(self) -> tuple[int, int, int]:
        return len(self.keyword_matches), len(self.ams), len(self.final)

    def spec_for(self, class_id: str):
        for rec in self.keyword_matches:
            if rec.class_id == class_id and rec.spec is not None:
                return rec.spec
        return None

    def to_record(self) -> dict:
        kw, ams, final = self.stage_counts
        return {
            "query_id": self.query_id,
            "tick": self.tick,
            "origin": self.origin.value,
            "stage_counts": {"keyword_matches": kw, "ams_size": ams, "final_size": final},
            "keyword": [r.class_id for r in self.keyword_matches],
            "ams": [[e.class_id, round(e.score, 9)] for e in self.ams],
            "final": [[e.class_id, e.degree.label, round(e.score, 9)] for e in self.final],
            "graph_edges": self.graph_edges,
            "latency_ticks": self.latency_ticks,
            "error": self.error,
        }

    def result_records(self) -> list[dict]:
        return [r.to_record(self.query_id) for r in self.keyword_matches]

    def ams_records(self) -> list[dict]:
        return [
            {"query_id": self.query_id, "rank": e.rank, "class_id": e.class_id, "score": round(e.score, 9)}
            for e in self.ams
        ]

    def final_records(self) -> list[dict]:
        return [
            {
                "query_id": self.query_id,
                "rank": i,
                "class_id": e.class_id,
                "degree": e.degree.label,
                "score": round(e.score, 9),
            }
            for i, e in enumerate(self.final, start=1)
        ]


@dataclass(frozen=True)
class InvokeAck:
    query_id: str
    class_id: str
    publisher: PeerId
    round_trip_ticks: int
    package_ref: str | None
    result: str


def select_and_invoke(
    trace: PipelineTrace, choice_rank: int, overlay: Overlay, platform: str | None = None
) -> InvokeAck:
    """Invoke the service the client picked from the final list (1-based rank)."""
    if not 1 <= choice_rank <= len(trace.final):
        raise RankOutOfRange(f"rank {choice_rank} outside 1..{len(trace.final)}")
    entry = trace.final[choice_rank - 1]
    spec = trace.spec_for(entry.class_id)
    publisher = spec.body.publisher
    origin = overlay.peers[trace.origin]
    host = overlay.peers.get(publisher)
    if not origin.online or host is None or not host.online:
        raise PublisherUnreachable(f"{entry.class_id}: publisher unreachable")
    there = overlay.route(
        overlay.new_message(MessageKind.SERVICE_INVOKE, origin.id, publisher, trace.hop_budget, spec.body.binding_path)
    )
    if not there:
        raise PublisherUnreachable(f"{entry.class_id}: no path to publisher within {trace.hop_budget} hops")
    back = overlay.route(overlay.new_message(MessageKind.SERVICE_RESULT, publisher, origin.id, trace.hop_budget))
    if not back:
        raise PublisherUnreachable(f"{entry.class_id}: no return path from publisher")

    # "download and install the client": the impl for the client's platform
    platform = platform or trace.platform
    package_ref = None
    tree = overlay.reachable(origin.id, trace.hop_budget)
    for pid, _ in sorted(tree.items(), key=lambda kv: (kv[1][0], kv[0])):
        for adv in overlay.peers[pid].cache.visible(overlay.tick, AdvKind.MODULE_IMPL):
            if adv.body.spec_id == spec.body.spec_id and adv.body.platform == platform:
                package_ref = adv.body.package_ref
                break
        if package_ref:
            break
    return InvokeAck(
        trace.query_id,
        entry.class_id,
        publisher,
        there[0].hops + back[0].hops,
        package_ref,
        f"ack:{spec.body.wsdl.service_name}",
    )


@dataclass
class RunResult:
    events: list[Event]
    traces: list[PipelineTrace]
    metrics: dict
    overlay: Overlay
    invocations: list[dict] = field(default_factory=list)

    def event_lines(self) -> str:
        return "".join(ev.to_json() + "\n" for ev in self.events)

    def trace_lines(self) -> str:
        return "".join(_dumps(t.to_record()) + "\n" for t in self.traces)

    def metrics_json(self) -> str:
        return json.dumps(self.metrics, sort_keys=True, indent=2) + "\n"

    def snapshot(self) -> bytes:
        return dump_caches(self.overlay.caches)

    def write(self, out_dir: str | Path) -> Path:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "events.jsonl").write_text(self.event_lines())
            (out / "traces.jsonl").write_text(self.trace_lines())
            (out / "results.jsonl").write_text(
                "".join(_dumps(r) + "\n" for t in self.traces for r in t.result_records())
            )
            (out / "ams.jsonl").write_text("".join(_dumps(r) + "\n" for t in self.traces for r in t.ams_records()))
            (out / "final.jsonl").write_text(
                "".join(_dumps(r) + "\n" for t in self.traces for r in t.final_records())
            )
            (out / "invocations.jsonl").write_text("".join(_dumps(r) + "\n" for r in self.invocations))
            (out / "metrics.json").write_text(self.metrics_json())
            (out / "snapshot.jsonl").write_bytes(self.snapshot())
        except OSError as exc:
            raise IoFailure(f"cannot write outputs to {out}: {exc.strerror}") from None
        return out


class Simulation:
    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.overlay = config.build_overlay()
        self.traces: list[PipelineTrace] = []
        self.invocations: list[dict] = []
        self.counts: Counter[str] = Counter()
        self._by_query: dict[str, PipelineTrace] = {}
        self._services = defaultdict(list)
        for s in config.services:
            self._services[s.publish_at].append(s)
        self._events = defaultdict(list)
        for e in config.events:
            self._events[e.tick].append(e)
        self._queries = defaultdict(list)
        for q in config.queries:
            self._queries[q.tick].append(q)
        self._invokes = defaultdict(list)
        for inv in config.invocations:
            self._invokes[inv.tick].append(inv)
        self._hosts: set[PeerId] = set()

    @property
    def tick(self) -> int:
        return self.overlay.tick

    def _log(self, event: str, peer: str, **detail: Any) -> None:
        self.overlay.events.append(Event(self.tick, event, peer, detail))

    def housekeeping(self) -> None:
        """Everything that happens at the current tick before scripted queries."""
        ov, cfg, t = self.overlay, self.config, self.tick
        if t > 0:
            for ev in ov.apply_churn(cfg.churn):
                self.counts[ev.event] += 1
        for e in self._events.get(t, ()):
            if e.event == "rebind":
                ov.rebind_endpoint(e.peer, e.address)
                self.counts["rebind"] += 1
            elif ov.set_online(e.peer, e.event == "join") is not None:
                self.counts[e.event] += 1

        for s in self._services.get(t, ()):
            lifetime = s.lifetime or cfg.params.lifetime
            try:
                ads = publish_service(ov, s.host, s.wsdl, s.groups, s.platforms, t, lifetime, version=s.version)
            except MobiHostError as exc:
                self._log("publish_failed", s.host, service=s.wsdl.service_name, reason=type(exc).__name__)
                continue
            self._hosts.add(ov.resolve(s.host).id)
            self.counts["publishes"] += len(ads)
            self._log("publish", s.host, service=s.wsdl.service_name, adv_ids=[a.adv_id for a in ads],
                      expiry=ads[0].expiry)

        if cfg.params.republish_period is not None:
            for pid in sorted(self._hosts):
                actions = auto_republish(ov, pid, cfg.params.republish_period, t)
                if actions:
                    self.counts["republishes"] += len(actions)
                    self._log("republish", ov.name_of(pid), adv_ids=[a.adv_id for a in actions],
                              expiry=actions[0].expiry, forwarded=actions[0].forwarded)

        for pid in sorted(ov.peers):
            node = ov.peers[pid]
            if not node.online:
                continue  # frozen until it rejoins
            expired = node.cache.expire_sweep(t)
            if expired:
                self.counts["expiries"] += len(expired)
                self._log("expire", node.name, adv_ids=expired)

    def execute_query(
        self, origin: str | PeerId, query: Query, client: ClientContext, platform: str = "midp"
    ) -> PipelineTrace:
        ov, params, t = self.overlay, self.config.params, self.tick
        node = ov.resolve(origin)
        if not node.online:
            trace = PipelineTrace(query.query_id, t, node.id, [], [], [], 0, platform=platform,
                                  hop_budget=query.hop_budget, error="OriginOffline")
            self._log("query", node.name, query_id=query.query_id, error="OriginOffline")
            return trace

        run = run_discovery(ov, node.id, query, t)
        keyword = []
        for rec in run.records:
            if rec.spec is None:
                try:
                    spec, _, _ = locate_spec(ov, node.id, rec.class_id, t, query.hop_budget)
                except SpecNotFound:
                    pass  # the class alone cannot be post-filtered
                else:
                    rec = replace(rec, spec=spec)
            keyword.append(rec)
        with_specs = [r for r in keyword if r.spec is not None]

        ams: list[AmsEntry] = []
        final: list[FinalEntry] = []
        edges = 0
        if with_specs:
            ams, retained = filter_to_ams(with_specs, query, params.ams_threshold)
            if ams:
                specs = {r.class_id: r.spec.body for r in retained}
                graph = build_services_graph(
                    ams, specs, self.config.profiles, self.config.ontology,
                    default_location=client.profile.location, run_window=(0, self.config.ticks),
                )
                edges = len(graph.edges)
                mp = MatchParams(params.max_distance, params.max_load, t)
                final = rank_final(ams, graph, client, mp)
        trace = PipelineTrace(
            query.query_id, t, node.id, keyword, ams, final,
            run.latency_ticks + PIPELINE_OVERHEAD_TICKS, edges, platform, query.hop_budget,
        )
        kw, a, f = trace.stage_counts
        self._log("query", node.name, query_id=query.query_id, keyword_matches=kw, ams_size=a, final_size=f,
                  latency_ticks=trace.latency_ticks)
        return trace

    def _run_scripted(self) -> None:
        for sq in self._queries.get(self.tick, ()):
            trace = self.execute_query(sq.origin, sq.query, sq.client, sq.platform)
            self.traces.append(trace)
            self._by_query[trace.query_id] = trace
        for inv in self._invokes.get(self.tick, ()):
            trace = self._by_query[inv.query_id]
            peer = self.overlay.name_of(trace.origin)
            record = {"tick": self.tick, "query_id": inv.query_id, "rank": inv.rank}
            try:
                ack = select_and_invoke(trace, inv.rank, self.overlay)
            except (RankOutOfRange, PublisherUnreachable) as exc:
                record.update(status=type(exc).__name__)
            else:
                record.update(status="ok", class_id=ack.class_id, round_trip_ticks=ack.round_trip_ticks,
                              package_ref=ack.package_ref, result=ack.result)
            self.invocations.append(record)
            self._log("invoke", peer, **{k: v for k, v in record.items() if k != "tick"})

    def step(self) -> None:
        self.housekeeping()
        self._run_scripted()
        self.overlay.advance()

    def run_until(self, tick: int) -> None:
        """Fully process every tick strictly before ``tick``."""
        while self.tick < tick:
            self.step()

    def metrics(self) -> dict:
        stats = self.overlay.stats
        return {
            "ticks": self.config.ticks,
            "seed": self.config.seed,
            "publishes": self.counts["publishes"],
            "republishes": self.counts["republishes"],
            "expiries": self.counts["expiries"],
            "churn": {k: self.counts[k] for k in ("join", "leave", "rebind")},
            "messages": {k.value: stats[k.value] for k in MessageKind},
            "duplicates_suppressed": stats["duplicates_suppressed"],
            "queries": {
                t.query_id: dict(zip(("keyword_matches", "ams_size", "final_size"), t.stage_counts))
                for t in self.traces
            },
            "invocations": dict(Counter(r["status"] for r in self.invocations)),
        }

    def run(self) -> RunResult:
        self.run_until(self.config.ticks)
        return RunResult(list(self.overlay.events), list(self.traces), self.metrics(), self.overlay,
                         list(self.invocations))


def run_scenario(config: ScenarioConfig | str | Path | dict) -> RunResult:
    if not isinstance(config, ScenarioConfig):
        config = load_scenario(config)
    return Simulation(config).run()


def snapshot_caches(overlay: Overlay, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_bytes(dump_caches(overlay.caches))
    except OSError as exc:
        raise IoFailure(f"cannot write snapshot {path}: {exc.strerror}") from None
    return path


def restore_caches(path: str | Path, overlay: Overlay | None = None) -> dict[PeerId, AdvertisementCache]:
    """Load a snapshot; with ``overlay`` given, replace its peers' caches too."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read snapshot {path}: {exc.strerror}") from None
    caches = load_caches(data)
    if overlay is not None:
        for pid in caches:
            if pid not in overlay.peers:
                raise MalformedDocument(f"snapshot names peer {pid} absent from the overlay")
        for pid, node in overlay.peers.items():
            node.cache = caches.get(pid, AdvertisementCache(pid, node.cache.capacity))
    return caches
