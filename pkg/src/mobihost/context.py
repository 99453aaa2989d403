"""Context-aware matching of post-filtered services.

A service passes the context predicate when it is close enough to the client,
available at the current tick, capable enough for the client's device class
and not overloaded.  Its capability signature (inputs/outputs over a concept
ontology) is then graded against the client's request:

    Exact           requested outputs all offered verbatim, service inputs all supplied verbatim
    Subsume         same, but offered outputs may specialize requested ones and
                    supplied inputs may specialize the service's inputs
    PartialContext  context predicate holds, capability does not
    Fail            context predicate does not hold
"""

from __future__ import annotations

import enum
import graphlib
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .adverts import ModuleSpecBody
from .errors import OntologyCycle, UnknownConcept
from .ranking import AmsEntry
from .wsdl import WsdlDescriptor

DEFAULT_MAX_DISTANCE = 100.0
DEFAULT_MAX_LOAD = 0.8
FOREVER = 2**63 - 1


class MatchDegree(enum.IntEnum):
    FAIL = 0
    PARTIAL_CONTEXT = 1
    SUBSUME = 2
    EXACT = 3

    @property
    def label(self) -> str:
        return {0: "Fail", 1: "PartialContext", 2: "Subsume", 3: "Exact"}[self.value]


@dataclass(frozen=True)
class ContextProfile:
    location: tuple[float, float] = (0.0, 0.0)
    available_window: tuple[int, int] = (0, FOREVER)
    device_class: int = 1
    load: float = 0.0

    def __post_init__(self) -> None:
        x, y = self.location
        object.__setattr__(self, "location", (float(x), float(y)))
        start, end = self.available_window
        object.__setattr__(self, "available_window", (int(start), int(end)))
        if start > end:
            raise ValueError(f"available_window start {start} after end {end}")
        if self.device_class not in (1, 2, 3):
            raise ValueError(f"device_class must be 1, 2 or 3, got {self.device_class}")
        if not 0.0 <= self.load <= 1.0:
            raise ValueError(f"load must lie in [0, 1], got {self.load}")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ContextProfile":
        return cls(
            location=tuple(doc.get("location", (0.0, 0.0))),
            available_window=tuple(doc.get("window", (0, FOREVER))),
            device_class=doc.get("device_class", 1),
            load=doc.get("load", 0.0),
        )


class ConceptOntology:
    """Concept DAG; ``subsumes(a, b)`` holds when ``b`` is ``a`` or a descendant of ``a``."""

    def __init__(self, concepts: Iterable[str], parents: Mapping[str, Iterable[str]] | None = None):
        self.concepts = frozenset(concepts)
        self.parents: dict[str, tuple[str, ...]] = {}
        for child, ps in (parents or {}).items():
            ps = tuple(ps)
            for c in (child, *ps):
                if c not in self.concepts:
                    raise UnknownConcept(f"ontology edge references unknown concept {c!r}")
            self.parents[child] = ps
        sorter = graphlib.TopologicalSorter({c: self.parents.get(c, ()) for c in self.concepts})
        try:
            order = list(sorter.static_order())
        except graphlib.CycleError as exc:
            raise OntologyCycle(f"ontology has a cycle: {exc.args[1]}") from None
        self._ancestors: dict[str, frozenset[str]] = {}
        for c in order:  # parents come first
            acc = {c}
            for p in self.parents.get(c, ()):
                acc |= self._ancestors[p]
            self._ancestors[c] = frozenset(acc)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "ConceptOntology":
        return cls(doc.get("concepts", []), doc.get("parents", {}))

    def check(self, concepts: Iterable[str]) -> None:
        for c in concepts:
            if c not in self.concepts:
                raise UnknownConcept(f"concept {c!r} not in ontology")

    def ancestors(self, concept: str) -> frozenset[str]:
        self.check((concept,))
        return self._ancestors[concept]

    def subsumes(self, general: str, specific: str) -> bool:
        return general in self.ancestors(specific)


@dataclass(frozen=True)
class CapabilitySignature:
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))

    @classmethod
    def from_wsdl(cls, wsdl: WsdlDescriptor) -> "CapabilitySignature":
        return cls(wsdl.input_concepts(), wsdl.output_concepts())

    def concepts(self) -> tuple[str, ...]:
        return self.inputs + self.outputs


@dataclass(frozen=True)
class ClientContext:
    profile: ContextProfile
    requested: CapabilitySignature = CapabilitySignature()


@dataclass(frozen=True)
class MatchParams:
    max_distance: float = DEFAULT_MAX_DISTANCE
    max_load: float = DEFAULT_MAX_LOAD
    now: int = 0


@dataclass(frozen=True)
class ServiceNode:
    class_id: str
    score: float
    profile: ContextProfile
    signature: CapabilitySignature
    has_context: bool = True


@dataclass(frozen=True)
class ServicesGraph:
    nodes: Mapping[str, ServiceNode]
    edges: tuple[tuple[str, str, str], ...]
    ontology: ConceptOntology = field(compare=False)

    def neighbours(self, class_id: str) -> list[tuple[str, str]]:
        out = []
        for a, b, label in self.edges:
            if a == class_id:
                out.append((b, label))
            elif b == class_id:
                out.append((a, label))
        return out


def context_predicate(client: ContextProfile, svc: ContextProfile, params: MatchParams) -> bool:
    dist = math.hypot(svc.location[0] - client.location[0], svc.location[1] - client.location[1])
    start, end = svc.available_window
    return (
        dist <= params.max_distance
        and start <= params.now <= end
        and svc.device_class >= client.device_class
        and svc.load <= params.max_load
    )


def capability_match(
    requested: CapabilitySignature, offered: CapabilitySignature, ontology: ConceptOntology
) -> MatchDegree:
    """EXACT, SUBSUME or FAIL for the capability relation alone."""
    ontology.check(requested.concepts())
    ontology.check(offered.concepts())
    if set(requested.outputs) <= set(offered.outputs) and set(offered.inputs) <= set(requested.inputs):
        return MatchDegree.EXACT
    outputs_ok = all(any(ontology.subsumes(r, o) for o in offered.outputs) for r in requested.outputs)
    inputs_ok = all(any(ontology.subsumes(i, c) for c in requested.inputs) for i in offered.inputs)
    return MatchDegree.SUBSUME if outputs_ok and inputs_ok else MatchDegree.FAIL


def context_match(
    client: ClientContext, svc: ServiceNode, params: MatchParams, ontology: ConceptOntology
) -> MatchDegree:
    capability = capability_match(client.requested, svc.signature, ontology)
    if not context_predicate(client.profile, svc.profile, params):
        return MatchDegree.FAIL
    if capability is MatchDegree.FAIL:
        return MatchDegree.PARTIAL_CONTEXT
    if not svc.has_context:
        return min(capability, MatchDegree.SUBSUME)
    return capability


def build_services_graph(
    ams: Sequence[AmsEntry],
    specs: Mapping[str, ModuleSpecBody],
    profiles: Mapping[str, ContextProfile],
    ontology: ConceptOntology,
    *,
    default_location: tuple[float, float] = (0.0, 0.0),
    run_window: tuple[int, int] = (0, FOREVER),
) -> ServicesGraph:
    """Nodes for every AMS entry; an edge per pair of services sharing an output concept.

    A service whose WSDL names no resolvable context source gets a permissive
    default profile placed at ``default_location`` and is flagged so it can
    never grade better than Subsume.
    """
    nodes: dict[str, ServiceNode] = {}
    for entry in ams:
        spec = specs[entry.class_id]
        sig = CapabilitySignature.from_wsdl(spec.wsdl)
        ontology.check(sig.concepts())
        ref = spec.wsdl.context_source_ref
        if ref is not None and ref in profiles:
            node = ServiceNode(entry.class_id, entry.score, profiles[ref], sig, True)
        else:
            default = ContextProfile(default_location, run_window, 3, 0.0)
            node = ServiceNode(entry.class_id, entry.score, default, sig, False)
        nodes[entry.class_id] = node

    ids = sorted(nodes)
    edges = []
    for i, a in enumerate(ids):
        outs_a = set(nodes[a].signature.outputs)
        for b in ids[i + 1 :]:
            for label in sorted(outs_a & set(nodes[b].signature.outputs)):
                edges.append((a, b, label))
    return ServicesGraph(nodes, tuple(edges), ontology)


@dataclass(frozen=True)
class FinalEntry:
    class_id: str
    degree: MatchDegree
    score: float


def rank_final(
    ams: Sequence[AmsEntry], graph: ServicesGraph, client: ClientContext, params: MatchParams
) -> list[FinalEntry]:
    out = []
    seen = set()
    for entry in ams:
        if entry.class_id in seen:
            continue
        seen.add(entry.class_id)
        degree = context_match(client, graph.nodes[entry.class_id], params, graph.ontology)
        if degree is not MatchDegree.FAIL:
            out.append(FinalEntry(entry.class_id, degree, entry.score))
    out.sort(key=lambda e: (-e.degree, -e.score, e.class_id))
    return out
