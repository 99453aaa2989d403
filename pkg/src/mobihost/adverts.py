"""Lifetime-bounded advertisements, per-peer caches and canonical serialization.

Canonical document layout (UTF-8 JSON, keys sorted, no whitespace)::

    {"adv_id": str, "body": {...}, "groups": [str, ...], "kind": str,
     "lifetime": int, "published_at": int, "publisher": "<32 hex>"}

Body keys per kind:

    Peer         name, phone_number, role
    PeerGroup    category_path, group_id, name
    ModuleClass  class_id, description, name, wsdl_extras ([[key, value], ...])
    ModuleSpec   access {binding_path, publisher}, class_id, spec_id, version, wsdl
    ModuleImpl   package_ref, platform, spec_id
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Iterator, Mapping, Union

from .errors import (
    InvalidPeerGroup,
    InvalidWsdl,
    MalformedDocument,
    NonPositiveLifetime,
    UnknownAdvertisement,
)
from .ids import PeerId, stable_hash
from .wsdl import WsdlDescriptor, import_wsdl_record

DEFAULT_LIFETIME = 500


class AdvKind(str, enum.Enum):
    PEER = "Peer"
    PEER_GROUP = "PeerGroup"
    MODULE_CLASS = "ModuleClass"
    MODULE_SPEC = "ModuleSpec"
    MODULE_IMPL = "ModuleImpl"


_LABEL = re.compile(r"^[a-z0-9][a-z0-9_-]*$")


@dataclass(frozen=True)
class PeerGroup:
    id: str
    name: str
    category_path: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.id:
            raise InvalidPeerGroup("peer group id must be non-empty")
        if not self.category_path:
            raise InvalidPeerGroup(f"group {self.id}: category_path must be non-empty")
        for label in self.category_path:
            if not isinstance(label, str) or not _LABEL.match(label):
                raise InvalidPeerGroup(f"group {self.id}: bad category label {label!r}")

    @classmethod
    def from_path(cls, name: str, category_path: Iterable[str]) -> "PeerGroup":
        path = tuple(category_path)
        return cls(id="grp-" + stable_hash("group", *path)[:16], name=name, category_path=path)

    def to_dict(self) -> dict:
        return {"group_id": self.id, "name": self.name, "category_path": list(self.category_path)}


@dataclass(frozen=True)
class PeerBody:
    name: str
    role: str
    phone_number: str | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "role": self.role, "phone_number": self.phone_number}


@dataclass(frozen=True)
class ModuleClassBody:
    class_id: str
    name: str
    description: str
    wsdl_extras: tuple[tuple[str, str], ...] = ()

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "name": self.name,
            "description": self.description,
            "wsdl_extras": [list(kv) for kv in self.wsdl_extras],
        }


@dataclass(frozen=True)
class ModuleSpecBody:
    spec_id: str
    class_id: str
    version: str
    publisher: PeerId
    binding_path: str
    wsdl: WsdlDescriptor

    def to_dict(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "class_id": self.class_id,
            "version": self.version,
            "access": {"publisher": self.publisher.value, "binding_path": self.binding_path},
            "wsdl": self.wsdl.to_dict(),
        }


@dataclass(frozen=True)
class ModuleImplBody:
    spec_id: str
    platform: str
    package_ref: str

    def to_dict(self) -> dict:
        return {"spec_id": self.spec_id, "platform": self.platform, "package_ref": self.package_ref}


Body = Union[PeerBody, PeerGroup, ModuleClassBody, ModuleSpecBody, ModuleImplBody]

_BODY_TYPES = {
    AdvKind.PEER: PeerBody,
    AdvKind.PEER_GROUP: PeerGroup,
    AdvKind.MODULE_CLASS: ModuleClassBody,
    AdvKind.MODULE_SPEC: ModuleSpecBody,
    AdvKind.MODULE_IMPL: ModuleImplBody,
}


@dataclass(frozen=True)
class Advertisement:
    adv_id: str
    kind: AdvKind
    publisher: PeerId
    body: Body
    published_at: int = 0
    lifetime: int = DEFAULT_LIFETIME
    groups: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        # group tags are a set; keep them sorted so equal ads compare equal
        object.__setattr__(self, "groups", tuple(sorted(set(self.groups))))
        if not isinstance(self.body, _BODY_TYPES[self.kind]):
            raise TypeError(f"{self.kind.value} advertisement needs a {_BODY_TYPES[self.kind].__name__} body")

    @property
    def expiry(self) -> int:
        return self.published_at + self.lifetime

    def visible_at(self, tick: int) -> bool:
        return self.published_at <= tick < self.expiry

    def with_groups(self, *group_ids: str) -> "Advertisement":
        return replace(self, groups=self.groups + tuple(group_ids))

    def to_dict(self) -> dict:
        return {
            "adv_id": self.adv_id,
            "kind": self.kind.value,
            "publisher": self.publisher.value,
            "groups": list(self.groups),
            "body": self.body.to_dict(),
            "published_at": self.published_at,
            "lifetime": self.lifetime,
        }


def serialize_adv(adv: Advertisement) -> bytes:
    return json.dumps(adv.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _need(doc: Mapping, key: str, typ: type | tuple, where: str) -> Any:
    if key not in doc:
        raise MalformedDocument(f"{where}: missing field {key!r}")
    value = doc[key]
    # bool is an int subclass; never accept it for numeric fields
    if not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
        raise MalformedDocument(f"{where}: field {key!r} has wrong type")
    return value


def _peer_id(value: Any, where: str) -> PeerId:
    try:
        return PeerId(value)
    except ValueError:
        raise MalformedDocument(f"{where}: bad peer id {value!r}") from None


def _body_from_dict(kind: AdvKind, doc: Any) -> Body:
    if not isinstance(doc, dict):
        raise MalformedDocument("body must be an object")
    w = f"body({kind.value})"
    if kind is AdvKind.PEER:
        phone = doc.get("phone_number")
        if phone is not None and not isinstance(phone, str):
            raise MalformedDocument(f"{w}: phone_number must be string or null")
        return PeerBody(_need(doc, "name", str, w), _need(doc, "role", str, w), phone)
    if kind is AdvKind.PEER_GROUP:
        path = _need(doc, "category_path", list, w)
        try:
            return PeerGroup(_need(doc, "group_id", str, w), _need(doc, "name", str, w), tuple(path))
        except InvalidPeerGroup as exc:
            raise MalformedDocument(f"{w}: {exc}") from None
    if kind is AdvKind.MODULE_CLASS:
        extras = _need(doc, "wsdl_extras", list, w)
        if not all(isinstance(kv, list) and len(kv) == 2 and all(isinstance(x, str) for x in kv) for kv in extras):
            raise MalformedDocument(f"{w}: wsdl_extras must be [key, value] string pairs")
        return ModuleClassBody(
            _need(doc, "class_id", str, w),
            _need(doc, "name", str, w),
            _need(doc, "description", str, w),
            tuple((k, v) for k, v in extras),
        )
    if kind is AdvKind.MODULE_SPEC:
        access = _need(doc, "access", dict, w)
        try:
            wsdl = import_wsdl_record(_need(doc, "wsdl", dict, w))
        except InvalidWsdl as exc:
            raise MalformedDocument(f"{w}: {exc}") from None
        return ModuleSpecBody(
            spec_id=_need(doc, "spec_id", str, w),
            class_id=_need(doc, "class_id", str, w),
            version=_need(doc, "version", str, w),
            publisher=_peer_id(_need(access, "publisher", str, w + ".access"), w),
            binding_path=_need(access, "binding_path", str, w + ".access"),
            wsdl=wsdl,
        )
    return ModuleImplBody(
        _need(doc, "spec_id", str, w), _need(doc, "platform", str, w), _need(doc, "package_ref", str, w)
    )


def adv_from_dict(doc: Any) -> Advertisement:
    if not isinstance(doc, dict):
        raise MalformedDocument("advertisement must be a JSON object")
    w = "advertisement"
    try:
        kind = AdvKind(_need(doc, "kind", str, w))
    except ValueError:
        raise MalformedDocument(f"unknown advertisement kind {doc.get('kind')!r}") from None
    groups = _need(doc, "groups", list, w)
    if not all(isinstance(g, str) for g in groups):
        raise MalformedDocument("groups must be strings")
    lifetime = _need(doc, "lifetime", int, w)
    if lifetime <= 0:
        raise MalformedDocument("lifetime must be positive")
    return Advertisement(
        adv_id=_need(doc, "adv_id", str, w),
        kind=kind,
        publisher=_peer_id(_need(doc, "publisher", str, w), w),
        body=_body_from_dict(kind, _need(doc, "body", dict, w)),
        published_at=_need(doc, "published_at", int, w),
        lifetime=lifetime,
        groups=tuple(groups),
    )


def deserialize_adv(data: bytes | str) -> Advertisement:
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from None
    return adv_from_dict(doc)


@dataclass
class AdvertisementCache:
    """Advertisements cached by one peer, keyed by ``adv_id``."""

    owner: PeerId
    capacity: int | None = None
    entries: dict[str, Advertisement] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, adv_id: object) -> bool:
        return adv_id in self.entries

    def get(self, adv_id: str) -> Advertisement | None:
        return self.entries.get(adv_id)

    def publish(self, adv: Advertisement, now: int) -> list[str]:
        """Insert ``adv`` stamped with ``published_at=now``; return ids evicted for capacity.

        An existing entry with the same ``adv_id`` is replaced.  When the cache
        overflows, the earliest-expiring entry goes first (ties: smaller id),
        which may be the entry just inserted.
        """
        if adv.lifetime <= 0:
            raise NonPositiveLifetime(f"{adv.adv_id}: lifetime must be > 0, got {adv.lifetime}")
        self.entries[adv.adv_id] = replace(adv, published_at=now)
        evicted = []
        if self.capacity is not None:
            while len(self.entries) > self.capacity:
                victim = min(self.entries.values(), key=lambda a: (a.expiry, a.adv_id))
                del self.entries[victim.adv_id]
                evicted.append(victim.adv_id)
        return evicted

    def republish(self, adv_id: str, now: int, new_lifetime: int | None = None) -> Advertisement:
        try:
            current = self.entries[adv_id]
        except KeyError:
            raise UnknownAdvertisement(f"{adv_id} not cached at {self.owner.short()}") from None
        lifetime = current.lifetime if new_lifetime is None else new_lifetime
        if lifetime <= 0:
            raise NonPositiveLifetime(f"{adv_id}: lifetime must be > 0, got {lifetime}")
        updated = replace(current, published_at=now, lifetime=lifetime)
        self.entries[adv_id] = updated
        return updated

    def expire_sweep(self, now: int) -> list[str]:
        expired = sorted(k for k, a in self.entries.items() if a.expiry <= now)
        for k in expired:
            del self.entries[k]
        return expired

    def lookup(self, adv_id: str, now: int) -> Advertisement | None:
        adv = self.entries.get(adv_id)
        if adv is None or not adv.visible_at(now):
            return None
        return adv

    def visible(self, now: int, kind: AdvKind | None = None) -> Iterator[Advertisement]:
        for adv_id in sorted(self.entries):
            adv = self.entries[adv_id]
            if adv.visible_at(now) and (kind is None or adv.kind is kind):
                yield adv

    def snapshot_lines(self) -> list[bytes]:
        return [serialize_adv(self.entries[k]) for k in sorted(self.entries)]


def dump_caches(caches: Mapping[PeerId, AdvertisementCache]) -> bytes:
    """Line-delimited snapshot: a ``{"peer": ...}`` header per cache, then its advertisements."""
    out = []
    for pid in sorted(caches):
        cache = caches[pid]
        header = {"peer": pid.value}
        if cache.capacity is not None:
            header["capacity"] = cache.capacity
        out.append(json.dumps(header, sort_keys=True, separators=(",", ":")).encode())
        out.extend(cache.snapshot_lines())
    return b"".join(line + b"\n" for line in out)


def load_caches(data: bytes) -> dict[PeerId, AdvertisementCache]:
    caches: dict[PeerId, AdvertisementCache] = {}
    current: AdvertisementCache | None = None
    for lineno, raw in enumerate(data.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            doc = json.loads(raw)
        except (ValueError, UnicodeDecodeError) as exc:
            raise MalformedDocument(f"not valid JSON: {exc}", line=lineno) from None
        if isinstance(doc, dict) and "peer" in doc and "adv_id" not in doc:
            try:
                pid = PeerId(doc["peer"])
            except (ValueError, TypeError):
                raise MalformedDocument(f"bad peer id {doc['peer']!r}", line=lineno) from None
            capacity = doc.get("capacity")
            if capacity is not None and (not isinstance(capacity, int) or capacity < 1):
                raise MalformedDocument("capacity must be a positive integer", line=lineno)
            if pid in caches:
                raise MalformedDocument(f"peer {pid} listed twice", line=lineno)
            current = caches[pid] = AdvertisementCache(pid, capacity)
            continue
        if current is None:
            raise MalformedDocument("advertisement before any peer header", line=lineno)
        try:
            adv = adv_from_dict(doc)
        except MalformedDocument as exc:
            raise MalformedDocument(str(exc), line=lineno) from None
        current.entries[adv.adv_id] = adv
    return caches
