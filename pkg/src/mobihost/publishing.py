"""Publishing WSDL-described services as module class / spec / impl advertisements."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .adverts import (
    DEFAULT_LIFETIME,
    Advertisement,
    AdvKind,
    ModuleClassBody,
    ModuleImplBody,
    ModuleSpecBody,
    PeerGroup,
)
from .errors import HostOffline, InconsistentBatch, TopologyError, UnknownPeerGroup
from .ids import PeerId, stable_hash
from .overlay import MessageKind, Overlay, PeerNode, Role
from .wsdl import WsdlDescriptor

DEFAULT_REPUBLISH_PERIOD = DEFAULT_LIFETIME // 2


def service_ids(publisher: PeerId, service_name: str, version: str) -> tuple[str, str]:
    """Stable ``(class_id, spec_id)`` so republishes keep the same advertisement ids."""
    digest = stable_hash("service", publisher.value, service_name, version)
    return "mcls-" + digest[:24], "mspec-" + digest[:24]


def impl_id(spec_id: str, platform: str) -> str:
    return "mimpl-" + stable_hash("impl", spec_id, platform)[:24]


def build_advertisements(
    publisher: PeerId,
    wsdl: WsdlDescriptor,
    platforms: Sequence[str] = (),
    *,
    groups: Iterable[str] = (),
    now: int = 0,
    lifetime: int = DEFAULT_LIFETIME,
    version: str = "1.0",
) -> list[Advertisement]:
    """The class, spec and per-platform impl advertisements for one service."""
    class_id, spec_id = service_ids(publisher, wsdl.service_name, version)
    extras = (("service_name", wsdl.service_name),) + tuple(("operation", op.name) for op in wsdl.operations)
    groups = tuple(groups)
    common = dict(publisher=publisher, published_at=now, lifetime=lifetime, groups=groups)
    ads = [
        Advertisement(
            class_id,
            AdvKind.MODULE_CLASS,
            body=ModuleClassBody(class_id, wsdl.service_name, wsdl.description, extras),
            **common,
        ),
        Advertisement(
            spec_id,
            AdvKind.MODULE_SPEC,
            body=ModuleSpecBody(spec_id, class_id, version, publisher, wsdl.binding_path, wsdl),
            **common,
        ),
    ]
    for platform in dict.fromkeys(platforms):
        package_ref = f"pkg:{wsdl.service_name}/{platform}/{version}"
        ads.append(
            Advertisement(
                impl_id(spec_id, platform),
                AdvKind.MODULE_IMPL,
                body=ModuleImplBody(spec_id, platform, package_ref),
                **common,
            )
        )
    return ads


def forward_to_rendezvous(overlay: Overlay, host: PeerNode, ads: Sequence[Advertisement]) -> bool:
    """Send ``ads`` to the host's rendezvous, which caches them with their original timestamps."""
    if host.rendezvous is None or not ads:
        return False
    msg = overlay.new_message(MessageKind.PUBLISH_ADV, host.id, host.rendezvous, hops=1, payload=[a.adv_id for a in ads])
    if not overlay.route(msg):
        return False
    rv = overlay.peers[host.rendezvous]
    for adv in ads:
        rv.cache.publish(adv, adv.published_at)
    return True


def publish_service(
    overlay: Overlay,
    host: PeerId | str,
    wsdl: WsdlDescriptor,
    groups: Sequence[str | PeerGroup] = (),
    platforms: Sequence[str] = ("midp",),
    now: int | None = None,
    lifetime: int = DEFAULT_LIFETIME,
    *,
    version: str = "1.0",
    vocabulary: Iterable[str] | None = None,
) -> list[Advertisement]:
    node = overlay.resolve(host)
    if node.role is not Role.EDGE:
        raise TopologyError(f"{node.name} is not a Mobile Host (edge peer)")
    if not node.online:
        raise HostOffline(f"{node.name} is offline")
    group_ids = []
    for g in groups:
        gid = g.id if isinstance(g, PeerGroup) else g
        if gid not in overlay.groups:
            raise UnknownPeerGroup(f"unknown peer group {gid!r}")
        group_ids.append(gid)
    wsdl.validate(vocabulary)
    now = overlay.tick if now is None else now
    ads = build_advertisements(node.id, wsdl, platforms, groups=group_ids, now=now, lifetime=lifetime, version=version)
    for adv in ads:
        node.cache.publish(adv, now)
        node.own_ads[adv.adv_id] = adv
    forward_to_rendezvous(overlay, node, ads)
    return ads


@dataclass(frozen=True)
class RepublishAction:
    adv_id: str
    tick: int
    expiry: int
    forwarded: bool


def auto_republish(overlay: Overlay, host: PeerId | str, period: int, now: int | None = None) -> list[RepublishAction]:
    """Refresh every advertisement the host publishes when ``now`` is a multiple of ``period``."""
    if period <= 0:
        raise ValueError(f"republish period must be positive, got {period}")
    node = overlay.resolve(host)
    now = overlay.tick if now is None else now
    if not node.online or now % period:
        return []
    refreshed = []
    for adv_id in sorted(node.own_ads):
        adv = node.own_ads[adv_id]
        if adv.published_at >= now:
            continue
        adv = replace(adv, published_at=now)
        node.own_ads[adv_id] = adv
        if adv_id in node.cache:
            node.cache.republish(adv_id, now)
        else:
            node.cache.publish(adv, now)
        refreshed.append(adv)
    forwarded = forward_to_rendezvous(overlay, node, refreshed)
    return [RepublishAction(a.adv_id, now, a.expiry, forwarded) for a in refreshed]


def check_batch(batch: Sequence[Advertisement]) -> None:
    classes = [a for a in batch if a.kind is AdvKind.MODULE_CLASS]
    specs = [a for a in batch if a.kind is AdvKind.MODULE_SPEC]
    impls = [a for a in batch if a.kind is AdvKind.MODULE_IMPL]
    if len(classes) != 1 or not specs or len(classes) + len(specs) + len(impls) != len(batch):
        raise InconsistentBatch("batch must hold one module class, its specs and impls only")
    class_id = classes[0].body.class_id
    spec_ids = set()
    for spec in specs:
        if spec.body.class_id != class_id:
            raise InconsistentBatch(f"spec {spec.adv_id} belongs to class {spec.body.class_id}")
        if spec.body.publisher != spec.publisher:
            raise InconsistentBatch(f"spec {spec.adv_id}: access publisher differs from advertisement publisher")
        spec_ids.add(spec.body.spec_id)
    for impl in impls:
        if impl.body.spec_id not in spec_ids:
            raise InconsistentBatch(f"impl {impl.adv_id} references foreign spec {impl.body.spec_id}")


def categorize(batch: Sequence[Advertisement], group: PeerGroup | str) -> list[Advertisement]:
    check_batch(batch)
    gid = group.id if isinstance(group, PeerGroup) else group
    return [adv.with_groups(gid) for adv in batch]
