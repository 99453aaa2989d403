"""Exception hierarchy shared by every simulator module."""

from __future__ import annotations


class MobiHostError(Exception):
    """Base class for all simulator errors."""


# overlay
class TopologyError(MobiHostError):
    pass


class DuplicatePeerId(TopologyError):
    pass


class DanglingRendezvous(TopologyError):
    pass


class EmptyTopology(TopologyError):
    pass


class UnknownPeer(MobiHostError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class SourceOffline(MobiHostError):
    pass


# advertisements
class NonPositiveLifetime(MobiHostError, ValueError):
    pass


class UnknownAdvertisement(MobiHostError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class MalformedDocument(MobiHostError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidPeerGroup(MobiHostError, ValueError):
    pass


# publishing
class HostOffline(MobiHostError):
    pass


class UnknownPeerGroup(MobiHostError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class InvalidWsdl(MobiHostError, ValueError):
    pass


class InconsistentBatch(MobiHostError, ValueError):
    pass


# discovery
class OriginOffline(MobiHostError):
    pass


class SpecNotFound(MobiHostError, LookupError):
    pass


# ranking
class EmptyResults(MobiHostError, ValueError):
    pass


class EmptyQuery(MobiHostError, ValueError):
    pass


class UnknownDocument(MobiHostError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


# context
class UnknownConcept(MobiHostError, ValueError):
    pass


class OntologyCycle(MobiHostError, ValueError):
    pass


# harness
class ConfigInvalid(MobiHostError, ValueError):
    """Scenario configuration failed validation.

    ``path`` points at the offending field, e.g. ``queries[2].origin``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")

    def to_record(self) -> dict:
        return {"error": "ConfigInvalid", "path": self.path, "message": self.message}


class RankOutOfRange(MobiHostError, IndexError):
    pass


class PublisherUnreachable(MobiHostError):
    pass


class IoFailure(MobiHostError, OSError):
    pass
