"""Identifier helpers: 128-bit peer ids and stable content hashes."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

_HEX32 = re.compile(r"^[0-9a-f]{32}$")


def stable_hash(*parts: str, size: int = 16) -> str:
    """Hex blake2b digest over ``parts`` joined by NUL; identical across runs and platforms."""
    h = hashlib.blake2b(digest_size=size)
    h.update("\x00".join(parts).encode("utf-8"))
    return h.hexdigest()


@dataclass(frozen=True, order=True)
class PeerId:
    """Opaque 128-bit peer identifier rendered as 32 lowercase hex digits."""

    value: str

    def __post_init__(self) -> None:
        if not isinstance(self.value, str) or not _HEX32.match(self.value):
            raise ValueError(f"PeerId must be 32 lowercase hex digits, got {self.value!r}")

    @classmethod
    def derive(cls, label: str) -> "PeerId":
        return cls(stable_hash("peer", label))

    def __str__(self) -> str:
        return self.value

    def short(self) -> str:
        return self.value[:8]
