"""64-bit FNV-1a, the digest used for tree sources and episode traces."""

from __future__ import annotations

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1


def fnv1a64(text: str) -> str:
    """Digest of the UTF-8 bytes as 16 hex chars."""
    acc = FNV_OFFSET
    for byte in text.encode("utf-8"):
        acc = ((acc ^ byte) * FNV_PRIME) & _MASK
    return f"{acc:016x}"


class Fnv64:
    """Incremental form for streams (per-tick trace lines)."""

    def __init__(self):
        self.acc = FNV_OFFSET

    def update(self, text: str) -> None:
        acc = self.acc
        for byte in text.encode("utf-8"):
            acc = ((acc ^ byte) * FNV_PRIME) & _MASK
        self.acc = acc

    def hexdigest(self) -> str:
        return f"{self.acc:016x}"
