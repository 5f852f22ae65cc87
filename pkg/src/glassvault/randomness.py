"""Seeded randomness plumbing.

No component draws ambient randomness. A run owns one master seed; every
stateful consumer (party, enclave, per-decryptor function state thread)
gets its own stream derived from the master seed and a stable label, so
two stacks built from the same seed can be compared bit for bit.
"""

from __future__ import annotations

import hashlib
import random


def derive_stream(master_seed: int, label: str) -> random.Random:
    """Deterministic child stream for (master_seed, label)."""
    material = hashlib.sha256(
        b"gv-stream-v1:" + str(master_seed).encode("ascii") + b":" + label.encode("utf-8")
    ).digest()
    return random.Random(int.from_bytes(material, "little"))


class StreamFactory:
    """Hands out named child streams of a single master seed.

    Each label is a fresh, independent stream; requesting the same label
    twice returns the same (cached) stream object so sequential draws
    continue rather than restart.
    """

    def __init__(self, master_seed: int):
        self.master_seed = master_seed
        self._streams: dict[str, random.Random] = {}

    def stream(self, label: str) -> random.Random:
        existing = self._streams.get(label)
        if existing is None:
            existing = derive_stream(self.master_seed, label)
            self._streams[label] = existing
        return existing
