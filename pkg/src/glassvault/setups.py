"""Ideal setup functionalities: certification, repository, channels, bulletin board."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .counters import OpCounters
from .errors import AlreadyCertified, NoMeasurement, NoSuchHandle
from .primitives import CiphertextMsg, SigKeyPair, sig_keygen, sig_sign, sig_verify

if TYPE_CHECKING:
    from .world import PhysicalReality

logger = logging.getLogger(__name__)


def cert_message(vk: bytes) -> bytes:
    return b"gv-cert-v1:" + vk


@dataclass(frozen=True)
class Certificate:
    subject_vk: bytes
    signature: bytes


class CertificationAuthority:
    """Issues at most one certificate per party id; verification is offline."""

    def __init__(self, rng: random.Random, counters: OpCounters | None = None):
        self._rng = rng
        self._counters = counters
        self._keys: SigKeyPair | None = None
        self._issued: set[str] = set()

    def getk(self) -> bytes:
        if self._keys is None:
            self._keys = sig_keygen(self._rng)
        return self._keys.verification_key

    def sign(self, party: str, vk: bytes) -> Certificate:
        if party in self._issued:
            raise AlreadyCertified(party)
        self.getk()
        assert self._keys is not None
        signature = sig_sign(self._keys.signing_key, cert_message(vk))
        if self._counters is not None:
            self._counters.bump("sign")
        self._issued.add(party)
        return Certificate(subject_vk=vk, signature=signature)

    @staticmethod
    def verify(authority_vk: bytes, vk: bytes, certificate: Certificate) -> bool:
        return sig_verify(authority_vk, cert_message(vk), certificate.signature)


class Repository:
    """Write-once payload store addressed by monotone 64-bit handles."""

    def __init__(self) -> None:
        self._entries: dict[int, CiphertextMsg] = {}
        self._next = 1

    def write(self, payload: CiphertextMsg) -> int:
        handle = self._next
        self._next += 1
        self._entries[handle] = payload
        return handle

    def read(self, handle: int) -> CiphertextMsg:
        try:
            return self._entries[handle]
        except KeyError:
            raise NoSuchHandle(str(handle)) from None

    def payloads(self) -> list[CiphertextMsg]:
        """Test hook: every payload ever written, in handle order."""
        return [self._entries[h] for h in sorted(self._entries)]


class SecureChannels:
    """Synchronous in-order delivery; only message lengths are observable.

    The full traffic record is retained as the adversary/test hook for
    leakage assertions; it is never consulted by protocol logic.
    """

    def __init__(self) -> None:
        self._lengths: dict[tuple[str, str], list[int]] = {}
        self._traffic: list[tuple[str, str, bytes]] = []

    def send(self, sender: str, receiver: str, message: bytes) -> bytes:
        self._lengths.setdefault((sender, receiver), []).append(len(message))
        self._traffic.append((sender, receiver, message))
        return message

    def leak(self, sender: str, receiver: str) -> list[int]:
        return list(self._lengths.get((sender, receiver), []))

    def traffic(self) -> list[tuple[str, str, bytes]]:
        return list(self._traffic)


class BulletinBoard:
    """Appends items only for parties whose latest infection measurement is set."""

    CALLER = "tbb"

    def __init__(self, world: "PhysicalReality"):
        self._world = world
        self._items: list[object] = []

    def add(self, party: str, item: object) -> bool:
        try:
            meas = self._world.my_current_meas(self.CALLER, party, ("INFECTED",))
        except NoMeasurement:
            logger.debug("bulletin add rejected: no measurement for %s", party)
            return False
        if not meas.get("INFECTED"):
            logger.debug("bulletin add rejected: %s not infectious", party)
            return False
        self._items.append(item)
        return True

    def retrieve(self) -> list[object]:
        return list(self._items)
