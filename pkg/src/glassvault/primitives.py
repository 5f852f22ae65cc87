"""Cryptographic primitives parameterizing the enclave protocol.

Public-key encryption is a hybrid construction: X25519 key encapsulation
to a fresh symmetric key, HKDF-SHA256 expansion, then ChaCha20-Poly1305.
The AEAD tag gives chosen-ciphertext-style integrity over arbitrary-length
plaintexts (serialized envelopes, wrapped secret keys). Signatures are
Ed25519. All key generation and encryption randomness is drawn from an
injected seeded stream.

The proof-of-plaintext-knowledge is a pluggable interface shipped with a
hash-binding default: the proof commits to (crs, receiver key, ciphertext,
envelope nonce) and is checked by the party that already holds the
decryption key, which inside this protocol is always an enclave.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .encoding import CodecError, pack_bytes, unpack_bytes
from .errors import DecryptFailed, EncryptFailed

KEM_KEY_SIZE = 32
AEAD_TAG_SIZE = 16
PKE_OVERHEAD = KEM_KEY_SIZE + AEAD_TAG_SIZE
NONCE_SIZE = 16
# u32 message length + message, u32 threshold, u32 nonce length + nonce
ENVELOPE_OVERHEAD = 4 + 4 + 4 + NONCE_SIZE

_AEAD_NONCE = b"\x00" * 12  # fresh key per encryption, so a fixed nonce is safe


@dataclass(frozen=True)
class CryptoConfig:
    """Module configuration; the symmetric strength is the security parameter."""

    max_message_size: int = 1 << 20
    symmetric_strength: int = 128


DEFAULT_CONFIG = CryptoConfig()


@dataclass(frozen=True)
class PkeKeyPair:
    public_key: bytes
    secret_key: bytes


@dataclass(frozen=True)
class SigKeyPair:
    verification_key: bytes
    signing_key: bytes


@dataclass(frozen=True)
class Crs:
    value: bytes
    trapdoor: bytes | None = None  # test-only hook, never used by the protocol


@dataclass(frozen=True)
class PlaintextEnvelope:
    """What an encryptor seals: the message, its key policy, and a proof nonce."""

    message: bytes
    threshold: int
    proof_nonce: bytes

    def __post_init__(self) -> None:
        if self.threshold < 0 or self.threshold >= 1 << 32:
            raise ValueError("threshold must be a non-negative 32-bit integer")
        if len(self.proof_nonce) != NONCE_SIZE:
            raise ValueError(f"proof nonce must be {NONCE_SIZE} bytes")

    def serialize(self) -> bytes:
        import struct

        return (
            pack_bytes(self.message)
            + struct.pack("<I", self.threshold)
            + pack_bytes(self.proof_nonce)
        )

    @classmethod
    def deserialize(cls, data: bytes) -> "PlaintextEnvelope":
        import struct

        try:
            message, offset = unpack_bytes(data, 0)
            if offset + 4 > len(data):
                raise CodecError("truncated threshold")
            (threshold,) = struct.unpack_from("<I", data, offset)
            nonce, offset = unpack_bytes(data, offset + 4)
        except CodecError as exc:
            raise DecryptFailed(f"malformed envelope: {exc}") from exc
        if offset != len(data):
            raise DecryptFailed("trailing bytes after envelope")
        if len(nonce) != NONCE_SIZE:
            raise DecryptFailed("bad envelope nonce length")
        return cls(message=message, threshold=threshold, proof_nonce=nonce)


@dataclass(frozen=True)
class CiphertextMsg:
    """Repository payload: the ciphertext and its plaintext-knowledge proof."""

    ciphertext: bytes
    proof: bytes

    def serialize(self) -> bytes:
        return pack_bytes(self.ciphertext) + pack_bytes(self.proof)

    @classmethod
    def deserialize(cls, data: bytes) -> "CiphertextMsg":
        try:
            ciphertext, offset = unpack_bytes(data, 0)
            proof, offset = unpack_bytes(data, offset)
        except CodecError as exc:
            raise DecryptFailed(f"malformed ciphertext message: {exc}") from exc
        if offset != len(data):
            raise DecryptFailed("trailing bytes after ciphertext message")
        return cls(ciphertext=ciphertext, proof=proof)


# --- public-key encryption -----------------------------------------------------

def pke_keygen(rng: random.Random) -> PkeKeyPair:
    seed = rng.randbytes(KEM_KEY_SIZE)
    sk = X25519PrivateKey.from_private_bytes(seed)
    pk = sk.public_key().public_bytes_raw()
    return PkeKeyPair(public_key=pk, secret_key=seed)


def _derive_aead_key(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> bytes:
    hkdf = HKDF(
        algorithm=hashes.SHA256(),
        length=32,
        salt=None,
        info=b"gv-hybrid-v1:" + eph_pub + recipient_pub,
    )
    return hkdf.derive(shared)


def pke_encrypt(
    public_key: bytes,
    message: bytes,
    rng: random.Random,
    config: CryptoConfig = DEFAULT_CONFIG,
) -> bytes:
    if len(message) > config.max_message_size:
        raise EncryptFailed(
            f"message of {len(message)} bytes exceeds limit {config.max_message_size}"
        )
    recipient = X25519PublicKey.from_public_bytes(public_key)
    eph_sk = X25519PrivateKey.from_private_bytes(rng.randbytes(KEM_KEY_SIZE))
    eph_pub = eph_sk.public_key().public_bytes_raw()
    shared = eph_sk.exchange(recipient)
    key = _derive_aead_key(shared, eph_pub, public_key)
    sealed = ChaCha20Poly1305(key).encrypt(_AEAD_NONCE, message, eph_pub)
    return eph_pub + sealed


def pke_decrypt(secret_key: bytes, ciphertext: bytes) -> bytes:
    if len(ciphertext) < PKE_OVERHEAD:
        raise DecryptFailed("ciphertext shorter than encapsulation overhead")
    eph_pub = ciphertext[:KEM_KEY_SIZE]
    sealed = ciphertext[KEM_KEY_SIZE:]
    sk = X25519PrivateKey.from_private_bytes(secret_key)
    my_pub = sk.public_key().public_bytes_raw()
    try:
        shared = sk.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    except Exception as exc:  # low-order point etc.
        raise DecryptFailed("bad encapsulated key") from exc
    key = _derive_aead_key(shared, eph_pub, my_pub)
    try:
        return ChaCha20Poly1305(key).decrypt(_AEAD_NONCE, sealed, eph_pub)
    except InvalidTag as exc:
        raise DecryptFailed("authentication tag mismatch") from exc


# --- signatures -----------------------------------------------------------------

def sig_keygen(rng: random.Random) -> SigKeyPair:
    seed = rng.randbytes(32)
    sk = Ed25519PrivateKey.from_private_bytes(seed)
    vk = sk.public_key().public_bytes_raw()
    return SigKeyPair(verification_key=vk, signing_key=seed)


def sig_sign(signing_key: bytes, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(signing_key).sign(message)


def sig_verify(verification_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(verification_key).verify(signature, message)
        return True
    except Exception:
        return False


# --- proof of plaintext knowledge -------------------------------------------------

def _proof_digest(crs: Crs, mpk: bytes, ciphertext: bytes, proof_nonce: bytes) -> bytes:
    return hashlib.sha256(
        b"gv-pok-v1:" + pack_bytes(crs.value) + pack_bytes(mpk)
        + pack_bytes(ciphertext) + pack_bytes(proof_nonce)
    ).digest()


def nizk_prove(
    crs: Crs,
    statement: tuple[bytes, bytes],
    witness: tuple[PlaintextEnvelope, bytes | None],
) -> bytes:
    """Prove knowledge of the envelope sealed in `statement` = (mpk, ct).

    The witness carries the envelope and the encryption randomness; the
    default instantiation binds to the envelope nonce only, so the
    randomness component may be None.
    """
    mpk, ciphertext = statement
    envelope, _enc_randomness = witness
    return _proof_digest(crs, mpk, ciphertext, envelope.proof_nonce)


def nizk_verify(
    crs: Crs,
    statement: tuple[bytes, bytes],
    proof: bytes,
    envelope: PlaintextEnvelope,
) -> bool:
    """Check a proof against the decrypted envelope.

    Runs where decryption runs: inside the function-evaluation enclave,
    which is the only verifier that can see the envelope nonce.
    """
    mpk, ciphertext = statement
    if len(proof) != hashlib.sha256().digest_size:
        return False
    return proof == _proof_digest(crs, mpk, ciphertext, envelope.proof_nonce)


# --- common reference string ----------------------------------------------------

class SessionCrs:
    """Session-scoped CRS cell: first Get samples, later Gets return the same value."""

    def __init__(self, rng: random.Random):
        self._rng = rng
        self._crs: Crs | None = None

    def get(self) -> Crs:
        if self._crs is None:
            self._crs = Crs(value=self._rng.randbytes(32))
        return self._crs
