"""Party-side protocol realizing the ideal threshold FE over attested enclaves.

Three roles: the untrusted key-generation authority (its master keypair
lives in a key-management enclave), encryptors (sign key shares, seal
envelopes to the master public key), and decryptors (a decryption-
management enclave validates shares and provisions the master secret into
per-function evaluation enclaves).

The natural leakage function is realized without any enclave: the
repository payload's ciphertext length is an affine function of the
plaintext length, so the decryptor just subtracts the fixed overhead.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

from .attestation import (
    AttestationRegistry,
    EnclaveProgram,
    build_de_program,
    build_fe_program,
    build_kme_program,
    keyshare_message,
    kme_program_hash,
    verify_quote,
)
from .counters import OpCounters
from .encoding import encode_int, encode_value
from .errors import (
    AlreadySetup,
    EncryptFailed,
    FunctionReject,
    NotSetUp,
    SetupAborted,
)
from .functions import F0_DESCRIPTOR, StatefulFunction
from .primitives import (
    DEFAULT_CONFIG,
    ENVELOPE_OVERHEAD,
    PKE_OVERHEAD,
    CiphertextMsg,
    Crs,
    CryptoConfig,
    PlaintextEnvelope,
    SessionCrs,
    SigKeyPair,
    nizk_prove,
    pke_encrypt,
    sig_keygen,
    sig_sign,
)
from .randomness import StreamFactory
from .setups import Certificate, CertificationAuthority, Repository, SecureChannels

logger = logging.getLogger(__name__)

CIPHERTEXT_OVERHEAD = PKE_OVERHEAD + ENVELOPE_OVERHEAD


@dataclass(frozen=True)
class KeyShare:
    """A signed authorization chain: certificate under the root, signature under the signer."""

    function_descriptor: bytes
    sigma: bytes
    signer_vk: bytes
    cert: Certificate


@dataclass
class EncryptorContext:
    pid: str
    mpk: bytes
    crs: Crs
    sig_keys: SigKeyPair
    certificate: Certificate
    rng: random.Random


@dataclass
class DecryptorContext:
    pid: str
    mpk: bytes
    crs: Crs
    eid_de: int
    rng: random.Random
    shares: dict[bytes, list[KeyShare]] = field(default_factory=dict)
    fe_table: dict[bytes, tuple[int, bytes, bytes]] = field(default_factory=dict)


class SteelStack:
    """One protocol session: shared setup functionalities plus party contexts."""

    def __init__(
        self,
        session_id: str,
        streams: StreamFactory,
        counters: OpCounters | None = None,
        config: CryptoConfig = DEFAULT_CONFIG,
        authority_pid: str = "C",
        strict_shares: bool = False,
    ):
        self.session_id = session_id
        self.streams = streams
        self.counters = counters
        self.config = config
        self.authority_pid = authority_pid
        self.strict_shares = strict_shares

        self.g_att = AttestationRegistry(session_id, streams, counters)
        self.cert_authority = CertificationAuthority(streams.stream("cert-authority"), counters)
        self.crs_cell = SessionCrs(streams.stream("crs"))
        self.repository = Repository()
        self.channels = SecureChannels()

        self.contexts: dict[str, EncryptorContext | DecryptorContext] = {}
        # authority state: (mpk, attestation signature, enclave id)
        self._kme: tuple[bytes, bytes, int] | None = None
        self._de_program: EnclaveProgram | None = None
        # internal envelope limit leaves room for the framing around the message
        self._pke_config = CryptoConfig(
            max_message_size=config.max_message_size + ENVELOPE_OVERHEAD + 64,
            symmetric_strength=config.symmetric_strength,
        )

    # -- authority ------------------------------------------------------------------

    def _authority_setup_reply(self, requester: str) -> tuple[bytes, bytes, int]:
        """Lazily boot the key-management enclave and return (mpk, quote, eid)."""
        if self._kme is None:
            crs = self.crs_cell.get()
            authority_vk = self.cert_authority.getk()
            program = build_kme_program(authority_vk)
            eid = self.g_att.install(self.authority_pid, self.session_id, program)
            mpk, sigma = self.g_att.resume(
                self.authority_pid, eid, ("init", crs.value, self.session_id)
            )
            self._kme = (mpk, sigma, eid)
        mpk, sigma, eid = self._kme
        self._send(self.authority_pid, requester, ["Setup", mpk, sigma, eid])
        return mpk, sigma, eid

    def _authority_provision(
        self, requester: str, sigma_de: bytes, eid_de: int, pk_d: bytes
    ) -> tuple[bytes, bytes]:
        assert self._kme is not None, "provision request before any setup"
        _, _, eid_kme = self._kme
        ct_key, sigma_sk = self.g_att.resume(
            self.authority_pid, eid_kme, ("provision", sigma_de, eid_de, pk_d, eid_kme)
        )
        self._send(self.authority_pid, requester, ["provision", ct_key, sigma_sk])
        return ct_key, sigma_sk

    # -- channels ----------------------------------------------------------------------

    def _send(self, sender: str, receiver: str, message: list) -> None:
        self.channels.send(sender, receiver, encode_value(message))

    # -- party lifecycle ------------------------------------------------------------------

    def setup_party(self, pid: str, role: str) -> None:
        if pid in self.contexts:
            raise AlreadySetup(pid)
        if role not in ("A", "B"):
            raise ValueError(f"unknown role {role!r}")

        self._send(pid, self.authority_pid, ["Setup", pid])
        mpk, sigma_kme, eid_kme = self._authority_setup_reply(pid)

        vk_att = self.g_att.getpk()
        authority_vk = self.cert_authority.getk()
        if self.counters is not None:
            self.counters.bump("verify")
        if not verify_quote(
            vk_att, self.session_id, eid_kme, kme_program_hash(authority_vk), mpk, sigma_kme
        ):
            raise SetupAborted("key-management enclave attestation failed")
        crs = self.crs_cell.get()
        rng = self.streams.stream(f"party/{pid}")

        if role == "A":
            sig_keys = sig_keygen(rng)
            certificate = self.cert_authority.sign(pid, sig_keys.verification_key)
            self.contexts[pid] = EncryptorContext(
                pid=pid,
                mpk=mpk,
                crs=crs,
                sig_keys=sig_keys,
                certificate=certificate,
                rng=rng,
            )
            return

        if self._de_program is None:
            self._de_program = build_de_program(authority_vk, strict_shares=self.strict_shares)
        eid_de = self.g_att.install(pid, self.session_id, self._de_program)
        init_out, sigma_de = self.g_att.resume(
            pid, eid_de, ("init-setup", eid_kme, crs.value, self.session_id)
        )
        pk_d = init_out[0]
        self._send(pid, self.authority_pid, ["provision", sigma_de, eid_de, pk_d])
        ct_key, sigma_sk = self._authority_provision(pid, sigma_de, eid_de, pk_d)
        self.g_att.resume(pid, eid_de, ("complete-setup", ct_key, sigma_sk))
        self.contexts[pid] = DecryptorContext(
            pid=pid, mpk=mpk, crs=crs, eid_de=eid_de, rng=rng
        )

    # -- key shares ----------------------------------------------------------------------

    def keysharegen(self, encryptor: str, fn: StatefulFunction, decryptor: str) -> bool:
        sender = self.contexts.get(encryptor)
        receiver = self.contexts.get(decryptor)
        if not isinstance(sender, EncryptorContext) or not isinstance(
            receiver, DecryptorContext
        ):
            return False
        sigma = sig_sign(
            sender.sig_keys.signing_key, keyshare_message(fn.descriptor, decryptor)
        )
        if self.counters is not None:
            self.counters.bump("sign")
        share = KeyShare(
            function_descriptor=fn.descriptor,
            sigma=sigma,
            signer_vk=sender.sig_keys.verification_key,
            cert=sender.certificate,
        )
        self._send(
            encryptor,
            decryptor,
            [
                "KeyShareGen",
                fn.descriptor,
                sigma,
                share.signer_vk,
                share.cert.subject_vk,
                share.cert.signature,
            ],
        )
        stored = receiver.shares.setdefault(fn.descriptor, [])
        if share not in stored:  # byte-identical re-sends are idempotent
            stored.append(share)
        return True

    # -- encryption -------------------------------------------------------------------------

    def encrypt(self, pid: str, message: bytes, k: int) -> int:
        ctx = self.contexts.get(pid)
        if ctx is None:
            raise NotSetUp(pid)
        if not isinstance(k, int) or k < 0 or k >= 1 << 32:
            raise EncryptFailed(f"key policy out of range: {k}")
        if len(message) > self.config.max_message_size:
            raise EncryptFailed(f"message of {len(message)} bytes exceeds configured limit")
        envelope = PlaintextEnvelope(
            message=message, threshold=k, proof_nonce=ctx.rng.randbytes(16)
        )
        ciphertext = pke_encrypt(ctx.mpk, envelope.serialize(), ctx.rng, self._pke_config)
        if self.counters is not None:
            self.counters.bump("pke_encrypt")
        proof = nizk_prove(ctx.crs, (ctx.mpk, ciphertext), (envelope, None))
        return self.repository.write(CiphertextMsg(ciphertext=ciphertext, proof=proof))

    # -- decryption --------------------------------------------------------------------------

    def decrypt(self, pid: str, fn: StatefulFunction, handle: int) -> bytes | None:
        ctx = self.contexts.get(pid)
        if not isinstance(ctx, DecryptorContext):
            raise NotSetUp(pid)
        payload = self.repository.read(handle)
        if fn.descriptor == F0_DESCRIPTOR:
            return encode_int(len(payload.ciphertext) - CIPHERTEXT_OVERHEAD)

        entry = ctx.fe_table.get(fn.descriptor)
        if entry is None:
            authority_vk = self.cert_authority.getk()
            program = build_fe_program(authority_vk, fn)
            fn_rng = self.streams.stream(f"fnrand/{pid}/{fn.descriptor.hex()}")
            eid_f = self.g_att.install(pid, self.session_id, program, fn_rng=fn_rng)
            pk_fd, sigma_f = self.g_att.resume(pid, eid_f, ("init", ctx.mpk, self.session_id))
            entry = (eid_f, pk_fd, sigma_f)
            ctx.fe_table[fn.descriptor] = entry
        eid_f, pk_fd, sigma_f = entry

        share_wire = [
            (s.sigma, s.signer_vk, s.cert) for s in ctx.shares.get(fn.descriptor, [])
        ]
        provision_out, sigma_de = self.g_att.resume(
            pid,
            ctx.eid_de,
            ("provision", share_wire, eid_f, pk_fd, sigma_f, fn.descriptor, pid),
        )
        ct_key, lks, crs_value = provision_out

        try:
            run_out, _ = self.g_att.resume(
                pid,
                eid_f,
                ("run", sigma_de, ctx.eid_de, ct_key, payload, lks, crs_value, None),
            )
        except FunctionReject:
            return None
        assert run_out[0] == "computed"
        return run_out[1]

    # -- introspection hooks ------------------------------------------------------------------

    def share_count(self, pid: str, fn: StatefulFunction) -> int:
        ctx = self.contexts.get(pid)
        if not isinstance(ctx, DecryptorContext):
            return 0
        return len(ctx.shares.get(fn.descriptor, []))

    def _function_state(self, pid: str, fn: StatefulFunction) -> dict:
        """Test hook: the per-(decryptor, function) state held in enclave memory."""
        ctx = self.contexts.get(pid)
        if not isinstance(ctx, DecryptorContext):
            return {}
        entry = ctx.fe_table.get(fn.descriptor)
        if entry is None:
            return {}
        record = self.g_att._records[entry[0]]
        return dict(record.memory.get("fstate", {}))

    def _master_secret(self) -> bytes:
        """Test hook: the master decryption key held in the authority's enclave."""
        assert self._kme is not None
        record = self.g_att._records[self._kme[2]]
        return record.memory["sk"]

    def observable_bytes(self) -> list[bytes]:
        """Everything a network observer or repository reader sees."""
        wire = [m for _, _, m in self.channels.traffic()]
        wire.extend(p.serialize() for p in self.repository.payloads())
        return wire


__all__ = [
    "CIPHERTEXT_OVERHEAD",
    "DecryptorContext",
    "EncryptorContext",
    "KeyShare",
    "SteelStack",
]
