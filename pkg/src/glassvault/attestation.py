"""Simulated attested execution: enclave registry plus the three programs.

The registry models a broad class of attested processors: a party installs
a program into a fresh enclave and resumes it with inputs; every output
comes back signed under a machine master key over (session id, enclave id,
program identity, output). Program identity hashes in the certification
authority's verification key, so attestation binds the certificate root.

Programs are pure handlers (input, memory) -> (output, memory'); a raised
error leaves enclave memory untouched.
"""

from __future__ import annotations

import copy
import hashlib
import logging
import random
from dataclasses import dataclass, field
from typing import Callable

from .counters import OpCounters
from .encoding import encode_value, pack_bytes
from .errors import (
    EnclaveAbort,
    InstallRejected,
    NoSuchEnclave,
    PolicyUnsatisfied,
    ResumeRejected,
)
from .functions import StatefulFunction
from .primitives import (
    CiphertextMsg,
    Crs,
    DecryptFailed,
    PlaintextEnvelope,
    SigKeyPair,
    nizk_verify,
    pke_decrypt,
    pke_encrypt,
    pke_keygen,
    sig_keygen,
    sig_sign,
    sig_verify,
)
from .randomness import StreamFactory
from .setups import CertificationAuthority

logger = logging.getLogger(__name__)


class Abort:
    """Machine-readable abort causes."""

    DOUBLE_INIT = "double init"
    NOT_INITIALIZED = "not initialized"
    BAD_INPUT = "bad input"
    BAD_DE_QUOTE = "bad DE quote"
    BAD_KME_QUOTE = "bad KME quote"
    BAD_FE_QUOTE = "bad FE quote"
    BAD_SHARE_SIGNATURE = "bad share signature"
    UNCERTIFIED_KEY = "uncertified key"
    DUPLICATE_SIGNER = "duplicate signer"
    BAD_PROVISION = "bad provision"
    BAD_PROOF = "bad proof"


def keyshare_message(function_descriptor: bytes, decryptor_pid: str) -> bytes:
    """What an encryptor signs to authorize a function for a decryptor."""
    return b"gv-keyshare-v1:" + pack_bytes(function_descriptor) + pack_bytes(
        decryptor_pid.encode("utf-8")
    )


def kme_program_hash(authority_vk: bytes) -> bytes:
    return hashlib.sha256(b"gv-prog-kme-v1:" + authority_vk).digest()


def de_program_hash(authority_vk: bytes) -> bytes:
    return hashlib.sha256(b"gv-prog-de-v1:" + authority_vk).digest()


def fe_program_hash(authority_vk: bytes, function_descriptor: bytes) -> bytes:
    return hashlib.sha256(
        b"gv-prog-fe-v1:" + pack_bytes(authority_vk) + pack_bytes(function_descriptor)
    ).digest()


def attestation_message(idx: str, eid: int, program_hash: bytes, output: object) -> bytes:
    return (
        pack_bytes(idx.encode("utf-8"))
        + pack_bytes(eid.to_bytes(8, "little"))
        + pack_bytes(program_hash)
        + pack_bytes(encode_value(output))
    )


def verify_quote(
    vk_att: bytes, idx: str, eid: int, program_hash: bytes, output: object, signature: bytes
) -> bool:
    return sig_verify(vk_att, attestation_message(idx, eid, program_hash, output), signature)


@dataclass
class EnclaveContext:
    """Capabilities available to a program while it runs."""

    vk_att: bytes
    rng: random.Random
    counters: OpCounters | None = None
    fn_rng: random.Random | None = None

    def bump(self, name: str) -> None:
        if self.counters is not None:
            self.counters.bump(name)


@dataclass(frozen=True)
class EnclaveProgram:
    name: str
    program_hash: bytes
    handler: Callable[[tuple, dict, EnclaveContext], tuple[object, dict]]


@dataclass
class EnclaveRecord:
    eid: int
    idx: str
    program: EnclaveProgram
    owner: str
    memory: dict = field(default_factory=dict)
    fn_rng: random.Random | None = None


class AttestationRegistry:
    """Global attested-execution functionality for one run."""

    def __init__(self, session_id: str, streams: StreamFactory, counters: OpCounters | None = None):
        self.session_id = session_id
        self._streams = streams
        self._counters = counters
        self._master: SigKeyPair | None = None
        self._records: dict[int, EnclaveRecord] = {}
        self._next_eid = 1

    def getpk(self) -> bytes:
        if self._master is None:
            self._master = sig_keygen(self._streams.stream("attestation-master"))
        return self._master.verification_key

    def install(
        self,
        party: str,
        sid: str,
        program: EnclaveProgram,
        fn_rng: random.Random | None = None,
    ) -> int:
        if sid != self.session_id:
            raise InstallRejected(f"{party} presented session {sid!r}")
        eid = self._next_eid
        self._next_eid += 1
        self._records[eid] = EnclaveRecord(
            eid=eid, idx=sid, program=program, owner=party, fn_rng=fn_rng
        )
        if self._counters is not None:
            self._counters.bump("enclave_install")
        return eid

    def resume(self, party: str, eid: int, message: tuple) -> tuple[object, bytes]:
        record = self._records.get(eid)
        if record is None:
            raise NoSuchEnclave(str(eid))
        if record.owner != party:
            raise ResumeRejected(f"{party} does not own enclave {eid}")
        ctx = EnclaveContext(
            vk_att=self.getpk(),
            rng=self._streams.stream(f"enclave/{eid}"),
            counters=self._counters,
            fn_rng=record.fn_rng,
        )
        output, memory = record.program.handler(message, copy.deepcopy(record.memory), ctx)
        record.memory = memory
        assert self._master is not None
        signature = sig_sign(
            self._master.signing_key,
            attestation_message(record.idx, eid, record.program.program_hash, output),
        )
        if self._counters is not None:
            self._counters.bump("enclave_resume")
            self._counters.bump("sign")
        return output, signature


# --- key management enclave ---------------------------------------------------------

def build_kme_program(authority_vk: bytes) -> EnclaveProgram:
    de_hash = de_program_hash(authority_vk)

    def handler(message: tuple, mem: dict, ctx: EnclaveContext) -> tuple[object, dict]:
        match message:
            case ("init", crs_value, idx):
                if "sk" in mem:
                    raise EnclaveAbort(Abort.DOUBLE_INIT)
                keys = pke_keygen(ctx.rng)
                ctx.bump("pke_keygen")
                mem.update(sk=keys.secret_key, mpk=keys.public_key, crs=crs_value, idx=idx)
                return keys.public_key, mem
            case ("provision", sigma_de, eid_de, pk_d, eid_kme):
                if "sk" not in mem:
                    raise EnclaveAbort(Abort.NOT_INITIALIZED)
                quoted = [pk_d, eid_kme, mem["crs"]]
                ctx.bump("verify")
                if not verify_quote(ctx.vk_att, mem["idx"], eid_de, de_hash, quoted, sigma_de):
                    raise EnclaveAbort(Abort.BAD_DE_QUOTE)
                ct_key = pke_encrypt(pk_d, mem["sk"], ctx.rng)
                ctx.bump("pke_encrypt")
                return ct_key, mem
            case _:
                raise EnclaveAbort(Abort.BAD_INPUT)

    return EnclaveProgram(name="kme", program_hash=kme_program_hash(authority_vk), handler=handler)


# --- decryption management enclave -----------------------------------------------------

def build_de_program(authority_vk: bytes, strict_shares: bool = False) -> EnclaveProgram:
    kme_hash = kme_program_hash(authority_vk)

    def validate_shares(
        shares: list, function_descriptor: bytes, pid: str, ctx: EnclaveContext
    ) -> int:
        expected = keyshare_message(function_descriptor, pid)
        seen: set[bytes] = set()
        valid = 0
        for sigma, vk, cert in shares:
            ctx.bump("verify")
            if not CertificationAuthority.verify(authority_vk, vk, cert):
                if strict_shares:
                    raise EnclaveAbort(Abort.UNCERTIFIED_KEY)
                logger.warning("dropping key share with uncertified signer key")
                continue
            ctx.bump("verify")
            if not sig_verify(vk, expected, sigma):
                if strict_shares:
                    raise EnclaveAbort(Abort.BAD_SHARE_SIGNATURE)
                logger.warning("dropping key share with bad signature")
                continue
            if vk in seen:
                raise EnclaveAbort(Abort.DUPLICATE_SIGNER)
            seen.add(vk)
            valid += 1
        return valid

    def handler(message: tuple, mem: dict, ctx: EnclaveContext) -> tuple[object, dict]:
        match message:
            case ("init-setup", eid_kme, crs_value, idx):
                if "sk_kd" in mem:
                    raise EnclaveAbort(Abort.DOUBLE_INIT)
                keys = pke_keygen(ctx.rng)
                ctx.bump("pke_keygen")
                mem.update(sk_kd=keys.secret_key, eid_kme=eid_kme, crs=crs_value, idx=idx)
                return [keys.public_key, eid_kme, crs_value], mem
            case ("complete-setup", ct_key, sigma_kme):
                if "sk_kd" not in mem:
                    raise EnclaveAbort(Abort.NOT_INITIALIZED)
                ctx.bump("verify")
                if not verify_quote(
                    ctx.vk_att, mem["idx"], mem["eid_kme"], kme_hash, ct_key, sigma_kme
                ):
                    raise EnclaveAbort(Abort.BAD_KME_QUOTE)
                try:
                    msk = pke_decrypt(mem["sk_kd"], ct_key)
                except DecryptFailed as exc:
                    raise EnclaveAbort(Abort.BAD_PROVISION) from exc
                ctx.bump("pke_decrypt")
                mem["msk"] = msk
                return [], mem
            case ("provision", shares, eid_f, pk_fd, sigma_f, function_descriptor, pid):
                if "msk" not in mem:
                    raise EnclaveAbort(Abort.NOT_INITIALIZED)
                count = validate_shares(list(shares), function_descriptor, pid, ctx)
                fe_hash = fe_program_hash(authority_vk, function_descriptor)
                ctx.bump("verify")
                if not verify_quote(ctx.vk_att, mem["idx"], eid_f, fe_hash, pk_fd, sigma_f):
                    raise EnclaveAbort(Abort.BAD_FE_QUOTE)
                ct_key = pke_encrypt(pk_fd, mem["msk"], ctx.rng)
                ctx.bump("pke_encrypt")
                return [ct_key, count, mem["crs"]], mem
            case _:
                raise EnclaveAbort(Abort.BAD_INPUT)

    return EnclaveProgram(name="de", program_hash=de_program_hash(authority_vk), handler=handler)


# --- function evaluation enclave ----------------------------------------------------------

def build_fe_program(authority_vk: bytes, function: StatefulFunction) -> EnclaveProgram:
    de_hash = de_program_hash(authority_vk)
    prog_hash = fe_program_hash(authority_vk, function.descriptor)

    def handler(message: tuple, mem: dict, ctx: EnclaveContext) -> tuple[object, dict]:
        match message:
            case ("init", mpk, idx):
                if "sk_fd" in mem:
                    raise EnclaveAbort(Abort.DOUBLE_INIT)
                keys = pke_keygen(ctx.rng)
                ctx.bump("pke_keygen")
                mem.update(sk_fd=keys.secret_key, fstate={}, mpk=mpk, idx=idx)
                return keys.public_key, mem
            case ("run", sigma_de, eid_de, ct_key, ct_msg, lks, crs_value, short_circuit):
                if short_circuit is not None:
                    # Simulator hook used only by the equivalence harness.
                    return ["computed", short_circuit], mem
                if "sk_fd" not in mem:
                    raise EnclaveAbort(Abort.NOT_INITIALIZED)
                quoted = [ct_key, lks, crs_value]
                ctx.bump("verify")
                if not verify_quote(ctx.vk_att, mem["idx"], eid_de, de_hash, quoted, sigma_de):
                    raise EnclaveAbort(Abort.BAD_DE_QUOTE)
                try:
                    msk = pke_decrypt(mem["sk_fd"], ct_key)
                except DecryptFailed as exc:
                    raise EnclaveAbort(Abort.BAD_PROVISION) from exc
                ctx.bump("pke_decrypt")
                payload = ct_msg if isinstance(ct_msg, CiphertextMsg) else CiphertextMsg(*ct_msg)
                try:
                    envelope = PlaintextEnvelope.deserialize(pke_decrypt(msk, payload.ciphertext))
                except DecryptFailed as exc:
                    # An undecryptable ciphertext cannot carry a valid knowledge proof.
                    raise EnclaveAbort(Abort.BAD_PROOF) from exc
                ctx.bump("pke_decrypt")
                crs = Crs(value=crs_value)
                if not nizk_verify(crs, (mem["mpk"], payload.ciphertext), payload.proof, envelope):
                    raise EnclaveAbort(Abort.BAD_PROOF)
                if lks < envelope.threshold:
                    raise PolicyUnsatisfied(
                        f"{lks} shares present, ciphertext requires {envelope.threshold}"
                    )
                assert ctx.fn_rng is not None, "function enclave installed without a state stream"
                out, fstate = function.evaluate(envelope.message, mem["fstate"], ctx.fn_rng)
                mem["fstate"] = fstate
                return ["computed", out], mem
            case _:
                raise EnclaveAbort(Abort.BAD_INPUT)

    return EnclaveProgram(name=f"fe[{function.name}]", program_hash=prog_hash, handler=handler)
