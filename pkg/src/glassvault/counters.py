"""Operation counters backing the per-user cost assertions."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass
class OpCounters:
    """Cryptographic and enclave operation tallies for one stack."""

    pke_keygen: int = 0
    pke_encrypt: int = 0
    pke_decrypt: int = 0
    sign: int = 0
    verify: int = 0
    enclave_install: int = 0
    enclave_resume: int = 0

    FIELDS = (
        "pke_keygen",
        "pke_encrypt",
        "pke_decrypt",
        "sign",
        "verify",
        "enclave_install",
        "enclave_resume",
    )

    def bump(self, name: str, amount: int = 1) -> None:
        setattr(self, name, getattr(self, name) + amount)

    def snapshot(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def delta(self, before: dict[str, int]) -> dict[str, int]:
        return {k: v - before[k] for k, v in self.snapshot().items()}
