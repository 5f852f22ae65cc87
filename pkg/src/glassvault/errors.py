"""Exception types shared across the stack."""

from __future__ import annotations


class GlassVaultError(Exception):
    """Base class for all errors raised by this package."""


# --- cryptographic primitives ------------------------------------------------

class DecryptFailed(GlassVaultError):
    """Ciphertext malformed, truncated, or decrypted under the wrong key."""


class EncryptFailed(GlassVaultError):
    """Plaintext outside the configured message space."""


# --- attested execution -------------------------------------------------------

class InstallRejected(GlassVaultError):
    """Enclave install with a session id that is not the caller's."""


class NoSuchEnclave(GlassVaultError):
    """Resume addressed to an unknown enclave id."""


class ResumeRejected(GlassVaultError):
    """Resume by a party that did not install the enclave."""


class EnclaveAbort(GlassVaultError):
    """A program-level assertion failed inside an enclave.

    Carries a machine-readable cause string (see attestation.Abort).
    """

    def __init__(self, cause: str):
        super().__init__(cause)
        self.cause = cause


class PolicyUnsatisfied(GlassVaultError):
    """Fewer distinct key shares than the ciphertext's threshold requires."""


class SetupAborted(GlassVaultError):
    """A party-side setup assertion (typically attestation verification) failed."""


class NotSetUp(GlassVaultError):
    """Operation requires a party context that does not exist yet."""


class AlreadySetup(GlassVaultError):
    """Second setup call by the same party."""


# --- ideal setup functionalities ----------------------------------------------

class AlreadyCertified(GlassVaultError):
    """The certification authority issues at most one certificate per party."""


class NoSuchHandle(GlassVaultError):
    """Repository read for a handle that was never issued."""


# --- world model ----------------------------------------------------------------

class ValidationHalt(GlassVaultError):
    """The physical-reality validation predicate rejected a submitted record."""

    def __init__(self, tick: int, user: str, reason: str):
        super().__init__(f"tick {tick}, user {user}: {reason}")
        self.tick = tick
        self.user = user
        self.reason = reason


class FieldDenied(GlassVaultError):
    """Measurement field not readable by this caller."""


class NoMeasurement(GlassVaultError):
    """No record submitted yet for this user."""


class AccessDenied(GlassVaultError):
    """Privileged world-model operation called by an unprivileged party."""


# --- function framework ----------------------------------------------------------

class UnknownFunction(GlassVaultError):
    """Descriptor or name does not identify a registered function."""


class FunctionReject(GlassVaultError):
    """A function rejected its input (e.g. a non-integer batch-size input)."""


class EncodeFailed(GlassVaultError):
    """Sensitive-history encoding failed (cell index out of range)."""


# --- scenarios -------------------------------------------------------------------

class ScenarioError(GlassVaultError):
    """Scenario file failed to parse or validate."""

    def __init__(self, message: str, line: int | None = None):
        loc = f"line {line}: " if line is not None else ""
        super().__init__(f"{loc}{message}")
        self.line = line
