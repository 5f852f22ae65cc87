"""Reference ideal functionality for threshold functional encryption.

This is the trusted-party specification the enclave protocol is tested
against: plaintexts live in a table keyed by handles, key shares are
identities of authorizing encryptors, and decryption evaluates the
function directly when enough distinct, set-up authorizers exist (or when
the decryptor is corrupted together with at least the threshold of
corrupted encryptors).

Function randomness is drawn from a per-(decryptor, function) stream
derived from the run seed, so ideal and protocol runs built from the same
seed are comparable bit for bit.
"""

from __future__ import annotations

import random

from .encoding import encode_int
from .errors import AlreadySetup, FunctionReject
from .functions import F0_DESCRIPTOR, StatefulFunction, f0_function
from .primitives import DEFAULT_CONFIG, CryptoConfig
from .randomness import StreamFactory

ROLE_ENCRYPTOR = "A"
ROLE_DECRYPTOR = "B"
ROLE_AUTHORITY = "C"


class DdFesr:
    """Ideal threshold FE over stateful randomized functions."""

    def __init__(self, streams: StreamFactory, config: CryptoConfig = DEFAULT_CONFIG):
        self._streams = streams
        self._config = config
        self._functions: dict[bytes, StatefulFunction] = {}
        self.register_function(f0_function())

        self.setup_done: dict[str, bool] = {}
        self.roles: dict[str, str] = {}
        self.encryptors: list[str] = []
        self.decryptors: list[str] = []
        self.corrupted_encryptors: list[str] = []
        self.corrupted_decryptors: list[str] = []
        self._messages: dict[int, tuple[bytes, int]] = {}
        self._next_handle = 1
        # key shares: (decryptor, descriptor) -> authorizing encryptor identities
        self._shares: dict[tuple[str, bytes], list[str]] = {}
        # function states: (decryptor, descriptor) -> state dict
        self._states: dict[tuple[str, bytes], dict] = {}
        # what the adversary would see of each share event (the function name
        # is visible only when one endpoint is corrupted)
        self.adversary_log: list[dict] = []

    # -- registration ------------------------------------------------------------

    def register_function(self, fn: StatefulFunction) -> None:
        self._functions[fn.descriptor] = fn

    def is_registered(self, descriptor: bytes) -> bool:
        return descriptor in self._functions

    # -- party lifecycle ------------------------------------------------------------

    def setup(self, party: str, role: str) -> bool:
        """Join as encryptor or decryptor; authority-role setups are ignored."""
        if self.setup_done.get(party):
            raise AlreadySetup(party)
        if role == ROLE_ENCRYPTOR:
            self.encryptors.append(party)
        elif role == ROLE_DECRYPTOR:
            self.decryptors.append(party)
        else:
            return False
        self.setup_done[party] = True
        self.roles[party] = role
        return True

    def corrupt(self, party: str) -> dict:
        """Mark a party corrupted and disclose what its key material spans."""
        if party in self.encryptors:
            if party not in self.corrupted_encryptors:
                self.corrupted_encryptors.append(party)
            pairs = sorted(
                (decryptor, desc.hex())
                for (decryptor, desc), authors in self._shares.items()
                if party in authors
            )
            return {"role": ROLE_ENCRYPTOR, "authorized": pairs}
        if party in self.decryptors:
            if party not in self.corrupted_decryptors:
                self.corrupted_decryptors.append(party)
            view = {
                desc.hex(): list(authors)
                for (decryptor, desc), authors in self._shares.items()
                if decryptor == party
            }
            return {"role": ROLE_DECRYPTOR, "shares": dict(sorted(view.items()))}
        return {"role": None}

    # -- core operations ---------------------------------------------------------------

    def keysharegen(self, encryptor: str, fn: StatefulFunction, decryptor: str) -> bool:
        """Record that `encryptor` authorizes `fn` for `decryptor`.

        Only set-up members of the respective role sets participate; the
        call is a silent no-op otherwise.
        """
        if not (
            self.is_registered(fn.descriptor)
            and self.setup_done.get(encryptor)
            and self.setup_done.get(decryptor)
            and encryptor in self.encryptors
            and decryptor in self.decryptors
        ):
            return False
        key = (decryptor, fn.descriptor)
        self._shares.setdefault(key, []).append(encryptor)
        visible = (
            encryptor in self.corrupted_encryptors
            or decryptor in self.corrupted_decryptors
        )
        self.adversary_log.append(
            {
                "op": "keysharegen",
                "function": fn.descriptor.hex() if visible else None,
                "encryptor": encryptor,
                "decryptor": decryptor,
            }
        )
        return True

    def encrypt(self, party: str, x: bytes, k: int) -> int | None:
        if not self.setup_done.get(party):
            return None
        if not isinstance(k, int) or k < 0 or k >= 1 << 32:
            return None
        if len(x) > self._config.max_message_size:
            return None
        handle = self._next_handle
        self._next_handle += 1
        self._messages[handle] = (x, k)
        return handle

    def distinct_share_count(self, decryptor: str, descriptor: bytes) -> int:
        authors = self._shares.get((decryptor, descriptor), [])
        return len({a for a in authors if self.setup_done.get(a)})

    def decrypt(self, decryptor: str, fn: StatefulFunction, handle: int) -> bytes | None:
        if not self.setup_done.get(decryptor) or decryptor not in self.decryptors:
            return None
        entry = self._messages.get(handle)
        if entry is None:
            return None
        x, k = entry
        if fn.descriptor == F0_DESCRIPTOR:
            return encode_int(len(x))
        if not self.is_registered(fn.descriptor):
            return None
        authorized = self.distinct_share_count(decryptor, fn.descriptor) >= k
        bypass = (
            decryptor in self.corrupted_decryptors
            and len(self.corrupted_encryptors) >= k
        )
        if not (authorized or bypass):
            return None
        key = (decryptor, fn.descriptor)
        state = self._states.get(key, {})
        rng = self._function_stream(decryptor, fn.descriptor)
        try:
            y, new_state = fn.evaluate(x, state, rng)
        except FunctionReject:
            return None
        self._states[key] = new_state
        return y

    # -- introspection (tests and drivers) ---------------------------------------------

    def function_state(self, decryptor: str, descriptor: bytes) -> dict:
        return self._states.get((decryptor, descriptor), {})

    def _function_stream(self, decryptor: str, descriptor: bytes) -> random.Random:
        return self._streams.stream(f"fnrand/{decryptor}/{descriptor.hex()}")
