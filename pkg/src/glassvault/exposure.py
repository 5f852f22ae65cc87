"""Exposure notification, its analytics extension, and the composed protocol.

`ExposureIdeal` is the plain notification functionality: activation,
exposure sharing gated on infection status, and risk checks against a
noisy view of physical reality. `ExposureAnalyticsIdeal` extends it with
analysts, per-user consent, and threshold-gated evaluation of registered
batch functions over shared sensitive data; it is the oracle the composed
protocol is compared against.

`GlassVault` is the protocol: it drives the plain notification
functionality for the epidemiological mechanics and the enclave FE stack
for the analytics. Infected users upload their sensitive history
encrypted under a threshold tied to the exposed population; analysts can
evaluate only with enough user-issued key shares.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass

from .encoding import decode_int, encode_int
from .errors import AlreadySetup, PolicyUnsatisfied
from .functions import ListFunction, StatefulFunction, aggs_wrap
from .heatmap import build_sec_payload
from .randomness import StreamFactory
from .setups import BulletinBoard
from .steel import EncryptorContext, SteelStack
from .world import (
    SEC,
    Clock,
    ErrorFunction,
    FakingFunction,
    LEAKAGE_SELECTORS,
    PhysicalReality,
    RealityRecord,
    SecSample,
    build_error_function,
    identity_error,
)

logger = logging.getLogger(__name__)

GATED = "gated"
ERROR = "error"


@dataclass(frozen=True)
class RiskParams:
    """Parameters of the default risk estimator: recent close contact count."""

    d_max: float = 2.0
    tau: int = 3

    def __post_init__(self) -> None:
        if self.d_max <= 0 or self.tau < 1:
            raise ValueError("d_max must be positive and tau at least 1")


@dataclass(frozen=True)
class ThresholdPolicy:
    """Maps the exposed-population size to the required authorization count."""

    kind: str = "majority"
    value: int = 0

    def required(self, n: int) -> int:
        if self.kind == "majority":
            return math.ceil(n / 2)
        if self.kind == "const":
            return max(0, min(self.value, n))
        raise ValueError(f"unknown threshold policy {self.kind!r}")


class NoisyStore:
    """Derived noisy view of the reality store.

    The view is recomputed from ground truth on every refresh; faking
    transforms applied by the adversary are replayed on top so they
    persist across refreshes. Ground truth is never mutated.
    """

    def __init__(self, world: PhysicalReality, caller: str):
        self._world = world
        self._caller = caller
        self._errfn: ErrorFunction = identity_error()
        self._fakes: list[FakingFunction] = []
        self._view: list[RealityRecord] = []
        self._at: dict[tuple[str, int], RealityRecord] = {}
        self._latest: dict[str, RealityRecord] = {}

    def reset(self, errfn: ErrorFunction) -> None:
        self._errfn = errfn
        self._fakes = []
        self._view = []
        self._at = {}
        self._latest = {}

    def refresh(self) -> None:
        view = self._world.all_meas(self._caller, self._errfn)
        for fake in self._fakes:
            view = fake.apply(view)
        self._view = view
        self._at = {}
        self._latest = {}
        for record in view:
            self._at[(record.user, record.time)] = record
            self._latest[record.user] = record

    def apply_fake(self, fake: FakingFunction) -> None:
        self._fakes.append(fake)
        self.refresh()

    def records(self) -> list[RealityRecord]:
        return list(self._view)

    def latest(self, user: str) -> RealityRecord | None:
        return self._latest.get(user)

    def infected(self, user: str) -> bool:
        record = self._latest.get(user)
        return bool(record and record.infected)

    def sec_history(self, user: str) -> list[SecSample]:
        record = self._latest.get(user)
        return list(record.sec) if record else []

    def distance(self, user: str, peer: str, tick: int) -> float | None:
        record = self._at.get((user, tick))
        if record is not None and peer in record.dist:
            return record.dist[peer]
        mirrored = self._at.get((peer, tick))
        if mirrored is not None and user in mirrored.dist:
            return mirrored.dist[user]
        return None


class ExposureIdeal:
    """Plain exposure notification over the shared world model."""

    CALLER = "en"

    def __init__(
        self,
        world: PhysicalReality,
        clock: Clock,
        risk: RiskParams = RiskParams(),
        noise_rng: random.Random | None = None,
        noise_delta: float = 1.0,
        leakage: str = "default",
    ):
        self.world = world
        self.clock = clock
        self.risk = risk
        self._noise_rng = noise_rng or random.Random(0)
        self._noise_delta = noise_delta
        self._leakage = leakage
        self.noisy = NoisyStore(world, self.CALLER)
        self.active: list[str] = []
        self.se: list[tuple[str, int]] = []
        self.corrupted: list[str] = []
        self.adversary_log: list[dict] = []

    # -- lifecycle ------------------------------------------------------------

    def setup(self, errfn_name: str) -> bool:
        errfn = build_error_function(errfn_name, self._noise_rng, self._noise_delta)
        if errfn is None:
            return False
        self.noisy.reset(errfn)
        return True

    def activate(self, user: str) -> None:
        # exposed users never re-enter the active population
        if user not in self.active and user not in self.shared_users():
            self.active.append(user)

    def remove(self, user: str) -> None:
        if user in self.active:
            self.active.remove(user)

    # -- core operations ----------------------------------------------------------

    def shared_users(self) -> list[str]:
        return [user for user, _ in self.se]

    def share(self, user: str) -> int | None:
        """Record an exposure upload; None means the user may not share."""
        self.noisy.refresh()
        if user in self.shared_users():
            return None  # an exposed user never re-enters the protocol
        if not self.noisy.infected(user):
            return None
        tick = self.clock.now()
        self._record_share(user, tick)
        self.remove(user)
        if user in self.corrupted:
            self.adversary_log.append(
                {"op": "share", "user": user, "sec": [s.as_list() for s in self.noisy.sec_history(user)]}
            )
        return tick

    def _record_share(self, user: str, tick: int) -> None:
        self.se.append((user, tick))

    def check(self, user: str) -> int | None:
        """Risk score: ticks in the lookback window with a close exposed contact."""
        if user not in self.active:
            return None
        self.noisy.refresh()
        now = self.clock.now()
        exposed = [v for v in self.shared_users() if v != user]
        score = 0
        for tick in range(max(0, now - self.risk.tau), now + 1):
            for peer in exposed:
                distance = self.noisy.distance(user, peer, tick)
                if distance is not None and distance <= self.risk.d_max:
                    score += 1
                    break
        return score

    # -- adversary interface ----------------------------------------------------------

    def corrupt(self, user: str) -> dict:
        if user not in self.corrupted:
            self.corrupted.append(user)
        return {}

    def is_corrupt(self, user: str) -> bool:
        return user in self.corrupted

    def fake(self, fake: FakingFunction | None) -> bool:
        """Apply a member of the allowable faking set; non-members are ignored."""
        if fake is None:
            return False
        self.noisy.apply_fake(fake)
        return True

    def my_current_meas(self, user: str, fields: tuple[str, ...]) -> dict | None:
        """Adversary passthrough: measurements of corrupted users only."""
        if user not in self.corrupted:
            return None
        return self.world.my_current_meas(self.CALLER, user, fields)

    def leak(self) -> dict:
        selector = LEAKAGE_SELECTORS[self._leakage]
        self.noisy.refresh()
        return selector(self.noisy.records(), list(self.active), list(self.se))


class ExposureAnalyticsIdeal(ExposureIdeal):
    """Analytics-augmented ideal functionality: the protocol's oracle."""

    CALLER = "en-plus"

    def __init__(
        self,
        world: PhysicalReality,
        clock: Clock,
        af: dict[str, ListFunction],
        policy: ThresholdPolicy,
        streams: StreamFactory,
        ticks_per_day: int = 1,
        risk: RiskParams = RiskParams(),
        noise_delta: float = 1.0,
        leakage: str = "default",
    ):
        super().__init__(
            world,
            clock,
            risk=risk,
            noise_rng=streams.stream("en-noise"),
            noise_delta=noise_delta,
            leakage=leakage,
        )
        self.af = af
        self.policy = policy
        self._streams = streams
        self._ticks_per_day = ticks_per_day
        self._aggs: dict[str, StatefulFunction] = {}
        # (alpha, analyst) -> accepting users, in accept order (may repeat)
        self.auth: dict[tuple[str, str], list[str]] = {}
        # (alpha, analyst) -> {"state": inner function state, "consumed": SE prefix}
        self._tables: dict[tuple[str, str], dict] = {}
        # SE entries carry the share-time sensitive snapshot
        self._payloads: dict[str, bytes] = {}

    def _record_share(self, user: str, tick: int) -> None:
        super()._record_share(user, tick)
        samples = self.noisy.sec_history(user)
        self._payloads[user] = build_sec_payload(samples, tick // self._ticks_per_day)

    # -- analyst operations ---------------------------------------------------------

    def register_analyst(self, analyst: str, alpha: str) -> list[str] | None:
        if alpha not in self.af:
            return None
        self.auth.setdefault((alpha, analyst), [])
        return self.shared_users()  # these users receive the consent request

    def accept(self, user: str, alpha: str, analyst: str) -> bool:
        if (alpha, analyst) not in self.auth:
            return False
        if user not in self.shared_users():
            return False
        self.auth[(alpha, analyst)].append(user)
        return True

    def analyse(self, analyst: str, alpha: str) -> tuple[str, bytes | None]:
        key = (alpha, analyst)
        if key not in self.auth:
            return ERROR, None
        if len(set(self.auth[key])) < self.policy.required(len(self.se)):
            return GATED, None
        table = self._tables.setdefault(key, {"state": {}, "consumed": 0})
        batch = [self._payloads[user] for user, _ in self.se[table["consumed"]:]]
        rng = self._function_stream(analyst, alpha)
        y, new_state = self.af[alpha].evaluate(batch, table["state"], rng)
        table["state"] = new_state
        table["consumed"] = len(self.se)
        return "ok", y

    def corrupt(self, user: str) -> dict:
        super().corrupt(user)
        pairs = sorted(
            {(alpha, analyst) for (alpha, analyst), users in self.auth.items() if user in users}
        )
        return {"authorized": [list(p) for p in pairs]}

    # -- introspection ------------------------------------------------------------------

    def function_state(self, analyst: str, alpha: str) -> dict:
        table = self._tables.get((alpha, analyst))
        return dict(table["state"]) if table else {}

    def _aggs_function(self, alpha: str) -> StatefulFunction:
        fn = self._aggs.get(alpha)
        if fn is None:
            fn = aggs_wrap(self.af[alpha])
            self._aggs[alpha] = fn
        return fn

    def _function_stream(self, analyst: str, alpha: str) -> random.Random:
        # keyed like the protocol side's enclave stream so randomized
        # functions stay bit-aligned across the two worlds
        descriptor = self._aggs_function(alpha).descriptor
        return self._streams.stream(f"fnrand/{analyst}/{descriptor.hex()}")


class GlassVault:
    """The composed protocol: notification subroutine plus enclave FE analytics."""

    CALLER = "glass-vault"

    def __init__(
        self,
        world: PhysicalReality,
        clock: Clock,
        steel: SteelStack,
        af: dict[str, ListFunction],
        policy: ThresholdPolicy,
        streams: StreamFactory,
        ticks_per_day: int = 1,
        risk: RiskParams = RiskParams(),
        noise_delta: float = 1.0,
        leakage: str = "default",
    ):
        self.world = world
        self.clock = clock
        self.steel = steel
        self.af = af
        self.policy = policy
        self._ticks_per_day = ticks_per_day
        self.en = ExposureIdeal(
            world,
            clock,
            risk=risk,
            noise_rng=streams.stream("en-noise"),
            noise_delta=noise_delta,
            leakage=leakage,
        )
        self.tbb = BulletinBoard(world)
        self._aggs: dict[str, StatefulFunction] = {}
        self._registered: dict[tuple[str, str], set[str]] = {}  # (alpha, analyst) -> acceptors
        self._processed: dict[tuple[str, str], set[int]] = {}
        # erase instrumentation: the actual plaintext buffers, zeroized after sealing
        self._sec_scratch: dict[str, bytearray] = {}

    # -- user operations ----------------------------------------------------------------

    def setup(self, errfn_name: str) -> bool:
        return self.en.setup(errfn_name)

    def activate(self, user: str) -> None:
        self.en.activate(user)

    def remove(self, user: str) -> None:
        self.en.remove(user)

    def share(self, user: str) -> int | None:
        tick = self.en.share(user)
        if tick is None:
            return None
        self.steel.setup_party(user, "A")
        encryptor_count = sum(
            1 for ctx in self.steel.contexts.values() if isinstance(ctx, EncryptorContext)
        )
        assert encryptor_count == len(self.en.se), (
            "exposed population and encryptor membership diverged"
        )
        meas = self.world.my_current_meas(self.CALLER, user, (SEC,))
        scratch = bytearray(
            build_sec_payload(list(meas[SEC]), tick // self._ticks_per_day)
        )
        self._sec_scratch[user] = scratch
        threshold = self.policy.required(encryptor_count)
        handle = self.steel.encrypt(user, bytes(scratch), threshold)
        for i in range(len(scratch)):  # erase the plaintext before publishing
            scratch[i] = 0
        if not self.tbb.add(user, handle):
            logger.warning("bulletin board rejected upload from %s", user)
            return None
        return tick

    def sec_buffer_erased(self, user: str) -> bool:
        """Instrumentation: the user shared and their plaintext buffer is all zeros."""
        scratch = self._sec_scratch.get(user)
        return scratch is not None and not any(scratch)

    def check(self, user: str) -> int | None:
        return self.en.check(user)

    def accept(self, user: str, alpha: str, analyst: str) -> bool:
        key = (alpha, analyst)
        if key not in self._registered:
            return False
        if user not in self.en.shared_users():
            return False
        if not self.steel.keysharegen(user, self._aggs_function(alpha), analyst):
            return False
        self._registered[key].add(user)
        return True

    # -- analyst operations -----------------------------------------------------------------

    def register_analyst(self, analyst: str, alpha: str) -> list[str] | None:
        if alpha not in self.af:
            return None
        try:
            self.steel.setup_party(analyst, "B")
        except AlreadySetup:
            pass
        self._registered.setdefault((alpha, analyst), set())
        self._processed.setdefault((alpha, analyst), set())
        return self.en.shared_users()

    def analyse(self, analyst: str, alpha: str) -> tuple[str, bytes | None]:
        key = (alpha, analyst)
        if key not in self._registered:
            return ERROR, None
        fn = self._aggs_function(alpha)
        handles = [h for h in self.tbb.retrieve() if isinstance(h, int)]
        fresh = [h for h in handles if h not in self._processed[key]]
        # Pre-gate on the acceptor count the analyst observed; starting a
        # batch that cannot finish would strand state inside the enclave.
        if len(self._registered[key]) < self.policy.required(len(handles)):
            return GATED, None
        count_handle = self.steel.encrypt(analyst, encode_int(len(fresh)), 0)
        try:
            echo = self.steel.decrypt(analyst, fn, count_handle)
        except PolicyUnsatisfied:
            return GATED, None
        if not fresh:
            return "ok", echo  # empty batch evaluates immediately
        assert echo is not None and decode_int(echo) == len(fresh)
        result: bytes | None = None
        for handle in fresh:
            try:
                result = self.steel.decrypt(analyst, fn, handle)
            except PolicyUnsatisfied:
                return GATED, None
        self._processed[key].update(fresh)
        return "ok", result

    # -- adversary interface --------------------------------------------------------------------

    def corrupt(self, user: str) -> dict:
        self.en.corrupt(user)
        pairs = sorted(
            {(alpha, analyst) for (alpha, analyst), users in self._registered.items() if user in users}
        )
        # re-issuing shares for prior consents keeps the worlds aligned;
        # byte-identical re-sends deduplicate on the decryptor side
        for alpha, analyst in pairs:
            self.steel.keysharegen(user, self._aggs_function(alpha), analyst)
        return {"authorized": [list(p) for p in pairs]}

    def is_corrupt(self, user: str) -> bool:
        return self.en.is_corrupt(user)

    def fake(self, fake: FakingFunction | None) -> bool:
        return self.en.fake(fake)

    def my_current_meas(self, user: str, fields: tuple[str, ...]) -> dict | None:
        return self.en.my_current_meas(user, fields)

    def leak(self) -> dict:
        return self.en.leak()

    # -- internals ----------------------------------------------------------------------------------

    def _aggs_function(self, alpha: str) -> StatefulFunction:
        fn = self._aggs.get(alpha)
        if fn is None:
            fn = aggs_wrap(self.af[alpha])
            self._aggs[alpha] = fn
        return fn


def build_af(
    names: list[str],
    heatmap_params: dict,
) -> dict[str, ListFunction]:
    """Instantiate the allowed analysis functions for a run."""
    from .functions import list_function

    af: dict[str, ListFunction] = {}
    for name in names:
        if name == "heatmap":
            af[name] = list_function("heatmap", **heatmap_params)
        else:
            af[name] = list_function(name)
    return af


__all__ = [
    "ERROR",
    "GATED",
    "ExposureAnalyticsIdeal",
    "ExposureIdeal",
    "GlassVault",
    "NoisyStore",
    "RiskParams",
    "ThresholdPolicy",
    "build_af",
]
