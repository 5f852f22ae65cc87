"""Scripted ground truth: the global clock and the physical-reality store.

Records are append-only. Each record snapshots one user's device state at
one tick: peer distances, transmission power, infection flag, and the
accumulated sensitive sample history (hourly location cells). The
sensitive field is readable only by privileged functionalities.

Noisy views of the store are derived elsewhere (the exposure layer); the
allowable error and faking transforms plus the leakage projections are
defined here so every layer agrees on them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import AccessDenied, FieldDenied, NoMeasurement, ValidationHalt

DIST = "DIST"
TP = "TP"
INFECTED = "INFECTED"
SEC = "SEC"

PUBLIC_FIELDS = (DIST, TP, INFECTED)
ALL_FIELDS = PUBLIC_FIELDS + (SEC,)


@dataclass(frozen=True)
class SecSample:
    """One hourly location sample: which cell the user was in."""

    day: int
    hour: int
    cell: int

    def as_list(self) -> list[int]:
        return [self.day, self.hour, self.cell]


@dataclass(frozen=True)
class RealityRecord:
    user: str
    time: int
    dist: dict[str, float] = field(default_factory=dict)
    tp: float = 0.0
    infected: bool | None = None
    sec: tuple[SecSample, ...] = ()


@dataclass(frozen=True)
class ValidationRules:
    """Default well-formedness predicate over the record store."""

    symmetry_tolerance: float = 0.10
    max_speed: float = 500.0  # meters of pairwise distance change per tick


class Clock:
    """Monotone tick counter; only the scenario driver increments it."""

    def __init__(self) -> None:
        self._tick = 0

    def now(self) -> int:
        return self._tick

    def increment(self) -> int:
        self._tick += 1
        return self._tick


class PhysicalReality:
    def __init__(
        self,
        clock: Clock,
        privileged: Iterable[str] = ("en", "en-plus", "glass-vault", "tbb"),
        rules: ValidationRules = ValidationRules(),
    ):
        self._clock = clock
        self._privileged = set(privileged)
        self._rules = rules
        self._records: list[RealityRecord] = []
        # latest record per (user, tick), maintained for validation and reads
        self._latest_at: dict[tuple[str, int], RealityRecord] = {}
        self._latest: dict[str, RealityRecord] = {}

    # -- ingestion ------------------------------------------------------------

    def submit(self, user: str, record: RealityRecord) -> bool:
        """Append a record if its timestamp is current and validation holds.

        Stale timestamps reject the record; a validation failure halts the
        run, because the scripted world itself is broken at that point.
        """
        now = self._clock.now()
        if record.time != now or record.user != user:
            return False
        self._validate(record)
        self._records.append(record)
        self._latest_at[(user, record.time)] = record
        self._latest[user] = record
        return True

    def _validate(self, record: RealityRecord) -> None:
        tick = record.time
        user = record.user
        for peer, distance in record.dist.items():
            if distance < 0:
                raise ValidationHalt(tick, user, f"negative distance to {peer}")
            mirrored = self._latest_at.get((peer, tick))
            if mirrored is not None and user in mirrored.dist:
                other = mirrored.dist[user]
                if abs(distance - other) > self._rules.symmetry_tolerance * max(
                    distance, other
                ):
                    raise ValidationHalt(
                        tick, user, f"asymmetric distance to {peer}: {distance} vs {other}"
                    )
            previous = self._latest_at.get((user, tick - 1))
            if previous is not None and peer in previous.dist:
                if abs(distance - previous.dist[peer]) > self._rules.max_speed:
                    raise ValidationHalt(
                        tick, user, f"implausible speed toward {peer}"
                    )

    # -- reads ------------------------------------------------------------------

    def my_current_meas(
        self,
        caller: str,
        user: str,
        fields: tuple[str, ...],
        errfn: "ErrorFunction | None" = None,
    ) -> dict:
        privileged = caller in self._privileged
        if not privileged and caller != user:
            raise FieldDenied(f"{caller} may not read measurements of {user}")
        if SEC in fields and not privileged:
            raise FieldDenied("sensitive field requires a privileged caller")
        latest = self._latest.get(user)
        if latest is None:
            raise NoMeasurement(user)
        if errfn is not None:
            latest = errfn.apply(latest)
        view: dict = {}
        for name in fields:
            if name == DIST:
                view[DIST] = dict(latest.dist)
            elif name == TP:
                view[TP] = latest.tp
            elif name == INFECTED:
                view[INFECTED] = latest.infected
            elif name == SEC:
                view[SEC] = list(latest.sec)
            else:
                raise FieldDenied(f"unknown field {name}")
        return view

    def all_meas(self, caller: str, errfn: "ErrorFunction | None" = None) -> list[RealityRecord]:
        if caller not in self._privileged:
            raise AccessDenied(caller)
        if errfn is None:
            return list(self._records)
        return [errfn.apply(r) for r in self._records]

    def record_count(self) -> int:
        return len(self._records)


# --- allowable error functions -------------------------------------------------------

@dataclass(frozen=True)
class ErrorFunction:
    """Measurement-error transform; members of the allowable set only touch distances."""

    name: str
    transform: Callable[[RealityRecord], RealityRecord]

    def apply(self, record: RealityRecord) -> RealityRecord:
        return self.transform(record)


def identity_error() -> ErrorFunction:
    return ErrorFunction(name="identity", transform=lambda r: r)


def dist_noise_error(delta: float, rng: random.Random) -> ErrorFunction:
    """Uniform ±delta perturbation of every distance, clamped at zero."""

    def transform(record: RealityRecord) -> RealityRecord:
        noisy = {
            peer: max(0.0, d + rng.uniform(-delta, delta)) for peer, d in record.dist.items()
        }
        return RealityRecord(
            user=record.user,
            time=record.time,
            dist=noisy,
            tp=record.tp,
            infected=record.infected,
            sec=record.sec,
        )

    return ErrorFunction(name=f"dist-noise[{delta}]", transform=transform)


ALLOWED_ERROR_NAMES = ("identity", "dist-noise")


def build_error_function(
    name: str, rng: random.Random, delta: float = 1.0
) -> ErrorFunction | None:
    if name == "identity":
        return identity_error()
    if name == "dist-noise":
        return dist_noise_error(delta, rng)
    return None


# --- allowable faking functions --------------------------------------------------------

@dataclass(frozen=True)
class FakingFunction:
    """Reality-faking transform over a noisy view. Never touches sensitive data.

    Each instance captures the tick it was applied at, so replaying it over
    a refreshed view is well defined.
    """

    kind: str
    user: str
    tick: int
    distances: dict[str, float]

    def apply(self, records: list[RealityRecord]) -> list[RealityRecord]:
        out: list[RealityRecord] = []
        for record in records:
            if record.time != self.tick:
                out.append(record)
                continue
            if record.user == self.user:
                merged = dict(record.dist)
                merged.update(self.distances)
                out.append(_with_dist(record, merged))
            elif record.user in self.distances:
                merged = dict(record.dist)
                merged[self.user] = self.distances[record.user]
                out.append(_with_dist(record, merged))
            else:
                out.append(record)
        return out


def _with_dist(record: RealityRecord, dist: dict[str, float]) -> RealityRecord:
    return RealityRecord(
        user=record.user,
        time=record.time,
        dist=dist,
        tp=record.tp,
        infected=record.infected,
        sec=record.sec,
    )


ALLOWED_FAKE_KINDS = ("mark-distance", "move-user")


def build_faking_function(
    kind: str, user: str, tick: int, distances: dict[str, float]
) -> FakingFunction | None:
    """Members of the allowable set; anything else is silently not a member."""
    if kind not in ALLOWED_FAKE_KINDS:
        return None
    return FakingFunction(kind=kind, user=user, tick=tick, distances=dict(distances))


# --- leakage selectors --------------------------------------------------------------------

def leak_default(
    records: list[RealityRecord], active: list[str], shared: list[tuple[str, int]]
) -> dict:
    """Default projection: everything except sensitive payloads."""
    return {
        "active": list(active),
        "shared_exposure": [[user, tick] for user, tick in shared],
        "records": [
            {
                "user": r.user,
                "time": r.time,
                "dist": {k: float(v) for k, v in sorted(r.dist.items())},
                "tp": r.tp,
                "infected": r.infected,
            }
            for r in records
        ],
    }


def leak_full(
    records: list[RealityRecord], active: list[str], shared: list[tuple[str, int]]
) -> dict:
    """Test-only selector that also exposes sensitive histories."""
    view = leak_default(records, active, shared)
    for projected, record in zip(view["records"], records):
        projected["sec"] = [s.as_list() for s in record.sec]
    return view


LEAKAGE_SELECTORS: dict[str, Callable[..., dict]] = {
    "default": leak_default,
    "full": leak_full,
}
