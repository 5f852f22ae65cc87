"""Scenario files: line-oriented JSON, one header line plus one event per line.

The header carries the schema version, the run seed, the parameter block,
and the declared party ids. Events are dispatched tick by tick; ticks
must be non-decreasing and every referenced pid must be declared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ScenarioError

SCHEMA_VERSION = 1

EVENT_OPS = {
    "move": ("user", "dist"),
    "sample_sec": ("user", "cell"),
    "infect": ("user",),
    "activate": ("user",),
    "remove": ("user",),
    "share": ("user",),
    "check": ("user",),
    "register": ("analyst", "alpha"),
    "accept": ("user", "alpha", "analyst"),
    "analyse": ("analyst", "alpha"),
    "corrupt": ("user",),
    "fake": ("kind", "user", "dist"),
    "leak": (),
}

DEFAULT_AF = ("heatmap", "running-total", "integer-sum", "byte-concat-length")


@dataclass(frozen=True)
class ScenarioParams:
    days: int = 3
    cells: int = 4
    q: int = 2
    d_max: float = 2.0
    tau: int = 3
    k_policy: str = "majority"
    k_value: int = 0
    ticks_per_day: int = 1
    home_cell: int = 0
    epsilon: str = "identity"
    noise_delta: float = 1.0
    leakage: str = "default"
    phi: tuple[str, ...] = ("mark-distance", "move-user")
    af: tuple[str, ...] = DEFAULT_AF

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioParams":
        known = {f: raw[f] for f in raw if f in cls.__dataclass_fields__}
        for field_name in ("af", "phi"):
            if field_name in known:
                known[field_name] = tuple(known[field_name])
        params = cls(**known)
        if params.days < 1 or params.cells < 1 or params.q < 1:
            raise ScenarioError("days, cells, and q must all be at least 1")
        if params.ticks_per_day < 1:
            raise ScenarioError("ticks_per_day must be at least 1")
        if params.k_policy not in ("majority", "const"):
            raise ScenarioError(f"unknown k_policy {params.k_policy!r}")
        return params

    def to_dict(self) -> dict:
        return {
            "days": self.days,
            "cells": self.cells,
            "q": self.q,
            "d_max": self.d_max,
            "tau": self.tau,
            "k_policy": self.k_policy,
            "k_value": self.k_value,
            "ticks_per_day": self.ticks_per_day,
            "home_cell": self.home_cell,
            "epsilon": self.epsilon,
            "noise_delta": self.noise_delta,
            "leakage": self.leakage,
            "phi": list(self.phi),
            "af": list(self.af),
        }


@dataclass(frozen=True)
class Event:
    tick: int
    op: str
    args: dict


@dataclass
class Scenario:
    seed: int
    params: ScenarioParams
    users: list[str]
    analysts: list[str]
    timeline: list[Event] = field(default_factory=list)

    def validate(self) -> None:
        declared = set(self.users) | set(self.analysts)
        last_tick = 0
        for i, event in enumerate(self.timeline):
            where = i + 2  # header is line 1
            if event.op not in EVENT_OPS:
                raise ScenarioError(f"unknown event op {event.op!r}", line=where)
            if event.tick < last_tick:
                raise ScenarioError(
                    f"tick {event.tick} decreases below {last_tick}", line=where
                )
            last_tick = event.tick
            for required in EVENT_OPS[event.op]:
                if required not in event.args:
                    raise ScenarioError(
                        f"event {event.op!r} missing field {required!r}", line=where
                    )
            for pid_field in ("user", "analyst"):
                pid = event.args.get(pid_field)
                if pid is not None and pid not in declared:
                    raise ScenarioError(f"undeclared pid {pid!r}", line=where)
            dist = event.args.get("dist")
            if dist is not None:
                for peer in dist:
                    if peer not in declared:
                        raise ScenarioError(f"undeclared pid {peer!r}", line=where)

    def to_jsonl(self) -> str:
        header = {
            "v": SCHEMA_VERSION,
            "seed": self.seed,
            "params": self.params.to_dict(),
            "users": self.users,
            "analysts": self.analysts,
        }
        lines = [json.dumps(header, sort_keys=True)]
        for event in self.timeline:
            row = {"tick": event.tick, "op": event.op}
            row.update(event.args)
            lines.append(json.dumps(row, sort_keys=True))
        return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> Scenario:
    lines = [line for line in text.splitlines()]
    if not lines or not lines[0].strip():
        raise ScenarioError("empty scenario file", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"header is not valid JSON: {exc}", line=1) from exc
    if not isinstance(header, dict):
        raise ScenarioError("header must be a JSON object", line=1)
    version = header.get("v")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema version {version!r}", line=1)
    if "seed" not in header or not isinstance(header["seed"], int):
        raise ScenarioError("header needs an integer seed", line=1)
    users = header.get("users") or []
    analysts = header.get("analysts") or []
    if not isinstance(users, list) or not isinstance(analysts, list):
        raise ScenarioError("users and analysts must be lists", line=1)
    params = ScenarioParams.from_dict(header.get("params") or {})

    timeline: list[Event] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"event is not valid JSON: {exc}", line=lineno) from exc
        if not isinstance(raw, dict) or "op" not in raw or "tick" not in raw:
            raise ScenarioError("event needs op and tick fields", line=lineno)
        tick = raw.pop("tick")
        op = raw.pop("op")
        if not isinstance(tick, int) or tick < 0:
            raise ScenarioError(f"bad tick {tick!r}", line=lineno)
        timeline.append(Event(tick=tick, op=op, args=raw))

    scenario = Scenario(
        seed=header["seed"], params=params, users=list(users), analysts=list(analysts),
        timeline=timeline,
    )
    scenario.validate()
    return scenario


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"no such file: {path}")
    return parse_scenario(path.read_text())


def bundled_scenario_text() -> str:
    """The packaged demo scenario (also shipped at scenarios/demo.jsonl)."""
    from importlib import resources

    return resources.files("glassvault").joinpath("data/demo.jsonl").read_text()


def load_bundled_scenario() -> Scenario:
    return parse_scenario(bundled_scenario_text())


# --- generators -----------------------------------------------------------------------

def make_demo_scenario(seed: int = 7) -> Scenario:
    """12 users, 3 days, 4 cells, 5 infected sharers, majority threshold.

    Day 0 and day 1 analyses run before any upload (zero rows via the
    contributor floor); all five uploads land on day 2 ahead of the final
    analyse, so the one nonzero row is fully conserved.
    """
    users = [f"u{i:02d}" for i in range(1, 13)]
    analysts = ["lab"]
    sharers = users[:5]
    events: list[Event] = []

    def ev(tick: int, op: str, **args) -> None:
        events.append(Event(tick=tick, op=op, args=args))

    for u in users:
        ev(0, "activate", user=u)
    # close contacts: u06 next to u01 all three days, u07 far away
    ev(0, "move", user="u06", dist={"u01": 1.0, "u07": 50.0})
    ev(0, "move", user="u07", dist={"u08": 10.0})
    for i, u in enumerate(sharers):
        ev(0, "infect", user=u)
        ev(0, "sample_sec", user=u, cell=i % 4, hours=3)
    ev(0, "register", analyst="lab", alpha="heatmap")
    ev(0, "analyse", analyst="lab", alpha="heatmap")

    ev(1, "move", user="u06", dist={"u01": 1.5})
    for i, u in enumerate(sharers):
        ev(1, "sample_sec", user=u, cell=(i + 1) % 4, hours=2)
    ev(1, "analyse", analyst="lab", alpha="heatmap")

    ev(2, "move", user="u06", dist={"u01": 1.2})
    for i, u in enumerate(sharers):
        ev(2, "sample_sec", user=u, cell=(i + 2) % 4, hours=4)
    for u in sharers:
        ev(2, "share", user=u)
    ev(2, "check", user="u06")
    ev(2, "check", user="u07")
    for u in sharers[:3]:
        ev(2, "accept", user=u, alpha="heatmap", analyst="lab")
    ev(2, "analyse", analyst="lab", alpha="heatmap")
    ev(2, "leak")

    return Scenario(
        seed=seed,
        params=ScenarioParams(),
        users=users,
        analysts=analysts,
        timeline=events,
    )


def make_eviction_scenario(seed: int = 11) -> Scenario:
    """Uploads on day 0, then `days` upload-free daily analyses: buffers drain."""
    users = [f"u{i:02d}" for i in range(1, 6)]
    analysts = ["lab"]
    events: list[Event] = []

    def ev(tick: int, op: str, **args) -> None:
        events.append(Event(tick=tick, op=op, args=args))

    for u in users:
        ev(0, "activate", user=u)
    for u in users[:3]:
        ev(0, "infect", user=u)
        ev(0, "sample_sec", user=u, cell=1, hours=5)
    ev(0, "register", analyst="lab", alpha="heatmap")
    for u in users[:3]:
        ev(0, "share", user=u)
    for u in users[:2]:
        ev(0, "accept", user=u, alpha="heatmap", analyst="lab")
    ev(0, "analyse", analyst="lab", alpha="heatmap")
    for day in (1, 2, 3):
        ev(day, "analyse", analyst="lab", alpha="heatmap")

    return Scenario(
        seed=seed,
        params=ScenarioParams(),
        users=users,
        analysts=analysts,
        timeline=events,
    )


def make_cost_scenario(n_users: int, seed: int = 23, sharers: int = 5) -> Scenario:
    """N activated users, a fixed number of sharers: per-user cost probe."""
    users = [f"u{i:03d}" for i in range(1, n_users + 1)]
    analysts = ["lab"]
    events: list[Event] = []

    def ev(tick: int, op: str, **args) -> None:
        events.append(Event(tick=tick, op=op, args=args))

    for u in users:
        ev(0, "activate", user=u)
    for u in users[:sharers]:
        ev(0, "infect", user=u)
        ev(0, "sample_sec", user=u, cell=0, hours=2)
    ev(0, "register", analyst="lab", alpha="heatmap")
    for u in users[:sharers]:
        ev(1, "share", user=u)
    for u in users[:sharers]:
        ev(1, "accept", user=u, alpha="heatmap", analyst="lab")
    ev(1, "analyse", analyst="lab", alpha="heatmap")

    return Scenario(
        seed=seed,
        params=ScenarioParams(),
        users=users,
        analysts=analysts,
        timeline=events,
    )
