"""Deterministic replay driver and the two-world comparison harnesses.

`run_scenario` replays a scenario tick by tick against the protocol
stack, the ideal analytics functionality, or both side by side with
matched seeds. In both-mode every operation's normalized outcome is
compared across the worlds and the first divergence is reported.

`random_fe_trace` / `run_fe_trace` are the lower-level harness for the
functional-encryption layer alone: random operation traces executed
against the enclave protocol and its ideal-functionality oracle.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field

from .counters import OpCounters
from .encoding import CodecError, decode_int, decode_value, encode_int
from .errors import (
    EncryptFailed,
    NoSuchHandle,
    NotSetUp,
    PolicyUnsatisfied,
    AlreadySetup,
)
from .exposure import (
    ERROR,
    GATED,
    ExposureAnalyticsIdeal,
    GlassVault,
    RiskParams,
    ThresholdPolicy,
    build_af,
)
from .functions import (
    StatefulFunction,
    agg_wrap,
    aggs_wrap,
    byte_sum_function,
    coin_flip_function,
    f0_function,
    list_function,
)
from .ideal import DdFesr
from .randomness import StreamFactory
from .scenario import Event, Scenario
from .steel import SteelStack
from .world import Clock, PhysicalReality, RealityRecord, SecSample, build_faking_function

logger = logging.getLogger(__name__)

MODES = ("protocol", "ideal", "both")

STATE_OPS = ("move", "infect", "sample_sec")
ADVERSARY_OPS = ("corrupt", "fake", "leak")


@dataclass
class Transcript:
    mode: str
    events: list[dict] = field(default_factory=list)
    heatmap_rows: list[dict] = field(default_factory=list)
    risk_rows: list[dict] = field(default_factory=list)
    opcount_rows: list[dict] = field(default_factory=list)
    equivalence: str | None = None
    divergence: dict | None = None


@dataclass
class _Shadow:
    """Carry-forward device state for one user between records."""

    dists: dict[str, float] = field(default_factory=dict)
    tp: float = 1.0
    infected: bool | None = None
    samples: list[SecSample] = field(default_factory=list)
    day_counts: dict[int, int] = field(default_factory=dict)


class ScenarioDriver:
    def __init__(self, scenario: Scenario, mode: str):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.scenario = scenario
        self.mode = mode
        self.clock = Clock()
        self.world = PhysicalReality(self.clock)
        self.shadows: dict[str, _Shadow] = {u: _Shadow() for u in scenario.users}
        p = scenario.params
        self.risk = RiskParams(d_max=p.d_max, tau=p.tau)
        self.policy = ThresholdPolicy(kind=p.k_policy, value=p.k_value)
        heatmap_params = {
            "cells": p.cells,
            "min_users": p.q,
            "days": p.days,
            "home_cell": p.home_cell,
        }

        self.counters = OpCounters()
        self.protocol: GlassVault | None = None
        self.ideal: ExposureAnalyticsIdeal | None = None
        if mode in ("protocol", "both"):
            streams = StreamFactory(scenario.seed)
            steel = SteelStack("run", streams, counters=self.counters)
            self.protocol = GlassVault(
                self.world,
                self.clock,
                steel,
                af=build_af(list(p.af), heatmap_params),
                policy=self.policy,
                streams=streams,
                ticks_per_day=p.ticks_per_day,
                risk=self.risk,
                noise_delta=p.noise_delta,
                leakage=p.leakage,
            )
            self.protocol.setup(p.epsilon)
        if mode in ("ideal", "both"):
            streams = StreamFactory(scenario.seed)
            self.ideal = ExposureAnalyticsIdeal(
                self.world,
                self.clock,
                af=build_af(list(p.af), heatmap_params),
                policy=self.policy,
                streams=streams,
                ticks_per_day=p.ticks_per_day,
                risk=self.risk,
                noise_delta=p.noise_delta,
                leakage=p.leakage,
            )
            self.ideal.setup(p.epsilon)

    # -- world bookkeeping -------------------------------------------------------

    def _submit(self, user: str) -> None:
        shadow = self.shadows[user]
        record = RealityRecord(
            user=user,
            time=self.clock.now(),
            dist=dict(shadow.dists),
            tp=shadow.tp,
            infected=shadow.infected,
            sec=tuple(shadow.samples),
        )
        self.world.submit(user, record)

    def _submit_all(self) -> None:
        for user in self.scenario.users:
            self._submit(user)

    def _apply_state_event(self, event: Event) -> None:
        """Fold a world event into the device shadows; records are submitted per tick."""
        user = event.args["user"]
        shadow = self.shadows[user]
        if event.op == "move":
            dists = {peer: float(d) for peer, d in event.args["dist"].items()}
            shadow.dists.update(dists)
            for peer, d in dists.items():
                if peer in self.shadows:
                    self.shadows[peer].dists[user] = d
        elif event.op == "infect":
            shadow.infected = True
        elif event.op == "sample_sec":
            day = self.clock.now() // self.scenario.params.ticks_per_day
            hours = int(event.args.get("hours", 1))
            for _ in range(hours):
                hour = shadow.day_counts.get(day, 0)
                shadow.day_counts[day] = hour + 1
                shadow.samples.append(
                    SecSample(day=day, hour=hour, cell=int(event.args["cell"]))
                )

    # -- dispatch --------------------------------------------------------------------

    def _dispatch(self, stack: GlassVault | ExposureAnalyticsIdeal, event: Event) -> object:
        op, args = event.op, event.args
        if op == "activate":
            stack.activate(args["user"])
            return "ok"
        if op == "remove":
            stack.remove(args["user"])
            return "ok"
        if op == "share":
            tick = stack.share(args["user"])
            return {"shared_at": tick} if tick is not None else ERROR
        if op == "check":
            score = stack.check(args["user"])
            return {"score": score} if score is not None else ERROR
        if op == "register":
            requests = stack.register_analyst(args["analyst"], args["alpha"])
            return {"requests": requests} if requests is not None else ERROR
        if op == "accept":
            ok = stack.accept(args["user"], args["alpha"], args["analyst"])
            return "ok" if ok else "rejected"
        if op == "analyse":
            status, value = stack.analyse(args["analyst"], args["alpha"])
            if status != "ok":
                return status
            return {"value": _decode_output(value)}
        if op == "corrupt":
            return stack.corrupt(args["user"])
        if op == "fake":
            fake = None
            if args["kind"] in self.scenario.params.phi:  # scenario-scoped allowable set
                fake = build_faking_function(
                    args["kind"],
                    args["user"],
                    self.clock.now(),
                    {k: float(v) for k, v in args["dist"].items()},
                )
            return "ok" if stack.fake(fake) else "ignored"
        if op == "leak":
            view = stack.leak()
            blob = json.dumps(view, sort_keys=True).encode()
            return {"sha256": hashlib.sha256(blob).hexdigest(), "bytes": len(blob)}
        raise ValueError(f"unhandled op {op!r}")

    def run(self) -> Transcript:
        """Replay tick by tick: fold world events, feed records, dispatch actions."""
        transcript = Transcript(mode=self.mode)
        by_tick: dict[int, list[Event]] = {}
        for event in self.scenario.timeline:
            by_tick.setdefault(event.tick, []).append(event)
        max_tick = max(by_tick) if by_tick else 0

        diverged = False
        for tick in range(max_tick + 1):
            if tick > 0:
                self.clock.increment()
            events = by_tick.get(tick, [])
            for event in events:
                if event.op in STATE_OPS:
                    self._apply_state_event(event)
                    transcript.events.append(
                        {
                            "tick": tick,
                            "actor": event.args["user"],
                            "op": event.op,
                            "outcome": "ok",
                        }
                    )
            self._submit_all()
            for event in events:
                if event.op in STATE_OPS:
                    continue
                if diverged:
                    break
                if event.op in ADVERSARY_OPS:
                    actor = "adv"
                else:
                    actor = event.args.get("user") or event.args.get("analyst") or "env"
                before = self.counters.snapshot()
                outcome: object = None
                if self.protocol is not None:
                    outcome = self._dispatch(self.protocol, event)
                if self.ideal is not None:
                    ideal_outcome = self._dispatch(self.ideal, event)
                    if self.protocol is None:
                        outcome = ideal_outcome
                    elif ideal_outcome != outcome:
                        transcript.equivalence = "divergent"
                        transcript.divergence = {
                            "tick": tick,
                            "actor": actor,
                            "op": event.op,
                            "protocol": outcome,
                            "ideal": ideal_outcome,
                        }
                        diverged = True
                entry = {"tick": tick, "actor": actor, "op": event.op, "outcome": outcome}
                transcript.events.append(entry)
                transcript.opcount_rows.append(
                    {"tick": tick, "actor": actor, "op": event.op, **self.counters.delta(before)}
                )
                self._collect_outputs(transcript, event, actor, outcome)
            if diverged:
                break
        if self.mode == "both" and not diverged:
            transcript.equivalence = "equivalent"
        return transcript

    def _collect_outputs(
        self, transcript: Transcript, event: Event, actor: str, outcome: object
    ) -> None:
        if event.op == "check" and isinstance(outcome, dict) and "score" in outcome:
            transcript.risk_rows.append(
                {"tick": event.tick, "user": event.args["user"], "score": outcome["score"]}
            )
        if (
            event.op == "analyse"
            and isinstance(outcome, dict)
            and isinstance(outcome.get("value"), list)
            and len(outcome["value"]) == self.scenario.params.cells
        ):
            transcript.heatmap_rows.append(
                {
                    "tick": event.tick,
                    "analyst": event.args["analyst"],
                    "alpha": event.args["alpha"],
                    "cells": list(outcome["value"]),
                }
            )


def _decode_output(value: bytes | None) -> object:
    if value is None:
        return None
    try:
        return decode_value(value)
    except CodecError:
        pass
    try:
        return decode_int(value)
    except CodecError:
        return value.hex()


def run_scenario(scenario: Scenario, mode: str = "protocol") -> Transcript:
    return ScenarioDriver(scenario, mode).run()


# --- FE-layer randomized trace harness ----------------------------------------------------

def trace_functions() -> list[StatefulFunction]:
    """Function pool exercised by random traces: stateless, stateful, randomized."""
    return [
        f0_function(),
        byte_sum_function(),
        coin_flip_function(),
        agg_wrap(list_function("integer-sum"), 2),
        agg_wrap(list_function("byte-concat-length"), 3),
        aggs_wrap(list_function("running-total")),
    ]


def random_fe_trace(seed: int, max_parties: int = 6, max_ops: int = 30) -> list[dict]:
    rng = random.Random(seed)
    n_enc = rng.randint(1, max(1, max_parties - 3))
    n_dec = rng.randint(1, max(1, max_parties - n_enc - 1))
    encryptors = [f"A{i}" for i in range(1, n_enc + 1)]
    decryptors = [f"B{i}" for i in range(1, n_dec + 1)]
    fn_count = len(trace_functions())
    ops: list[dict] = []
    # warm start so later operations have material to work with
    ops.append({"op": "setup", "party": encryptors[0], "role": "A"})
    ops.append({"op": "setup", "party": decryptors[0], "role": "B"})
    target = rng.randint(6, max_ops)
    while len(ops) < target:
        choice = rng.random()
        if choice < 0.15:
            party = rng.choice(encryptors + decryptors)
            role = "A" if party.startswith("A") else "B"
            ops.append({"op": "setup", "party": party, "role": role})
        elif choice < 0.40:
            wrong_roles = rng.random() < 0.1  # both worlds must refuse these
            ops.append(
                {
                    "op": "keysharegen",
                    "party": rng.choice(decryptors if wrong_roles else encryptors),
                    "fn": rng.randrange(fn_count),
                    "to": rng.choice(encryptors if wrong_roles else decryptors),
                }
            )
        elif choice < 0.68:
            message = (
                encode_int(rng.randint(0, 999))
                if rng.random() < 0.6
                else rng.randbytes(rng.randint(0, 32))
            )
            ops.append(
                {
                    "op": "encrypt",
                    "party": rng.choice(encryptors + decryptors),
                    "message": message.hex(),
                    "k": rng.randint(0, 3),
                }
            )
        else:
            wrong_role = rng.random() < 0.08
            ops.append(
                {
                    "op": "decrypt",
                    "party": rng.choice(encryptors if wrong_role else decryptors),
                    "fn": rng.randrange(fn_count),
                    "handle": rng.randint(1, 6),
                }
            )
    return ops


def run_fe_trace(ops: list[dict], seed: int) -> dict:
    """Execute one trace against both worlds; report the observable sequences."""
    functions = trace_functions()
    steel = SteelStack("trace", StreamFactory(seed))
    oracle = DdFesr(StreamFactory(seed))
    for fn in functions:
        oracle.register_function(fn)

    steel_results: list[tuple[str, str, object]] = []
    oracle_results: list[tuple[str, str, object]] = []

    for op in ops:
        name = op["op"]
        party = op["party"]
        if name == "setup":
            steel_results.append((party, name, _norm_setup(_steel_setup, steel, party, op["role"])))
            oracle_results.append((party, name, _norm_setup(_oracle_setup, oracle, party, op["role"])))
        elif name == "keysharegen":
            fn = functions[op["fn"]]
            steel_results.append(
                (party, name, steel.keysharegen(party, fn, op["to"]))
            )
            oracle_results.append(
                (party, name, oracle.keysharegen(party, fn, op["to"]))
            )
        elif name == "encrypt":
            message = bytes.fromhex(op["message"])
            steel_results.append((party, name, _steel_encrypt(steel, party, message, op["k"])))
            oracle_results.append((party, name, oracle.encrypt(party, message, op["k"])))
        elif name == "decrypt":
            fn = functions[op["fn"]]
            steel_results.append(
                (party, name, _norm_bytes(_steel_decrypt(steel, party, fn, op["handle"])))
            )
            oracle_results.append(
                (party, name, _norm_bytes(oracle.decrypt(party, fn, op["handle"])))
            )
    divergence = None
    for i, (left, right) in enumerate(zip(steel_results, oracle_results)):
        if left != right:
            divergence = {"index": i, "protocol": left, "ideal": right}
            break
    return {
        "protocol": steel_results,
        "ideal": oracle_results,
        "equal": divergence is None,
        "divergence": divergence,
    }


def _norm_setup(fn, stack, party: str, role: str) -> str:
    try:
        fn(stack, party, role)
        return "ok"
    except AlreadySetup:
        return "already"


def _steel_setup(stack: SteelStack, party: str, role: str) -> None:
    stack.setup_party(party, role)


def _oracle_setup(oracle: DdFesr, party: str, role: str) -> None:
    oracle.setup(party, role)


def _steel_encrypt(stack: SteelStack, party: str, message: bytes, k: int) -> int | None:
    try:
        return stack.encrypt(party, message, k)
    except (NotSetUp, EncryptFailed):
        return None


def _steel_decrypt(stack: SteelStack, party: str, fn, handle: int) -> bytes | None:
    try:
        return stack.decrypt(party, fn, handle)
    except (NotSetUp, PolicyUnsatisfied, NoSuchHandle):
        return None


def _norm_bytes(value: bytes | None) -> str | None:
    return None if value is None else value.hex()
