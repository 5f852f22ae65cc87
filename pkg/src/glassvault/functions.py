"""Stateful-function framework and the multi-input aggregation compilers.

A function here maps (input bytes, state, randomness) to (output bytes,
new state). State is a plain dict restricted to canonically encodable
values so enclave memory snapshots serialize deterministically. The empty
dict is the canonical initial state.

Two compilers lift list functions into this class:

* ``agg_wrap``: fixed arity n; the first n-1 calls buffer the input and
  return the empty (pending) output, the n-th call evaluates and resets.
* ``aggs_wrap``: variable arity with a persistent inner state. The first
  call of each batch carries the batch size as an ASCII integer and is
  echoed back; the batch evaluates on the n-th data call, after which the
  size and buffered inputs are cleared while the inner state is kept.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Callable

from .encoding import CodecError, decode_int, decode_value, encode_int, encode_value
from .errors import FunctionReject, UnknownFunction

PENDING = b""

F0_DESCRIPTOR = b"\x00" * 32

StateDict = dict


def state_serialize(state: StateDict) -> bytes:
    """Canonical sorted-key snapshot of a function state."""
    return encode_value(state)


def state_deserialize(data: bytes) -> StateDict:
    value = decode_value(data)
    if not isinstance(value, dict):
        raise CodecError("state snapshot is not a map")
    return value


@dataclass(frozen=True)
class AggregatorOutput:
    """Decoded view of a compiler output: pending marker or a result."""

    value: bytes

    @property
    def is_pending(self) -> bool:
        return self.value == PENDING

    @property
    def result(self) -> bytes:
        if self.is_pending:
            raise ValueError("pending output has no result")
        return self.value


@dataclass(frozen=True)
class StatefulFunction:
    """A member of the evaluatable function class, with a canonical descriptor."""

    name: str
    params: dict
    evaluate: Callable[[bytes, StateDict, random.Random], tuple[bytes, StateDict]]
    descriptor: bytes = field(default=b"")

    def __post_init__(self) -> None:
        if not self.descriptor:
            object.__setattr__(self, "descriptor", compute_descriptor(self.name, self.params))


@dataclass(frozen=True)
class ListFunction:
    """Inner shape consumed by the compilers: ordered list of inputs in, one output out."""

    name: str
    params: dict
    evaluate: Callable[[list[bytes], StateDict, random.Random], tuple[bytes, StateDict]]


def compute_descriptor(name: str, params: dict) -> bytes:
    """32-byte wire/signing identifier; the leakage function owns the zero tag."""
    if name == "f0":
        return F0_DESCRIPTOR
    return hashlib.sha256(b"gv-fn-desc-v1:" + encode_value([name, params])).digest()


# --- the leakage function --------------------------------------------------------

def f0(x: bytes) -> int:
    """Natural leakage: the plaintext byte length."""
    return len(x)


def f0_function() -> StatefulFunction:
    def evaluate(x: bytes, state: StateDict, rng: random.Random) -> tuple[bytes, StateDict]:
        return encode_int(len(x)), state

    return StatefulFunction(name="f0", params={}, evaluate=evaluate, descriptor=F0_DESCRIPTOR)


# --- single-input built-ins --------------------------------------------------------

def byte_sum_function() -> StatefulFunction:
    """Sum of byte values of the input; stateless."""

    def evaluate(x: bytes, state: StateDict, rng: random.Random) -> tuple[bytes, StateDict]:
        return encode_int(sum(x)), {}

    return StatefulFunction(name="byte-sum", params={}, evaluate=evaluate)


def coin_flip_function() -> StatefulFunction:
    """Randomized test function exercising the randomness path; ignores its input."""

    def evaluate(x: bytes, state: StateDict, rng: random.Random) -> tuple[bytes, StateDict]:
        return encode_int(rng.getrandbits(1)), {}

    return StatefulFunction(name="coin-flip", params={}, evaluate=evaluate)


# --- list built-ins -----------------------------------------------------------------
#
# Batch functions must be total over arbitrary uploads: a garbage item is
# skipped individually rather than wedging the whole batch, since a raised
# rejection mid-batch would strand partial aggregator state.

def _parse_ints(items: list[bytes]) -> list[int]:
    values = []
    for item in items:
        try:
            values.append(decode_int(item))
        except CodecError:
            continue
    return values


def integer_sum_list() -> ListFunction:
    def evaluate(items, state, rng):
        return encode_int(sum(_parse_ints(items))), {}

    return ListFunction(name="integer-sum", params={}, evaluate=evaluate)


def byte_concat_length_list() -> ListFunction:
    def evaluate(items, state, rng):
        return encode_int(sum(len(item) for item in items)), {}

    return ListFunction(name="byte-concat-length", params={}, evaluate=evaluate)


def byte_sum_list() -> ListFunction:
    def evaluate(items, state, rng):
        return encode_int(sum(sum(item) for item in items)), {}

    return ListFunction(name="byte-sum", params={}, evaluate=evaluate)


def running_total_list() -> ListFunction:
    """Cumulative integer sum across batches; the canonical stateful inner function."""

    def evaluate(items, state, rng):
        total = int(state.get("total", 0)) + sum(_parse_ints(items))
        return encode_int(total), {"total": total}

    return ListFunction(name="running-total", params={}, evaluate=evaluate)


STATELESS_LIST_BUILTINS = ("integer-sum", "byte-concat-length", "byte-sum")

_LIST_FACTORIES: dict[str, Callable[..., ListFunction]] = {
    "integer-sum": integer_sum_list,
    "byte-concat-length": byte_concat_length_list,
    "byte-sum": byte_sum_list,
    "running-total": running_total_list,
}


def list_function(name: str, **params) -> ListFunction:
    """Look up a registered list function by name."""
    if name == "heatmap":
        from .heatmap import heatmap_list_function

        return heatmap_list_function(**params)
    factory = _LIST_FACTORIES.get(name)
    if factory is None:
        raise UnknownFunction(name)
    return factory(**params)


# --- compilers -----------------------------------------------------------------------

def agg_wrap(inner: ListFunction, n: int) -> StatefulFunction:
    """Fixed-arity aggregator over a stateless list function."""
    if n < 1:
        raise ValueError("arity must be at least 1")

    def evaluate(x: bytes, state: StateDict, rng: random.Random) -> tuple[bytes, StateDict]:
        buffered = list(state.get("inputs", []))
        if len(buffered) < n - 1:
            return PENDING, {"inputs": buffered + [x]}
        y, _ = inner.evaluate(buffered + [x], {}, rng)
        return y, {}

    return StatefulFunction(
        name="agg",
        params={"inner": inner.name, "inner_params": inner.params, "n": n},
        evaluate=evaluate,
    )


def aggs_wrap(inner: ListFunction) -> StatefulFunction:
    """Variable-arity aggregator that keeps the inner state across batches."""

    def finish(items: list[bytes], state: StateDict, rng: random.Random) -> tuple[bytes, StateDict]:
        y, inner_state = inner.evaluate(items, dict(state.get("inner", {})), rng)
        return y, ({"inner": inner_state} if inner_state else {})

    def evaluate(x: bytes, state: StateDict, rng: random.Random) -> tuple[bytes, StateDict]:
        if "n" not in state:
            try:
                n = decode_int(x)
            except CodecError as exc:
                raise FunctionReject(f"batch size is not an integer: {exc}") from exc
            if n < 0:
                raise FunctionReject("batch size is negative")
            if n == 0:
                return finish([], state, rng)
            carried = {"n": n, "inputs": []}
            if state.get("inner"):
                carried["inner"] = state["inner"]
            return encode_int(n), carried
        n = int(state["n"])
        buffered = list(state.get("inputs", [])) + [x]
        if len(buffered) < n:
            carried = {"n": n, "inputs": buffered}
            if state.get("inner"):
                carried["inner"] = state["inner"]
            return PENDING, carried
        return finish(buffered, state, rng)

    return StatefulFunction(
        name="aggs",
        params={"inner": inner.name, "inner_params": inner.params},
        evaluate=evaluate,
    )


# --- name resolution -------------------------------------------------------------------

def build_function(name: str, **params) -> StatefulFunction:
    """Build a single-input function by registered name."""
    if name == "f0":
        return f0_function()
    if name == "byte-sum":
        return byte_sum_function()
    if name == "coin-flip":
        return coin_flip_function()
    if name == "agg":
        inner = list_function(params.pop("inner"), **params.pop("inner_params", {}))
        return agg_wrap(inner, params.pop("n"))
    if name == "aggs":
        inner = list_function(params.pop("inner"), **params.pop("inner_params", {}))
        return aggs_wrap(inner)
    raise UnknownFunction(name)
