"""Daily infection-heatmap aggregate over a sliding window of day buffers.

Each contributor supplies a (days x cells) matrix of hours-per-cell,
oldest day first, every row summing to 24. The function keeps one
fixed-capacity circular buffer per contributor; every call ages existing
buffers by one day (a zero row evicts the oldest day) and drops fully
zeroed buffers, so a contribution fades out after `days` calls. The
output is the cell-wise sum over all live buffers, released only when at
least `min_users` buffers are live.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .encoding import CodecError, decode_value, encode_value
from .errors import EncodeFailed, FunctionReject
from .functions import ListFunction
from .world import SecSample

UserMatrix = list[list[int]]

HOURS_PER_DAY = 24


@dataclass(frozen=True)
class HeatmapParams:
    cells: int
    min_users: int
    days: int
    home_cell: int = 0
    strict: bool = False

    def __post_init__(self) -> None:
        if self.cells < 1 or self.min_users < 1 or self.days < 1:
            raise ValueError("cells, min_users, and days must all be at least 1")
        if not 0 <= self.home_cell < self.cells:
            raise ValueError("home cell out of range")


def heatmap_wellformed(matrix: UserMatrix) -> bool:
    """True iff every row sums to exactly one day of hours."""
    return all(sum(row) == HOURS_PER_DAY for row in matrix)


def _matrix_valid(matrix: object, params: HeatmapParams) -> bool:
    if not isinstance(matrix, list) or len(matrix) != params.days:
        return False
    for row in matrix:
        if not isinstance(row, list) or len(row) != params.cells:
            return False
        if any(not isinstance(v, int) or isinstance(v, bool) or v < 0 for v in row):
            return False
    return heatmap_wellformed(matrix)


def heatmap_step(
    x: list[UserMatrix], state: dict, params: HeatmapParams
) -> tuple[list[int], dict, list[int]]:
    """One daily step. Returns (output vector, new state, rejected input indices).

    Inputs are classified before any mutation, so a malformed matrix can
    reject individually without leaving half-aged state behind. In strict
    mode a malformed matrix rejects the whole call instead.
    """
    rejects = [i for i, matrix in enumerate(x) if not _matrix_valid(matrix, params)]
    if rejects and params.strict:
        raise FunctionReject(f"malformed matrices at indices {rejects}")
    valid = [matrix for i, matrix in enumerate(x) if i not in set(rejects)]

    zero_row = [0] * params.cells
    buffers: list[list[list[int]]] = []
    for buffer in state.get("buffers", []):
        aged = [list(row) for row in buffer]
        aged.append(list(zero_row))
        if len(aged) > params.days:
            aged = aged[len(aged) - params.days:]
        if any(any(v for v in row) for row in aged):
            buffers.append(aged)

    for matrix in valid:
        buffer = [list(row) for row in matrix[-params.days:]]
        buffers.append(buffer)

    y = [0] * params.cells
    if len(buffers) >= params.min_users:
        for buffer in buffers:
            for row in buffer:
                for c, v in enumerate(row):
                    y[c] += v

    new_state = {"buffers": buffers} if buffers else {}
    return y, new_state, rejects


def buffer_count(state: dict) -> int:
    return len(state.get("buffers", []))


# --- sensitive-history encoding ------------------------------------------------------

def encode_sec_history(
    samples: list[SecSample], params: HeatmapParams, end_day: int
) -> UserMatrix:
    """Turn day-stamped hourly samples into a well-formed user matrix.

    Row 0 covers the oldest day of the window ending at `end_day`; hours
    with no sample are assigned to the configured home cell so every row
    sums to a full day.
    """
    start_day = end_day - params.days + 1
    counts: dict[int, list[int]] = {d: [0] * params.cells for d in range(start_day, end_day + 1)}
    for sample in samples:
        if not 0 <= sample.cell < params.cells:
            raise EncodeFailed(f"cell {sample.cell} out of range 0..{params.cells - 1}")
        if sample.day not in counts:
            raise EncodeFailed(
                f"sample day {sample.day} outside window {start_day}..{end_day}"
            )
        counts[sample.day][sample.cell] += 1
    matrix: UserMatrix = []
    for day in range(start_day, end_day + 1):
        row = counts[day]
        missing = HOURS_PER_DAY - sum(row)
        if missing > 0:
            row[params.home_cell] += missing
        matrix.append(row)
    return matrix


def window_filter(samples: list[SecSample], end_day: int, days: int) -> list[SecSample]:
    start_day = end_day - days + 1
    return [s for s in samples if start_day <= s.day <= end_day]


def build_sec_payload(samples: list[SecSample], end_day: int) -> bytes:
    """Wire form of one user's sensitive upload: the window anchor plus samples."""
    return encode_value(
        {"end_day": end_day, "samples": [s.as_list() for s in samples]}
    )


def parse_sec_payload(payload: bytes) -> tuple[list[SecSample], int]:
    value = decode_value(payload)
    if not isinstance(value, dict) or "end_day" not in value or "samples" not in value:
        raise CodecError("not a sensitive-history payload")
    samples = [SecSample(day=s[0], hour=s[1], cell=s[2]) for s in value["samples"]]
    return samples, int(value["end_day"])


# --- aggregator-facing function ----------------------------------------------------------

def heatmap_list_function(
    cells: int,
    min_users: int,
    days: int,
    home_cell: int = 0,
    strict: bool = False,
) -> ListFunction:
    """Heatmap as a batch function over sensitive-history payloads."""
    params = HeatmapParams(
        cells=cells, min_users=min_users, days=days, home_cell=home_cell, strict=strict
    )

    def evaluate(items: list[bytes], state: dict, rng: random.Random) -> tuple[bytes, dict]:
        matrices: list[UserMatrix] = []
        for item in items:
            try:
                samples, end_day = parse_sec_payload(item)
                matrices.append(
                    encode_sec_history(window_filter(samples, end_day, days), params, end_day)
                )
            except (CodecError, EncodeFailed):
                if strict:
                    raise FunctionReject("undecodable sensitive payload") from None
                matrices.append([])  # fails matrix validation, rejected individually
        y, new_state, _rejects = heatmap_step(matrices, state, params)
        return encode_value(y), new_state

    return ListFunction(
        name="heatmap",
        params={
            "cells": cells,
            "min_users": min_users,
            "days": days,
            "home_cell": home_cell,
            "strict": strict,
        },
        evaluate=evaluate,
    )
