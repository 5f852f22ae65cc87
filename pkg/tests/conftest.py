from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from glassvault.counters import OpCounters
from glassvault.randomness import StreamFactory
from glassvault.scenario import Scenario
from glassvault.steel import SteelStack

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=50,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def make_stack(seed: int = 1, **kwargs) -> SteelStack:
    counters = kwargs.pop("counters", OpCounters())
    return SteelStack("s", StreamFactory(seed), counters=counters, **kwargs)


@pytest.fixture
def stack() -> SteelStack:
    return make_stack()


def plaintext_heatmap_oracle(scenario: Scenario) -> list[list[int]]:
    """Naive recomputation of heatmap rows from ground-truth scenario data.

    Independent of the package's heatmap implementation: explicit per-user
    day tallies, explicit window arithmetic, explicit survival rule for
    aged contributions. Assumes every analyse in the scenario evaluates
    (registered analyst, threshold satisfied) and every share succeeds.
    """
    p = scenario.params
    samples: dict[str, dict[int, list[int]]] = {}
    shares: list[tuple[str, int]] = []  # (user, share day)
    analyse_days: list[int] = []
    for event in scenario.timeline:
        day = event.tick // p.ticks_per_day
        if event.op == "sample_sec":
            user = event.args["user"]
            cell = event.args["cell"]
            hours = int(event.args.get("hours", 1))
            per_day = samples.setdefault(user, {})
            row = per_day.setdefault(day, [0] * p.cells)
            row[cell] += hours
        elif event.op == "share":
            shares.append((event.args["user"], day))
        elif event.op == "analyse":
            analyse_days.append(day)

    def matrix_for(user: str, end_day: int) -> list[list[int]]:
        rows = []
        for day in range(end_day - p.days + 1, end_day + 1):
            row = list(samples.get(user, {}).get(day, [0] * p.cells))
            missing = 24 - sum(row)
            row[p.home_cell] += missing
            rows.append(row)
        return rows

    fed: list[tuple[int, list[list[int]]]] = []  # (analyse index fed at, matrix)
    consumed = 0
    rows_out = []
    for i, day in enumerate(analyse_days):
        while consumed < len(shares) and shares[consumed][1] <= day:
            user, share_day = shares[consumed]
            fed.append((i, matrix_for(user, share_day)))
            consumed += 1
        live = []
        for fed_at, matrix in fed:
            age = i - fed_at
            if age < p.days:
                live.append([matrix[r] for r in range(age, p.days)])
        y = [0] * p.cells
        if len(live) >= p.q:
            for rows in live:
                for row in rows:
                    for c, v in enumerate(row):
                        y[c] += v
        rows_out.append(y)
    return rows_out
