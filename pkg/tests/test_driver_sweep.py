"""Randomized scenario sweep: the two worlds must agree on every outcome.

The generator biases toward the deep path (infections, shares, consents,
released analyses) while keeping a chaos share of error paths: healthy
shares, premature accepts, unregistered analyses, corruptions, fakes.
"""

from __future__ import annotations

import random
from collections import Counter

import pytest

from glassvault.driver import run_scenario
from glassvault.scenario import Event, Scenario, ScenarioParams

ALPHAS = ["heatmap", "running-total", "integer-sum"]


def make_random_scenario(seed: int) -> Scenario:
    rng = random.Random(seed)
    n_users = rng.randint(4, 8)
    users = [f"u{i}" for i in range(n_users)]
    analysts = ["lab1", "lab2"][: rng.randint(1, 2)]
    events: list[Event] = []
    infected: list[str] = []
    shared: set[str] = set()

    def ev(tick: int, op: str, **args) -> None:
        events.append(Event(tick=tick, op=op, args=args))

    for u in users:
        if rng.random() < 0.9:
            ev(0, "activate", user=u)
    for u in users:
        if rng.random() < 0.5:
            ev(0, "infect", user=u)
            infected.append(u)
    for analyst in analysts:
        ev(0, "register", analyst=analyst, alpha=rng.choice(ALPHAS))

    max_tick = rng.randint(3, 6)
    for tick in range(max_tick + 1):
        for _ in range(rng.randint(1, 5)):
            roll = rng.random()
            u = rng.choice(users)
            peer = rng.choice([p for p in users if p != u])
            if roll < 0.10:
                ev(tick, "move", user=u, dist={peer: round(rng.uniform(0.5, 60.0), 1)})
            elif roll < 0.22:
                ev(tick, "sample_sec", user=u, cell=rng.randrange(4), hours=rng.randint(1, 4))
            elif roll < 0.42:
                pick = rng.choice(infected) if infected and rng.random() < 0.8 else u
                ev(tick, "share", user=pick)
                shared.add(pick)
            elif roll < 0.62:
                pick = rng.choice(sorted(shared)) if shared and rng.random() < 0.8 else u
                ev(tick, "accept", user=pick, alpha=rng.choice(ALPHAS), analyst=rng.choice(analysts))
            elif roll < 0.78:
                ev(tick, "analyse", analyst=rng.choice(analysts), alpha=rng.choice(ALPHAS))
            elif roll < 0.84:
                ev(tick, "check", user=u)
            elif roll < 0.88:
                ev(tick, "corrupt", user=u)
            elif roll < 0.92:
                ev(
                    tick,
                    "fake",
                    kind=rng.choice(["mark-distance", "move-user", "teleport"]),
                    user=u,
                    dist={peer: round(rng.uniform(0.5, 30.0), 1)},
                )
            elif roll < 0.95:
                ev(tick, "leak")
            elif roll < 0.97:
                ev(tick, "infect", user=u)
                infected.append(u)
            elif roll < 0.99:
                ev(tick, "register", analyst=rng.choice(analysts), alpha=rng.choice(ALPHAS))
            else:
                ev(tick, "remove", user=u)

    return Scenario(
        seed=seed,
        params=ScenarioParams(),
        users=users,
        analysts=["lab1", "lab2"],
        timeline=events,
    )


@pytest.mark.parametrize("seed", range(25))
def test_random_scenarios_are_equivalent_across_worlds(seed):
    scenario = make_random_scenario(seed)
    transcript = run_scenario(scenario, mode="both")
    assert transcript.equivalence == "equivalent", transcript.divergence


def test_sweep_exercises_the_deep_paths():
    tally: Counter[str] = Counter()
    for seed in range(25):
        transcript = run_scenario(make_random_scenario(seed), mode="both")
        for entry in transcript.events:
            op, outcome = entry["op"], entry["outcome"]
            if op in ("share", "analyse", "accept"):
                kind = "ok" if isinstance(outcome, dict) else str(outcome)
                tally[f"{op}_{kind}"] += 1
    # both the success paths and the guarded/error paths must be represented
    for key in ("share_ok", "share_error", "analyse_ok", "analyse_gated", "accept_ok"):
        assert tally[key] > 0, (key, dict(tally))


def test_noisy_measurements_stay_aligned_across_worlds():
    # distance noise draws from per-world streams with the same seed; any
    # drift in refresh counts between the worlds would desynchronize them
    for seed in (3, 11):
        base = make_random_scenario(seed)
        noisy = Scenario(
            seed=base.seed,
            params=ScenarioParams(epsilon="dist-noise", noise_delta=2.0),
            users=base.users,
            analysts=base.analysts,
            timeline=base.timeline,
        )
        transcript = run_scenario(noisy, mode="both")
        assert transcript.equivalence == "equivalent", transcript.divergence


def make_oracle_friendly_scenario(seed: int) -> Scenario:
    """Random uploads and daily analyses with a zero threshold policy, so
    every analyse evaluates and the plaintext oracle's assumptions hold."""
    rng = random.Random(seed)
    params = ScenarioParams(
        days=rng.randint(1, 4),
        cells=rng.randint(2, 5),
        q=rng.randint(1, 3),
        k_policy="const",
        k_value=0,
    )
    n_users = rng.randint(3, 7)
    users = [f"u{i}" for i in range(n_users)]
    events: list[Event] = []

    def ev(tick: int, op: str, **args) -> None:
        events.append(Event(tick=tick, op=op, args=args))

    max_day = rng.randint(2, 5)
    share_days = {u: rng.randint(0, max_day) for u in users if rng.random() < 0.8}
    for u in users:
        ev(0, "activate", user=u)
        if u in share_days:
            ev(0, "infect", user=u)
    ev(0, "register", analyst="lab", alpha="heatmap")
    for day in range(max_day + 1):
        for u in users:
            if rng.random() < 0.6 and day <= share_days.get(u, -1):
                ev(day, "sample_sec", user=u, cell=rng.randrange(params.cells),
                   hours=rng.randint(1, 6))
        for u, share_day in sorted(share_days.items()):
            if share_day == day:
                ev(day, "share", user=u)
        ev(day, "analyse", analyst="lab", alpha="heatmap")

    return Scenario(seed=seed, params=params, users=users, analysts=["lab"],
                    timeline=events)


@pytest.mark.parametrize("seed", range(12))
def test_random_scenarios_match_the_plaintext_heatmap_oracle(seed):
    from conftest import plaintext_heatmap_oracle

    scenario = make_oracle_friendly_scenario(seed)
    transcript = run_scenario(scenario, mode="both")
    assert transcript.equivalence == "equivalent", transcript.divergence
    got = [row["cells"] for row in transcript.heatmap_rows]
    assert got == plaintext_heatmap_oracle(scenario)
