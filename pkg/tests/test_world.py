from __future__ import annotations

import json

import pytest

from glassvault.errors import (
    AccessDenied,
    FieldDenied,
    NoMeasurement,
    ValidationHalt,
)
from glassvault.world import (
    Clock,
    ErrorFunction,
    PhysicalReality,
    RealityRecord,
    SecSample,
    build_error_function,
    build_faking_function,
    leak_default,
)


def fresh_world() -> tuple[Clock, PhysicalReality]:
    clock = Clock()
    return clock, PhysicalReality(clock)


# --- clock -------------------------------------------------------------------------


def test_clock_starts_at_zero():
    clock = Clock()
    assert clock.now() == 0


def test_clock_increment_steps_by_one():
    clock = Clock()
    assert clock.increment() == 1
    assert clock.now() == 1


def test_clock_five_increments():
    clock = Clock()
    for _ in range(5):
        clock.increment()
    assert clock.now() == 5


# --- record ingestion ------------------------------------------------------------------


def test_current_record_with_sane_distances_accepted():
    _, world = fresh_world()
    assert world.submit("u1", RealityRecord(user="u1", time=0, dist={"u2": 3.0}))


def test_stale_timestamp_rejected():
    clock, world = fresh_world()
    clock.increment()
    assert not world.submit("u1", RealityRecord(user="u1", time=0))


def test_asymmetric_distances_halt_the_run():
    _, world = fresh_world()
    world.submit("u1", RealityRecord(user="u1", time=0, dist={"u2": 5.0}))
    with pytest.raises(ValidationHalt):
        world.submit("u2", RealityRecord(user="u2", time=0, dist={"u1": 500.0}))


def test_negative_distance_halts():
    _, world = fresh_world()
    with pytest.raises(ValidationHalt):
        world.submit("u1", RealityRecord(user="u1", time=0, dist={"u2": -1.0}))


def test_implausible_speed_halts():
    clock, world = fresh_world()
    world.submit("u1", RealityRecord(user="u1", time=0, dist={"u2": 1.0}))
    clock.increment()
    with pytest.raises(ValidationHalt):
        world.submit("u1", RealityRecord(user="u1", time=1, dist={"u2": 9999.0}))


# --- measurement reads ----------------------------------------------------------------------


def test_user_reads_own_infection_flag():
    _, world = fresh_world()
    world.submit("u1", RealityRecord(user="u1", time=0, infected=True))
    assert world.my_current_meas("u1", "u1", ("INFECTED",)) == {"INFECTED": True}


def test_plain_user_cannot_read_sensitive_field():
    _, world = fresh_world()
    world.submit("u1", RealityRecord(user="u1", time=0, sec=(SecSample(0, 0, 1),)))
    with pytest.raises(FieldDenied):
        world.my_current_meas("u1", "u1", ("SEC",))
    with pytest.raises(FieldDenied):
        world.my_current_meas("u2", "u1", ("INFECTED",))


def test_privileged_caller_reads_sensitive_history():
    _, world = fresh_world()
    samples = (SecSample(0, 0, 1), SecSample(0, 1, 2))
    world.submit("u1", RealityRecord(user="u1", time=0, sec=samples))
    view = world.my_current_meas("glass-vault", "u1", ("SEC",))
    assert view["SEC"] == list(samples)


def test_error_function_shifts_distances():
    _, world = fresh_world()
    world.submit("u1", RealityRecord(user="u1", time=0, dist={"u2": 3.0, "u3": 7.0}))
    shift = ErrorFunction(
        name="+1m",
        transform=lambda r: RealityRecord(
            user=r.user,
            time=r.time,
            dist={k: v + 1.0 for k, v in r.dist.items()},
            tp=r.tp,
            infected=r.infected,
            sec=r.sec,
        ),
    )
    view = world.my_current_meas("u1", "u1", ("DIST",), errfn=shift)
    assert view["DIST"] == {"u2": 4.0, "u3": 8.0}


def test_no_measurement_error():
    _, world = fresh_world()
    with pytest.raises(NoMeasurement):
        world.my_current_meas("u1", "u1", ("INFECTED",))


def test_all_meas_requires_privilege():
    _, world = fresh_world()
    world.submit("u1", RealityRecord(user="u1", time=0))
    assert len(world.all_meas("en")) == 1
    with pytest.raises(AccessDenied):
        world.all_meas("u1")


def test_all_meas_transform_does_not_touch_ground_truth():
    _, world = fresh_world()
    world.submit("u1", RealityRecord(user="u1", time=0, tp=5.0))
    zero_tp = ErrorFunction(
        name="zero-tp",
        transform=lambda r: RealityRecord(
            user=r.user, time=r.time, dist=dict(r.dist), tp=0.0, infected=r.infected, sec=r.sec
        ),
    )
    noisy = world.all_meas("en", zero_tp)
    assert noisy[0].tp == 0.0
    assert world.all_meas("en")[0].tp == 5.0


# --- faking functions ------------------------------------------------------------------------


def test_unknown_fake_kind_is_not_a_member():
    assert build_faking_function("teleport", "u1", 0, {}) is None


def test_mark_distance_rewrites_both_directions():
    records = [
        RealityRecord(user="u1", time=0, dist={"u2": 50.0}),
        RealityRecord(user="u2", time=0, dist={"u1": 50.0}),
        RealityRecord(user="u1", time=1, dist={"u2": 50.0}),
    ]
    fake = build_faking_function("mark-distance", "u1", 0, {"u2": 1.0})
    assert fake is not None
    out = fake.apply(records)
    assert out[0].dist["u2"] == 1.0
    assert out[1].dist["u1"] == 1.0
    assert out[2].dist["u2"] == 50.0  # other ticks untouched


def test_fakes_never_touch_sensitive_data():
    samples = (SecSample(0, 0, 3),)
    records = [RealityRecord(user="u1", time=0, dist={"u2": 9.0}, sec=samples)]
    fake = build_faking_function("move-user", "u1", 0, {"u2": 0.5})
    out = fake.apply(records)
    assert out[0].sec == samples
    assert out[0].dist["u2"] == 0.5


# --- leakage ------------------------------------------------------------------------------------


def test_default_leakage_contains_no_sensitive_bytes():
    samples = (SecSample(0, 0, 1), SecSample(0, 1, 2))
    records = [RealityRecord(user="u1", time=0, dist={"u2": 1.0}, sec=samples)]
    view = leak_default(records, ["u2"], [("u1", 0)])
    blob = json.dumps(view, sort_keys=True)
    assert "sec" not in blob.lower()
    assert view["records"][0]["user"] == "u1"
    assert view["active"] == ["u2"]


def test_error_function_registry():
    import random

    assert build_error_function("identity", random.Random(0)) is not None
    assert build_error_function("dist-noise", random.Random(0), delta=0.5) is not None
    assert build_error_function("bogus", random.Random(0)) is None
