from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orules.engine import DrawStream, EnsembleRunner, Stepper, simulate, with_dt
from orules.errors import InvalidValue, NonTermination
from orules.scenario import FIXTURES, fixture
from orules.state import contains_ready


@settings(max_examples=40)
@given(st.integers(0, 2**32), st.lists(st.integers(0, 5000), min_size=1, max_size=8))
def test_draw_stream_blocks_equal_sequential(seed, sizes):
    a, b = DrawStream(seed), DrawStream(seed)
    for n in sizes:
        block = a.peek(n).copy()
        a.skip(n)
        single = np.array([b.random() for _ in range(n)])
        assert np.array_equal(block, single)
    assert a.drawn == b.drawn


def test_draw_stream_matches_numpy():
    s = DrawStream(42)
    ref = np.random.default_rng(42).random(10)
    assert [s.random() for _ in range(10)] == list(ref)


@pytest.mark.parametrize("name", FIXTURES)
def test_fast_path_equals_reference(name):
    sc = fixture(name)
    runner = EnsembleRunner(sc)
    for seed in range(6):
        assert runner.run(seed) == simulate(sc, seed)


@pytest.mark.parametrize("name", ["cat_v1", "cat_v2_observer"])
def test_fast_path_equals_reference_flags(name):
    sc = fixture(name)
    for kw in ({"prune": False}, {"strict": True}):
        runner = EnsembleRunner(sc, **kw)
        for seed in range(4):
            assert runner.run(seed) == simulate(sc, seed, **kw)


def test_records_are_deterministic():
    sc = fixture("cat_v2_observer")
    assert simulate(sc, 9) == simulate(sc, 9)


@pytest.mark.parametrize("name", FIXTURES)
def test_terminal_state_has_no_ready_brains(name):
    sc = fixture(name)
    runner = EnsembleRunner(sc)
    for seed in range(10):
        rec = runner.run(seed)
        assert rec.terminal
        assert not any(contains_ready(c) for c in rec.terminal)
        assert rec.end_time <= sc.params.half_life + 3 * sc.params.transit_time + 1.0


def test_cat_v1_outcomes():
    sc = fixture("cat_v1")
    runner = EnsembleRunner(sc)
    labels = {runner.run(s).terminal_label for s in range(40)}
    assert labels == {"d1 M(af) U", "d0 M(a0) C0"}


def test_cat_v1_hit_path_runs_to_unconscious():
    sc = fixture("cat_v1")
    rec = next(r for r in map(lambda s: simulate(sc, s), range(20)) if r.hits)
    assert rec.terminal_label == "d1 M(af) U"
    assert rec.terminal_weights == (1.0,)
    assert rec.hit_time < sc.params.half_life
    kinds = [e.kind for e in rec.log]
    assert kinds.index("hit") + 1 == kinds.index("reduce")


def test_cat_v1_miss_path_keeps_cat_awake():
    sc = fixture("cat_v1")
    rec = next(r for r in map(lambda s: simulate(sc, s), range(20)) if not r.hits)
    assert rec.terminal_label == "d0 M(a0) C0"
    assert rec.terminal_weights[0] == pytest.approx(0.5, abs=1e-9)
    assert any(e.kind == "prune" for e in rec.log)


def test_apparatus_has_no_hits():
    rec = simulate(fixture("apparatus"), 0)
    assert rec.hits == ()
    assert rec.terminal_label == "d0 M(a0) i0 + d1 M(af) i1"


def test_no_cutoff_never_terminates():
    sc = fixture("apparatus")
    with pytest.raises(NonTermination):
        simulate(sc, 0, params=replace(sc.params, cutoff=False))


def test_max_time_stops_early():
    sc = fixture("apparatus")
    rec = simulate(sc, 0, params=replace(sc.params, cutoff=False), max_time=0.5)
    assert 0.5 <= rec.end_time < 0.5 + sc.params.dt


def test_on_step_sees_every_step():
    sc = fixture("cat_v2")
    seen = []
    rec = simulate(sc, 1, on_step=lambda r, hit: seen.append(r.n))
    assert seen == list(range(len(seen)))
    assert len(seen) * sc.params.dt == pytest.approx(rec.end_time)


def test_events_fire_at_or_after_their_time():
    sc = fixture("cat_v1_observer")
    rec = simulate(sc, 2)
    look = next(e for e in rec.log if e.kind == "look")
    assert 0.2 <= look.time < 0.2 + sc.params.dt


def test_with_dt():
    sc = fixture("cat_v1")
    assert with_dt(sc, 0.001).params.substeps == 3
    with pytest.raises(InvalidValue):
        with_dt(sc, 0.0007)


def test_stepper_bound():
    sc = fixture("cat_v1")
    st_ = Stepper(sc)
    p = sc.params
    assert st_.max_steps * p.dt >= p.half_life + 3 * p.transit_time
