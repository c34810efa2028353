"""End-to-end acceptance checks.  Each test prints one PASS/FAIL line."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orules.branching import is_transit
from orules.engine import simulate
from orules.harness import compare_hit_cdf, format_traces, run_records
from orules.rules import RING, ScheduledEvent
from orules.scenario import FIXTURES, EventSchedule, fixture
from orules.state import BrainStatus, contains_ready

TOL = 0.011


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")
    return emit


_cache = {}


def records(name, n, prune=True):
    key = (name, n, prune)
    if key not in _cache:
        t0 = time.perf_counter()
        recs = run_records(fixture(name), n, 0, workers=1, prune=prune)
        _cache[key] = (recs, time.perf_counter() - t0)
    return _cache[key]


def test_1_version_one_split(report):
    recs, secs = records("cat_v1", 20000)
    frac = sum(r.terminal_label == "d1 M(af) U" for r in recs) / len(recs)
    ok = abs(frac - 0.5) <= TOL and secs <= 60.0
    report(1, ok, f"CatV1 n=20000 fraction ending d1 M(af) U = {frac:.4f} "
                  f"(0.5 +/- {TOL}); runtime {secs:.1f} s (limit 60 s)")
    assert ok


def test_2_version_two_split(report):
    recs, _ = records("cat_v2", 20000)
    frac = sum(r.terminal_label == "d1 M(af) C" for r in recs) / len(recs)
    ok = abs(frac - 0.5) <= TOL
    report(2, ok, f"CatV2 n=20000 fraction ending alarm-woken d1 M(af) C = {frac:.4f} (0.5 +/- {TOL})")
    assert ok


def test_3_apparatus_only(report):
    sc = fixture("apparatus")
    recs, _ = records("apparatus", 1000)
    hits = sum(len(r.hits) for r in recs)
    weights = {r.terminal_weights for r in recs}
    w_err = max(abs(w - 0.5) for ws in weights for w in ws)
    labels = {r.terminal_label for r in recs}

    # weight still in transit once the last decay has had time T to complete
    p = sc.params
    late = []

    def watch(r, hit):
        if r.after.time >= p.half_life + p.transit_time - 1e-12:
            late.append(math.fsum(c.weight for c in r.after.components if is_transit(c)))

    simulate(sc, 0, on_step=watch)
    middle = max(late) if late else 0.0
    ok = (hits == 0 and labels == {"d0 M(a0) i0 + d1 M(af) i1"}
          and all(len(ws) == 2 for ws in weights) and w_err <= 1e-6 and middle <= 1e-9)
    report(3, ok, f"ApparatusOnly 1000 runs: {hits} reductions; terminal weights 0.5/0.5 "
                  f"max error {w_err:.2e}; middle term after t_half+T <= {middle:.2e}")
    assert ok


def test_4_norm_conservation(report):
    # with pruning off nothing leaves the graph except through reduction,
    # which renormalises, so the norm must hold on every step
    worst = 0.0
    steps = 0
    for name in FIXTURES:
        sc = fixture(name)
        for seed in range(25):
            def watch(r, hit):
                nonlocal worst, steps
                steps += 1
                worst = max(worst, abs(r.before.s - 1.0), abs(r.after.s - 1.0))

            simulate(sc, seed, on_step=watch, prune=False)
    ok = worst <= 1e-9
    report(4, ok, f"{steps} steps over 7 scenarios x 25 seeds: max |sum(w) - 1| = {worst:.2e} (<= 1e-9)")
    assert ok


_gating = {"steps": 0, "advanced": 0, "leaks": 0, "left_a0": 0}


@settings(max_examples=35, deadline=None)
@given(st.sampled_from(FIXTURES), st.integers(0, 10**6))
def _gating_property(name, seed):
    sc = fixture(name)

    def watch(r, hit):
        _gating["steps"] += 1
        ready = {c.id for c in r.before.components if contains_ready(c)}
        _gating["leaks"] += sum(f.edge.source in ready for f in r.ledger.flows)
        after = {c.id: c for c in r.after.components}
        for c in r.before.components:
            if c.id not in ready or not is_transit(c):
                continue
            injected = sum((f.density for f in r.ledger.flows if f.edge.target == c.id),
                           np.zeros(sc.params.bins))
            # a gated pulse only gains mass where current lands; it never moves
            if not np.allclose(after[c.id].pulse.density - c.pulse.density, injected,
                               rtol=0.0, atol=1e-15):
                _gating["advanced"] += 1
            if sc.version.family == "v1" and after[c.id].pulse.label != "M(a0)":
                _gating["left_a0"] += 1

    simulate(sc, seed, on_step=watch, prune=False)


def test_5_orule4_gating(report):
    _gating_property()
    ok = not (_gating["leaks"] or _gating["advanced"] or _gating["left_a0"])
    report(5, ok, f"{_gating['steps']} steps over random (scenario, seed): "
                  f"{_gating['leaks']} edges out of ready components, "
                  f"{_gating['advanced']} ready pulses advanced, "
                  f"{_gating['left_a0']} Version I ready pulses past a0")
    assert ok


def test_6_hit_time_cdf(report):
    sc = fixture("cat_v1")
    recs, _ = records("cat_v1", 20000)
    times = [r.hit_time for r in recs if r.hits]
    extra = 20000
    while len(times) < 10_000:
        more = run_records(sc, 2000, extra, workers=1)
        times += [r.hit_time for r in more if r.hits]
        extra += 2000
    times = times[:10_000]
    ks = compare_hit_cdf(times, sc.params.half_life)
    oracle = compare_hit_cdf(-np.log2(1 - np.random.default_rng(0).random(10_000) / 2), 1.0)
    ok = ks < 0.02 and max(times) <= sc.params.half_life
    report(6, ok, f"CatV1 first-hit times, n={len(times)}: KS = {ks:.4f} (< 0.02); "
                  f"inverse-CDF oracle sample KS = {oracle:.4f}")
    assert ok


def test_7_pruning_invariance(report):
    mismatches = {}
    for name in ("cat_v1", "cat_v2_observer"):
        on = run_records(fixture(name), 5000, 0, workers=1, prune=True)
        off = run_records(fixture(name), 5000, 0, workers=1, prune=False)
        mismatches[name] = sum(a.terminal_label != b.terminal_label for a, b in zip(on, off))
    ok = not any(mismatches.values())
    report(7, ok, "pruning on vs off, 5000 seeds each: label mismatches "
                  + ", ".join(f"{k}={v}" for k, v in mismatches.items()))
    assert ok


def test_8_vertical_integral(report):
    sc = fixture("apparatus_observer")
    p = replace(sc.params, cutoff=False)
    t_ob = sc.events.time_of("observe")
    moved = []

    def watch(r, hit):
        moved.append(math.fsum(f.amount for f in r.ledger.flows if f.edge.kind == "vertical"))

    simulate(sc, 0, params=p, sample=False, on_step=watch, max_time=t_ob + 40.0 / p.phys_rate)
    total = math.fsum(moved)
    ok = abs(total - 1.0) <= 1e-6
    report(8, ok, f"ApparatusObserver without hits or cutoff: cumulative vertical transfer = "
                  f"{total:.9f} (1.0 +/- 1e-6)")
    assert ok


def test_9_natural_wake(report):
    sc = fixture("cat_v2_natural_wake")
    recs, _ = records("cat_v2_natural_wake", 5000)
    cat = sc.agent("cat")

    def cat_states(rec):
        return {(a, s) for a, s in rec.agent_awareness(cat)}

    awake = sum(cat_states(r) == {("C", BrainStatus.CONSCIOUS)} for r in recs)
    alarm = sum(bool(r.hits) for r in recs) / len(recs)

    # ring before any hit can land: the clock wins the race
    moved = (ScheduledEvent(0.05, RING) if e.kind == RING else e for e in sc.events)
    early = replace(sc, events=EventSchedule(tuple(sorted(moved, key=lambda e: e.time))))
    early_recs = run_records(early, 200, 0, workers=1)
    early_states = set().union(*(cat_states(r) for r in early_recs))
    late_states = set().union(*(cat_states(r) for r in recs if r.hits))
    ok = awake == len(recs) and early_states == late_states == {("C", BrainStatus.CONSCIOUS)}
    report(9, ok, f"CatV2NaturalWake: {awake}/{len(recs)} end with the cat conscious; "
                  f"alarm path {alarm:.4f}; cat ends C in both orderings "
                  f"(hit first: {sorted(s[0] for s in late_states)}, ring first: "
                  f"{sorted(s[0] for s in early_states)})")
    assert ok


def test_10_determinism_and_parallel(report):
    sc = fixture("cat_v2_observer")
    texts = [format_traces(run_records(sc, 24, 500, workers=w)) for w in (1, 2, 4)]
    again = format_traces(run_records(sc, 24, 500, workers=1))
    ok = len(set(texts)) == 1 and again == texts[0]
    report(10, ok, "CatV2Observer 24 seeds: traces byte-identical at 1, 2 and 4 workers "
                   f"and on repeat ({len(texts[0])} bytes)")
    assert ok
