"""The four state-reduction rules as executable steps.

* stochastic choice: a hit lands with probability ``dt * sum(J) / s`` per
  step and picks a recipient in proportion to its inflow;
* new components discontinuous with the rest get ready brains
  (``spawn_branches``, ``apply_branching``);
* a hit on a ready component makes it conscious and drops every other
  component (``reduce``);
* ready components only receive current, so once their sources are gone
  they are phantoms and can be dropped (``prune_phantoms``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .branching import (branch_factors, brink_agents, completion_factors,
                        decays, is_transit, key_of, live_target_keys,
                        twin_factors)
from .dynamics import CurrentLedger, DynamicsParams
from .errors import NotReady, StepTooCoarse, UnknownEvent
from .state import (TRANSIT, Brain, BrainStatus, DevicePulse, Indicator,
                    StateGraph, contains_ready, is_discontinuous)

MAX_STEP_HAZARD = 0.1

LOOK, OBSERVE, CUTOFF, RING = "look", "observe", "cutoff", "ring"
EVENT_KINDS = (LOOK, OBSERVE, CUTOFF, RING)


class ScheduledEvent(NamedTuple):
    time: float
    kind: str
    agent: Optional[str] = None


class LogEntry(NamedTuple):
    time: float
    kind: str
    label: str
    weight: float


@dataclass(frozen=True)
class HitEvent:
    time: float
    chosen: str
    trigger_inflow: float


def choose(eligible, p: float, u1: float, u2: float) -> Optional[int]:
    """Index into ``eligible`` picked by the uniforms ``u1`` and ``u2``."""
    if u1 >= p:
        return None
    total = math.fsum(j for _, j in eligible)
    acc = 0.0
    for i, (_, j) in enumerate(eligible):
        acc += j
        if u2 * total < acc:
            return i
    return len(eligible) - 1


def hazard(eligible, s: float, dt: float) -> float:
    if not eligible:
        return 0.0
    if s <= 0.0:
        raise ValueError("stochastic choice needs a positive total square modulus")
    p = dt * math.fsum(j for _, j in eligible) / s
    if p > MAX_STEP_HAZARD:
        raise StepTooCoarse(f"per-step hit probability {p:.4g} exceeds {MAX_STEP_HAZARD}")
    return p


def sample_stochastic_choice(ledger: CurrentLedger, s: float, dt: float, rng, *,
                             strict: bool = False, t: Optional[float] = None) -> Optional[HitEvent]:
    """Draw the stochastic choice for one step.

    Only components holding a ready brain are eligible unless ``strict``.
    When anything is eligible exactly two uniforms are drawn from ``rng``
    (hit test, then selection); an empty ledger draws nothing.  The hit
    time is placed inside the step by reusing the hit-test uniform.
    """
    eligible = ledger.eligible(strict)
    p = hazard(eligible, s, dt)
    if p <= 0.0:
        return None
    u1 = rng.random()
    u2 = rng.random()
    i = choose(eligible, p, u1, u2)
    if i is None:
        return None
    cid, j = eligible[i]
    t0 = ledger.time if t is None else t
    return HitEvent(t0 + ledger.window * (u1 / p), cid, j)


def _new_component(g: StateGraph, factors, p: DynamicsParams, track=None):
    factors = tuple(DevicePulse(TRANSIT, np.zeros(p.bins))
                    if isinstance(f, DevicePulse) and f.stage == TRANSIT else f
                    for f in factors)
    return g.add(factors, 0.0, track=track)


def spawn_branches(g: StateGraph, p: DynamicsParams, shift: bool = True):
    """Create, at zero weight, every component current is about to flow into.

    Decay branches and ready rows are discontinuous with their sources, so
    their active brains are ready.  A completed component shares its
    source's progression.
    """
    log = []
    decay_on = p.decay_window(g.time, p.dt) > 0.0
    for c in g.components:
        if contains_ready(c) or c.weight <= 0.0:
            continue
        wanted = []
        if decay_on and decays(c):
            wanted.append((branch_factors(c), None))
        if shift and is_transit(c) and c.pulse.density[-1] > 0.0:
            wanted.append((completion_factors(g, c), c.track))
        for agent in brink_agents(g, c, g.time):
            wanted.append((twin_factors(g, c, agent), None))
        for factors, track in wanted:
            if g.find(key_of(factors)) is None:
                g, new = _new_component(g, factors, p, track)
                log.append(LogEntry(g.time, "branch", new.label, 0.0))
    return g, log


def apply_branching(g: StateGraph, e: ScheduledEvent, p: DynamicsParams):
    """Apply a scheduled event at the start of a step; returns (graph, log)."""
    if e.kind == LOOK:
        comps = tuple(c.evolve(factors=_look(c.factors, e.agent)) for c in g.components)
        g = g.evolve(components=comps)
        return g, [LogEntry(g.time, LOOK, e.agent, g.s)]
    if e.kind == OBSERVE:
        return _observe(g, e.agent, p)
    if e.kind == RING:
        comps = tuple(c.evolve(factors=g.completion.ring(c.factors, g.time))
                      for c in g.components)
        g = g.evolve(components=comps)
        return g, [LogEntry(g.time, RING, "N(ff)", g.s)]
    if e.kind == CUTOFF:
        return g, [LogEntry(e.time, CUTOFF, "d0", g.s)]
    raise UnknownEvent(f"unknown event kind {e.kind!r}")


def _look(factors, agent):
    out = []
    for f in factors:
        if isinstance(f, Indicator) and f.level.islower():
            f = Indicator(f.level.upper())
        elif isinstance(f, Brain) and f.agent == agent and f.status is BrainStatus.EXTERNAL:
            f = f.become(BrainStatus.BRINK, "b")
        out.append(f)
    return tuple(out)


def _observe(g: StateGraph, agent: str, p: DynamicsParams):
    log = [LogEntry(g.time, OBSERVE, agent, g.s)]
    brink = [c for c in g.components
             if (b := c.brain(agent)) is not None and b.status is BrainStatus.BRINK]
    sources = [c for c in brink if not contains_ready(c) and c.weight > 0.0]
    split = any(is_discontinuous(a, b) for i, a in enumerate(sources) for b in sources[i + 1:])
    if split:
        # the observer cannot follow a superposition of distinguishable
        # states continuously: ready rows open and receive current
        g = g.evolve(resolving=g.resolving + ((agent, g.time),))
        g, more = spawn_branches(g, p, shift=False)
        return g, log + more
    perceive = g.completion.perceive
    comps = []
    for c in g.components:
        b = c.brain(agent)
        if b is not None and b.status is BrainStatus.BRINK:
            status = BrainStatus.READY if contains_ready(c) else BrainStatus.CONSCIOUS
            nb = b.become(status, perceive(c.factors))
            c = c.evolve(factors=tuple(nb if f is b else f for f in c.factors))
        comps.append(c)
    return g.evolve(components=tuple(comps)), log


def reduce(g: StateGraph, hit: HitEvent) -> StateGraph:
    """Keep only the chosen component, conscious and renormalised."""
    c = g.get(hit.chosen)
    if not contains_ready(c):
        raise NotReady(f"{c.label} holds no ready brain")
    factors = tuple(f.become(BrainStatus.CONSCIOUS)
                    if isinstance(f, Brain) and f.status is BrainStatus.READY else f
                    for f in c.factors)
    seen = g.completion.perceive(factors)
    factors = tuple(f.become(BrainStatus.CONSCIOUS, seen)
                    if isinstance(f, Brain) and f.status is BrainStatus.BRINK else f
                    for f in factors)
    scale = 1.0 / c.weight if c.weight > 0.0 else 0.0
    factors = tuple(DevicePulse(TRANSIT, f.density * scale)
                    if isinstance(f, DevicePulse) and f.stage == TRANSIT else f
                    for f in factors)
    survivor = c.evolve(factors=factors, weight=1.0)
    return g.evolve(components=(survivor,), resolving=())


def find_phantoms(g: StateGraph, p: DynamicsParams, targets=None) -> tuple[list, list]:
    """Ready components with no live inflow, and empty leftovers.

    Returns ``(phantoms, drained)``; drained components are non-ready,
    weightless and fed by nothing.  ``targets`` may pass in a precomputed
    ``live_target_keys`` for ``g``.
    """
    if targets is None:
        targets = live_target_keys(g, p.decay_on(g.time))
    phantoms, drained = [], []
    for c in g.components:
        if c.key in targets:
            continue
        if contains_ready(c):
            phantoms.append(c)
        elif c.weight <= 0.0:
            drained.append(c)
    return phantoms, drained


def prune_phantoms(g: StateGraph, p: DynamicsParams, prune: bool = True, targets=None):
    """Drop phantoms (when ``prune``) and drained components."""
    phantoms, drained = find_phantoms(g, p, targets)
    gone = drained + (phantoms if prune else [])
    if not gone:
        return g, []
    ids = {c.id for c in gone}
    log = [LogEntry(g.time, "prune" if contains_ready(c) else "drain", c.label, c.weight)
           for c in gone]
    return g.evolve(components=tuple(c for c in g.components if c.id not in ids)), log
