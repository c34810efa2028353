"""Factor arithmetic for the components that currents flow into.

Every edge of the current graph points at a component identified by its
discrete labels.  These helpers compute those labels; whether the target
already exists is the caller's business.
"""

from __future__ import annotations

import numpy as np

from .state import (REST, TRANSIT, Brain, BrainStatus, Component, Detector,
                    DevicePulse, StateGraph, contains_ready)


# stands in for the injected pulse; only its key matters for lookups
_TRANSIT_STUB = DevicePulse(TRANSIT, np.zeros(1))


def readied(factors) -> tuple:
    """Turn every engaged active brain into a ready one."""
    return tuple(
        f.become(BrainStatus.READY)
        if isinstance(f, Brain) and f.engaged and f.status.active else f
        for f in factors)


def branch_factors(c: Component) -> tuple:
    """Labels of the component the decay current of ``c`` feeds."""
    out = []
    for f in c.factors:
        if isinstance(f, Detector):
            f = Detector(1)
        elif isinstance(f, DevicePulse):
            f = _TRANSIT_STUB
        out.append(f)
    # the new branch differs from its source in the detector label
    return readied(out)


def completion_factors(g: StateGraph, c: Component) -> tuple:
    """Labels of the component the end of ``c``'s progression lands in.

    The completed labels are made ready when they would sit in the
    superposition next to a live component they are discontinuous with.
    """
    done = g.completion.complete(c.factors)
    key = tuple(f.key for f in done)
    for other in g.components:
        if other.track == c.track or other.weight <= 0.0:
            continue
        if other.key != key:
            return readied(done)
    return done


def twin_factors(g: StateGraph, c: Component, agent: str) -> tuple:
    """Labels of the ready row fed by the physiological current out of ``c``."""
    seen = g.completion.perceive(c.factors)
    out = []
    for f in c.factors:
        if isinstance(f, Brain) and f.agent == agent and f.status is BrainStatus.BRINK:
            f = f.become(BrainStatus.READY, seen)
        out.append(f)
    return readied(out)


def key_of(factors) -> tuple:
    return tuple(f.key for f in factors)


def decays(c: Component) -> bool:
    p = c.pulse
    return c.detector == 0 and p is not None and p.stage == REST


def is_transit(c: Component) -> bool:
    p = c.pulse
    return p is not None and p.stage == TRANSIT


def brink_agents(g: StateGraph, c: Component, t: float) -> list:
    """Resolving observers still on the brink in ``c`` at time ``t``."""
    out = []
    for agent, t_ob in g.resolving:
        if t >= t_ob:
            b = c.brain(agent)
            if b is not None and b.status is BrainStatus.BRINK:
                out.append(agent)
    return out


def feeds(g: StateGraph, c: Component, decay_on: bool) -> list:
    """Target keys of every edge that leaves ``c``, gated or not."""
    out = []
    if decay_on and decays(c):
        out.append(("decay", key_of(branch_factors(c))))
    if is_transit(c):
        out.append(("advance", key_of(completion_factors(g, c))))
    for agent in brink_agents(g, c, g.time):
        out.append(("vertical", key_of(twin_factors(g, c, agent))))
    return out


def live_target_keys(g: StateGraph, decay_on: bool) -> set:
    """Keys of components that receive current now or can later.

    Sources are the non-ready components holding weight; a target that is
    itself non-ready passes the flow on, so the search follows it.
    """
    targets: set = set()
    queue = [c for c in g.components if c.weight > 0.0 and not contains_ready(c)]
    seen = {c.key for c in queue}
    while queue:
        c = queue.pop()
        for _, key in feeds(g, c, decay_on):
            targets.add(key)
            if key in seen:
                continue
            seen.add(key)
            nxt = g.find(key)
            if nxt is not None and not contains_ready(nxt):
                queue.append(nxt)
    return targets

