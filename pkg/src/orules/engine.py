"""Trajectory stepping.

One step of length ``dt`` starting at ``t = n * dt`` runs, in order:

1. scheduled events due in ``[t, t + dt)`` and the cutoff, if it falls there;
2. zero-weight targets for every current about to flow;
3. currents, hit sampling, weight transfer;
4. reduction on a hit, then phantom pruning.

Between hits a trajectory is fully deterministic, so ``EnsembleRunner``
caches the stretch of steps that follows each distinct post-hit state and
replays it for every seed, consuming the same random draws the reference
``simulate`` loop would.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .branching import live_target_keys
from .dynamics import DynamicsParams, step_currents, transfer
from .errors import NonTermination, OrulesError
from .rules import (CUTOFF, HitEvent, LogEntry, apply_branching,
                    choose, hazard, prune_phantoms, reduce, spawn_branches)
from .scenario import Scenario, build_initial_state
from .state import StateGraph, contains_ready, graph_label

CONSERVATION_TOL = 1e-9


class ConservationError(OrulesError):
    """Weight was created or destroyed by a transfer step."""


class DrawStream:
    """Counted stream of uniforms on [0, 1) for one trajectory.

    Block reads (``peek``/``skip``) return exactly what the same number of
    single ``random()`` calls would.
    """

    BLOCK = 4096

    def __init__(self, seed: int):
        self._gen = np.random.default_rng(seed)
        self._buf = np.empty(0)
        self._pos = 0
        self.drawn = 0

    def _ensure(self, n: int):
        avail = self._buf.size - self._pos
        if avail < n:
            fresh = self._gen.random(max(n - avail, self.BLOCK))
            self._buf = np.concatenate((self._buf[self._pos:], fresh))
            self._pos = 0

    def random(self) -> float:
        self._ensure(1)
        u = float(self._buf[self._pos])
        self._pos += 1
        self.drawn += 1
        return u

    def peek(self, n: int) -> np.ndarray:
        self._ensure(n)
        return self._buf[self._pos:self._pos + n]

    def skip(self, n: int):
        self._ensure(n)
        self._pos += n
        self.drawn += n


@dataclass(frozen=True)
class StepResult:
    """Everything one step produced before its hit is sampled."""

    n: int
    before: StateGraph      # after events and spawning, before transfer
    after: StateGraph       # after transfer
    ledger: object
    s_live: float
    log: tuple


class Stepper:
    """Deterministic parts of the step loop for one scenario."""

    def __init__(self, sc: Scenario, *, prune: bool = True,
                 params: Optional[DynamicsParams] = None):
        self.sc = sc
        self.p = params or sc.params
        self.dt = self.p.dt
        self.prune = prune
        self._memo = None
        self.by_step: dict = {}
        self.cutoff_step = None
        last = 0.0
        for e in sc.events:
            if e.kind == CUTOFF:
                self.cutoff_step = self.step_of(e.time) if self.p.cutoff else None
                self.cutoff = e
                continue
            self.by_step.setdefault(self.first_step_at(e.time), []).append(e)
            last = max(last, e.time)
        self.last_event_step = max(self.by_step, default=-1)
        bound = max(self.p.half_life, last) + self.p.transit_time + 2 * self.p.transit_time
        self.max_steps = math.ceil(bound / self.dt) + 1

    def step_of(self, t: float) -> int:
        """Index of the step whose window ``[n dt, (n+1) dt)`` holds ``t``."""
        return max(0, math.floor(t / self.dt + 1e-9))

    def first_step_at(self, t: float) -> int:
        """First step starting at or after ``t``; events take effect there."""
        return max(0, math.ceil(t / self.dt - 1e-9))

    def initial(self) -> StateGraph:
        g, _ = build_initial_state(self.sc)
        return g

    def pre(self, g: StateGraph, n: int) -> StepResult:
        p = self.p
        g = g.evolve(time=n * self.dt)
        log = []
        for e in self.by_step.get(n, ()):
            g, more = apply_branching(g, e, p)
            log += more
        if n == self.cutoff_step:
            g, more = apply_branching(g, self.cutoff, p)
            log += more
        shift = (n + 1) % p.substeps == 0
        g, more = spawn_branches(g, p, shift)
        log += more
        ledger = step_currents(g, p, shift)
        s_live = math.fsum(c.weight for c in g.components if not contains_ready(c))
        after = transfer(g, ledger, p).evolve(time=(n + 1) * self.dt)
        if abs(after.s - g.s) > CONSERVATION_TOL:
            raise ConservationError(f"step {n}: total weight moved from {g.s!r} to {after.s!r}")
        return StepResult(n, g, after, ledger, s_live, tuple(log))

    def post(self, g: StateGraph, hit: Optional[HitEvent] = None):
        """Reduce on ``hit`` (if any) and prune; returns (graph, log)."""
        if hit is not None:
            g = reduce(g, hit)
        targets = self._targets(g)
        g, log = prune_phantoms(g, self.p, self.prune, targets)
        # dropped components neither feed nor are fed, so the targets hold
        self._memo = (g, targets)
        return g, log

    def _targets(self, g: StateGraph) -> set:
        return live_target_keys(g, self.p.decay_on(g.time))

    def quiescent(self, g: StateGraph, n: int) -> bool:
        """Nothing can change any more: no events left and no live current."""
        if n <= self.last_event_step:
            return False
        memo = self._memo
        if memo is not None and memo[0] is g and g.time == n * self.dt:
            return not memo[1]
        return not self._targets(g.evolve(time=n * self.dt))


@dataclass(frozen=True)
class TrajectoryRecord:
    seed: int
    log: tuple
    terminal_label: str
    terminal_weights: tuple
    hits: tuple
    end_time: float
    terminal: tuple = field(default=(), compare=False, repr=False)

    @property
    def terminal_weight(self) -> float:
        return math.fsum(self.terminal_weights)

    @property
    def hit_time(self) -> Optional[float]:
        return self.hits[0].time if self.hits else None

    def agent_awareness(self, agent: str) -> tuple:
        """Awareness labels ``agent`` holds across the terminal components."""
        out = []
        for c in self.terminal:
            b = c.brain(agent)
            if b is not None:
                out.append((b.awareness, b.status))
        return tuple(out)


def _start_log(g: StateGraph) -> list:
    return [LogEntry(g.time, "start", c.label, c.weight) for c in g.components]


def _finish(seed: int, g: StateGraph, n: int, dt: float, log: list, hits: list) -> TrajectoryRecord:
    comps = sorted((c for c in g.components if not contains_ready(c) and c.weight > 0.0),
                   key=lambda c: c.label)
    end = n * dt
    log = log + [LogEntry(end, "terminal", c.label, c.weight) for c in comps]
    return TrajectoryRecord(seed, tuple(log), graph_label(comps),
                            tuple(c.weight for c in comps), tuple(hits), end, tuple(comps))


def _hit_entries(h: HitEvent, after: StateGraph, reduced: StateGraph) -> list:
    return [LogEntry(h.time, "hit", after.get(h.chosen).label, after.get(h.chosen).weight),
            LogEntry(h.time, "reduce", reduced.components[0].label, 1.0)]


def simulate(sc: Scenario, seed: int, *, prune: bool = True, strict: bool = False,
             sample: bool = True, params: Optional[DynamicsParams] = None,
             on_step: Optional[Callable] = None, max_time: Optional[float] = None) -> TrajectoryRecord:
    """Reference step loop for one trajectory.

    ``on_step(result, hit)`` sees every step before reduction and pruning.
    With ``max_time`` the run stops there instead of failing the
    termination bound.
    """
    st = Stepper(sc, prune=prune, params=params)
    stream = DrawStream(seed)
    g = st.initial()
    log = _start_log(g)
    hits = []
    limit = st.max_steps if max_time is None else math.ceil(max_time / st.dt - 1e-9)
    n = 0
    while not st.quiescent(g, n):
        if n >= limit:
            if max_time is not None:
                break
            raise NonTermination(f"{sc.name}: still evolving at t={n * st.dt:.6g}")
        r = st.pre(g, n)
        log += r.log
        hit = None
        if sample:
            elig = r.ledger.eligible(strict)
            p = hazard(elig, r.s_live, st.dt)
            if p > 0.0:
                u1, u2 = stream.random(), stream.random()
                i = choose(elig, p, u1, u2)
                if i is not None:
                    cid, j = elig[i]
                    hit = HitEvent(r.n * st.dt + r.ledger.window * u1 / p, cid, j)
        if on_step is not None:
            on_step(r, hit)
        if hit is not None and not contains_ready(r.after.get(hit.chosen)):
            c = r.after.get(hit.chosen)
            log.append(LogEntry(hit.time, "void", c.label, c.weight))
            hit = None
        if hit is not None:
            log += _hit_entries(hit, r.after, reduce(r.after, hit))
            hits.append(hit)
        g, more = st.post(r.after, hit)
        log += more
        n += 1
    return _finish(seed, g, n, st.dt, log, hits)


class _Segment:
    """Deterministic run of steps from one state, with no hits applied."""

    __slots__ = ("g", "n0", "n", "k", "log_pos", "logs", "elig_k", "elig_p",
                 "elig_data", "done", "children", "entry")

    def __init__(self, g: StateGraph, n0: int, entry=()):
        self.g = g
        self.n0 = n0
        self.n = n0
        self.k = 0              # steps built
        self.logs = []          # entries in step order
        self.log_pos = [0]      # logs[log_pos[k]:log_pos[k+1]] belong to step k
        self.elig_k = []
        self.elig_p = np.empty(0)
        self.elig_data = {}
        self.done = False
        self.children = {}
        self.entry = tuple(entry)

    def build(self, st: Stepper, strict: bool, upto: int):
        ks, ps = [], []
        while self.k < upto and not self.done:
            if st.quiescent(self.g, self.n):
                self.done = True
                break
            if self.n >= st.max_steps:
                raise NonTermination(f"{st.sc.name}: still evolving at t={self.n * st.dt:.6g}")
            r = st.pre(self.g, self.n)
            elig = r.ledger.eligible(strict)
            p = hazard(elig, r.s_live, st.dt)
            if p > 0.0:
                ks.append(self.k)
                ps.append(p)
                self.elig_data[self.k] = (elig, p, r)
            g, more = st.post(r.after)
            # per step: pre-hit log, then post log; a hit splices between
            self.logs.append((r.log, tuple(more)))
            self.g = g
            self.n += 1
            self.k += 1
        if ks:
            self.elig_k.extend(ks)
            self.elig_p = np.concatenate((self.elig_p, ps))


class EnsembleRunner:
    """Runs many seeds of one scenario, sharing deterministic stretches.

    Produces records identical to ``simulate`` with the same flags.
    """

    CHUNK = 256

    def __init__(self, sc: Scenario, *, prune: bool = True, strict: bool = False,
                 params: Optional[DynamicsParams] = None):
        self.st = Stepper(sc, prune=prune, params=params)
        self.strict = strict
        g0 = self.st.initial()
        self.start = _start_log(g0)
        self.root = _Segment(g0, 0)

    def run(self, seed: int) -> TrajectoryRecord:
        st, dt = self.st, self.st.dt
        stream = DrawStream(seed)
        seg, k = self.root, 0
        log = list(self.start)
        hits = []
        while True:
            if k >= seg.k and not seg.done:
                seg.build(st, self.strict, seg.k + self.CHUNK)
            if k >= seg.k:
                return _finish(seed, seg.g, seg.n, dt, log, hits)
            hi = seg.k
            a = bisect.bisect_left(seg.elig_k, k)
            b = bisect.bisect_left(seg.elig_k, hi)
            m = b - a
            j = -1
            if m:
                draws = stream.peek(2 * m)
                under = np.flatnonzero(draws[0::2] < seg.elig_p[a:b])
                if under.size:
                    j = int(under[0])
            if j < 0:
                stream.skip(2 * m)
                for pre, post in seg.logs[k:hi]:
                    log += pre
                    log += post
                k = hi
                continue
            step = seg.elig_k[a + j]
            u1, u2 = float(draws[2 * j]), float(draws[2 * j + 1])
            stream.skip(2 * (j + 1))
            for pre, post in seg.logs[k:step]:
                log += pre
                log += post
            elig, p, r = seg.elig_data[step]
            pre, post = seg.logs[step]
            log += pre
            cid, jin = elig[choose(elig, p, u1, u2)]
            hit = HitEvent(r.n * dt + r.ledger.window * u1 / p, cid, jin)
            chosen = r.after.get(cid)
            if not contains_ready(chosen):
                log.append(LogEntry(hit.time, "void", chosen.label, chosen.weight))
                log += post
                k = step + 1
                continue
            hits.append(hit)
            child = seg.children.get((step, cid))
            if child is None:
                reduced = reduce(r.after, hit)
                g, more = st.post(r.after, hit)
                child = _Segment(g, r.n + 1, (reduced.components[0].label, tuple(more)))
                seg.children[(step, cid)] = child
            label, more = child.entry
            log.append(LogEntry(hit.time, "hit", chosen.label, chosen.weight))
            log.append(LogEntry(hit.time, "reduce", label, 1.0))
            log += more
            seg, k = child, 0


def with_dt(sc: Scenario, dt: float) -> Scenario:
    """Scenario with the step length overridden (must divide the bin time)."""
    from .scenario import substeps_for_dt
    return replace(sc, params=replace(sc.params, substeps=substeps_for_dt(sc.params.bin_time, dt)))

