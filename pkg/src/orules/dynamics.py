"""Probability currents and weight transfer.

Three currents move weight between components: the radioactive decay out
of the undecayed detector state (shut off at the half-life), the classical
advance of the device pulse along the task axis, and the physiological
current into the ready rows once an observation has branched the state.
Any edge that would leave a component holding a ready brain is gated off
and recorded instead of flowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .branching import (branch_factors, brink_agents, completion_factors,
                        decays, is_transit, key_of, twin_factors)
from .errors import GatedComponent
from .state import (TRANSIT, Component, DevicePulse, StateGraph,
                    contains_ready)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class DynamicsParams:
    """Rates and grid.  Times share one unit; ``phys_rate`` is per unit time.

    The device axis is split into ``bins`` cells crossed in
    ``transit_time``; each cell crossing is divided into ``substeps``
    integration steps.
    """

    half_life: float
    transit_time: float
    phys_rate: float
    bins: int = 100
    pulse_width: int = 1
    substeps: int = 1
    cutoff: bool = True

    def __post_init__(self):
        for name in ("half_life", "transit_time", "phys_rate"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive number, got {v!r}")
        for name in ("bins", "pulse_width", "substeps"):
            v = getattr(self, name)
            if not (isinstance(v, int) and v >= 1):
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.pulse_width > self.bins:
            raise ValueError("pulse_width cannot exceed bins")

    @property
    def bin_time(self) -> float:
        return self.transit_time / self.bins

    @property
    def dt(self) -> float:
        return self.bin_time / self.substeps

    @property
    def decay_rate(self) -> float:
        return LN2 / self.half_life

    def decay_on(self, t: float) -> bool:
        return not self.cutoff or t < self.half_life

    def decay_window(self, t: float, dt: float) -> float:
        """Length of ``[t, t + dt)`` during which the detector is live."""
        if not self.cutoff:
            return dt
        return min(max(self.half_life - t, 0.0), dt)


def decay_current(t: float, w0: float, p: DynamicsParams) -> float:
    if w0 <= 0.0 or not p.decay_on(t):
        return 0.0
    return p.decay_rate * w0


def physiological_current(t: float, t_ob: Optional[float], w_src: float,
                          p: DynamicsParams) -> float:
    if t_ob is None or t < t_ob or w_src <= 0.0:
        return 0.0
    return p.phys_rate * w_src


def advance_device_pulse(c: Component, p: DynamicsParams, dt: float) -> tuple[Component, float]:
    """Shift the pulse of ``c`` by ``dt`` worth of bins.

    Returns the advanced component and the mass that crossed the end of the
    axis; the caller moves that mass into the completed component.
    """
    if contains_ready(c):
        raise GatedComponent(f"{c.label} holds a ready brain and cannot advance")
    pulse = c.pulse
    if pulse is None or pulse.stage != TRANSIT:
        return c, 0.0
    shift = dt / p.bin_time
    n = int(round(shift))
    if n < 1 or abs(shift - n) > 1e-9 * max(1.0, shift):
        raise ValueError(f"dt={dt!r} is not a whole number of bins ({p.bin_time!r} each)")
    d = pulse.density
    n = min(n, d.size)
    crossed = float(d[d.size - n:].sum())
    moved = np.zeros_like(d)
    moved[n:] = d[:d.size - n]
    return _with_density(c, moved), crossed


def _with_density(c: Component, density: np.ndarray) -> Component:
    factors = tuple(DevicePulse(TRANSIT, density) if isinstance(f, DevicePulse) else f
                    for f in c.factors)
    return c.evolve(factors=factors, weight=float(density.sum()))


class Edge(NamedTuple):
    kind: str
    source: str
    target: Optional[str]


class Flow(NamedTuple):
    edge: Edge
    amount: float
    density: Optional[np.ndarray] = None


@dataclass
class CurrentLedger:
    """Currents assembled for one step.

    ``inflow`` maps component ids to the net positive current into them
    (weight per unit time, averaged over the step); ``blocked`` lists the
    edges suppressed because their source holds a ready brain.
    ``continuous`` holds non-ready targets fed only by the advance of their
    own progression; they are one component seen at two times, so even
    strict sampling skips them.  ``window`` is the part of the step during
    which sampled current actually flows: shorter than ``dt`` only in the
    step holding the cutoff when decay is the sole such current.
    """

    time: float
    dt: float
    shift: bool = True
    flows: list = field(default_factory=list)
    inflow: dict = field(default_factory=dict)
    blocked: list = field(default_factory=list)
    ready: frozenset = frozenset()
    continuous: frozenset = frozenset()
    window: float = 0.0

    def __post_init__(self):
        if self.window <= 0.0:
            self.window = self.dt

    def eligible(self, strict: bool = False) -> list:
        if strict:
            return [(cid, j) for cid, j in self.inflow.items() if cid not in self.continuous]
        return [(cid, j) for cid, j in self.inflow.items() if cid in self.ready]


def _target(g: StateGraph, factors, kind: str, source: Component) -> Component:
    c = g.find(key_of(factors))
    if c is None:
        raise LookupError(f"{kind} target of {source.label} was never spawned")
    return c


def step_currents(g: StateGraph, p: DynamicsParams, shift: bool = True) -> CurrentLedger:
    """Assemble every current for the step starting at ``g.time``.

    Targets must already exist (see ``rules.spawn_branches``).  Amounts are
    exact integrals over the step: the undecayed weight falls by
    ``2**(-tau/half_life)`` over the live part ``tau`` of the step, competing
    exponentially with the physiological current.
    """
    t, dt = g.time, p.dt
    ledger = CurrentLedger(time=t, dt=dt, shift=shift)
    tau = p.decay_window(t, dt)
    decay_x = p.decay_rate * tau
    phys_x = p.phys_rate * dt

    for c in g.components:
        agents = brink_agents(g, c, t)
        if contains_ready(c):
            _record_blocked(g, c, agents, tau, ledger)
            continue
        if c.weight <= 0.0:
            continue
        if is_transit(c):
            d = c.pulse.density
            vert_total = np.zeros_like(d)
            if agents:
                frac = -math.expm1(-phys_x * len(agents))
                share = d * (frac / len(agents))
                for agent in agents:
                    tw = _target(g, twin_factors(g, c, agent), "vertical", c)
                    ledger.flows.append(Flow(Edge("vertical", c.id, tw.id), float(share.sum()), share))
                    vert_total = vert_total + share
            if shift:
                remaining = d - vert_total
                crossed = float(remaining[-1])
                if crossed > 0.0:
                    done = _target(g, completion_factors(g, c), "advance", c)
                    ledger.flows.append(Flow(Edge("advance", c.id, done.id), crossed))
            continue
        x_dec = decay_x if decays(c) else 0.0
        x_tot = x_dec + phys_x * len(agents)
        if x_tot <= 0.0:
            continue
        out = -c.weight * math.expm1(-x_tot)
        if x_dec > 0.0:
            br = _target(g, branch_factors(c), "decay", c)
            amount = out * (x_dec / x_tot)
            inj = np.zeros(p.bins)
            inj[:p.pulse_width] = amount / p.pulse_width
            ledger.flows.append(Flow(Edge("decay", c.id, br.id), amount, inj))
        for agent in agents:
            tw = _target(g, twin_factors(g, c, agent), "vertical", c)
            amount = out * (phys_x / x_tot)
            dens = None
            if is_transit(tw):
                dens = np.zeros(p.bins)
                dens[0] = amount
            ledger.flows.append(Flow(Edge("vertical", c.id, tw.id), amount, dens))

    inflow: dict = {}
    for fl in ledger.flows:
        if fl.amount > 0.0:
            inflow[fl.edge.target] = inflow.get(fl.edge.target, 0.0) + fl.amount / dt
    ledger.inflow = inflow
    ledger.ready = frozenset(cid for cid in inflow if contains_ready(g.get(cid)))
    other = {fl.edge.target for fl in ledger.flows if fl.edge.kind != "advance"}
    ledger.continuous = frozenset(cid for cid in inflow
                                  if cid not in ledger.ready and cid not in other)
    if tau > 0.0 and all(fl.edge.kind == "decay" for fl in ledger.flows
                         if fl.amount > 0.0 and fl.edge.target not in ledger.continuous):
        ledger.window = tau
    return ledger


def _record_blocked(g, c, agents, tau, ledger):
    if c.weight <= 0.0:
        return
    if decays(c) and tau > 0.0:
        tgt = g.find(key_of(branch_factors(c)))
        ledger.blocked.append(Edge("decay", c.id, tgt.id if tgt else None))
    if is_transit(c):
        ledger.blocked.append(Edge("advance", c.id, None))
    for agent in agents:
        tgt = g.find(key_of(twin_factors(g, c, agent)))
        ledger.blocked.append(Edge("vertical", c.id, tgt.id if tgt else None))


def transfer(g: StateGraph, ledger: CurrentLedger, p: DynamicsParams) -> StateGraph:
    """Move the ledger's weight and advance the clock by one step."""
    by_id = {c.id: c for c in g.components}
    out_w: dict = {}
    out_d: dict = {}
    in_w: dict = {}
    in_d: dict = {}
    for fl in ledger.flows:
        src, tgt = fl.edge.source, fl.edge.target
        # an advancing source loses its crossed mass through the shift itself
        if fl.edge.kind != "advance":
            if is_transit(by_id[src]):
                out_d[src] = out_d.get(src, 0.0) + fl.density
            else:
                out_w[src] = out_w.get(src, 0.0) + fl.amount
        if fl.density is not None and is_transit(by_id[tgt]):
            in_d[tgt] = in_d.get(tgt, 0.0) + fl.density
        else:
            in_w[tgt] = in_w.get(tgt, 0.0) + fl.amount

    comps = []
    for c in g.components:
        if is_transit(c):
            d = c.pulse.density
            touched = False
            if c.id in out_d:
                d = np.maximum(d - out_d[c.id], 0.0)
                touched = True
            if ledger.shift and not contains_ready(c) and d.any():
                c, _ = advance_device_pulse(_with_density(c, d), p, p.bin_time)
                d = c.pulse.density
                touched = True
            if c.id in in_d:
                d = d + in_d[c.id]
                touched = True
            if touched:
                c = _with_density(c, d)
        elif c.id in out_w or c.id in in_w:
            w = c.weight - out_w.get(c.id, 0.0) + in_w.get(c.id, 0.0)
            c = c.evolve(weight=max(w, 0.0))
        comps.append(c)
    return g.evolve(components=tuple(comps), time=ledger.time + ledger.dt)
