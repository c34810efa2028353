"""Component-superposition data model.

A state is a set of components, each an ordered product of subsystem
factors carrying a square modulus (its weight).  Factors are small frozen
value objects; every factor exposes a discrete ``key`` (used for identity
and the discontinuity predicate) and a human-readable ``label``.
"""

from __future__ import annotations

import enum
import math
import uuid
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Optional, Union

import numpy as np

from .errors import BadWeight, DuplicateAgent

if TYPE_CHECKING:
    from .templates import CompletionMap


class BrainStatus(enum.Enum):
    EXTERNAL = "External"
    BRINK = "Brink"
    READY = "Ready"
    CONSCIOUS = "Conscious"
    UNCONSCIOUS = "Unconscious"

    @property
    def active(self) -> bool:
        return self is BrainStatus.READY or self is BrainStatus.CONSCIOUS


# Transitions a single brain token may take.  Conscious -> Unconscious and
# Unconscious -> Ready/Conscious happen only through classical progressions.
ALLOWED_TRANSITIONS = {
    BrainStatus.EXTERNAL: {BrainStatus.BRINK},
    BrainStatus.BRINK: {BrainStatus.READY, BrainStatus.CONSCIOUS},
    BrainStatus.READY: {BrainStatus.CONSCIOUS},
    BrainStatus.CONSCIOUS: {BrainStatus.UNCONSCIOUS},
    BrainStatus.UNCONSCIOUS: {BrainStatus.READY, BrainStatus.CONSCIOUS},
}


@dataclass(frozen=True, slots=True)
class Detector:
    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError(f"detector value must be 0 or 1, got {self.value!r}")

    @property
    def key(self):
        return ("d", self.value)

    @property
    def label(self) -> str:
        return f"d{self.value}"


REST, TRANSIT, DONE = "rest", "transit", "done"


@dataclass(frozen=True, slots=True)
class DevicePulse:
    """Mechanical device position along the task axis.

    ``rest`` pins the device at the start of the axis, ``done`` at the end.
    A ``transit`` pulse carries a per-bin probability mass over the grid;
    the array is frozen read-only so the factor stays a value.
    """

    stage: str
    density: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.stage not in (REST, TRANSIT, DONE):
            raise ValueError(f"unknown pulse stage {self.stage!r}")
        if self.stage == TRANSIT:
            if self.density is None:
                raise ValueError("a transit pulse needs a density")
            d = np.asarray(self.density, dtype=float)
            if d.ndim != 1 or d.size == 0:
                raise ValueError("pulse density must be a non-empty 1-d array")
            if np.any(d < 0.0):
                raise ValueError("pulse density must be non-negative on every bin")
            if d is self.density and d.flags.writeable:
                d = d.copy()
            d.flags.writeable = False
            object.__setattr__(self, "density", d)

    @property
    def mass(self) -> float:
        return float(self.density.sum()) if self.density is not None else 0.0

    @property
    def key(self):
        return ("M", self.stage)

    @property
    def label(self) -> str:
        if self.stage == DONE:
            return "M(af)"
        if self.stage == REST or not self.density[1:].any():
            return "M(a0)"
        return "M(a)"


@dataclass(frozen=True, slots=True)
class Indicator:
    level: str

    def __post_init__(self):
        if self.level not in ("i0", "i1", "I0", "I1"):
            raise ValueError(f"unknown indicator level {self.level!r}")

    @property
    def key(self):
        return ("i", self.level)

    @property
    def label(self) -> str:
        return self.level


@dataclass(frozen=True, slots=True)
class Brain:
    """One agent's higher-level brain state.

    ``engaged`` is false once the agent's awareness no longer depends on
    the apparatus (the naturally woken cat); such a brain is copied
    unchanged into new branches instead of being made ready.
    """

    agent: str
    awareness: str
    status: BrainStatus
    engaged: bool = True

    @property
    def key(self):
        return ("B", self.agent, self.awareness, self.status, self.engaged)

    @property
    def label(self) -> str:
        if self.status is BrainStatus.EXTERNAL:
            return "X"
        if self.status is BrainStatus.BRINK:
            return "B^b"
        if self.status is BrainStatus.READY:
            return "_" + self.awareness
        return self.awareness

    def become(self, status: BrainStatus, awareness: Optional[str] = None, **kw) -> "Brain":
        return replace(self, status=status,
                       awareness=self.awareness if awareness is None else awareness, **kw)


@dataclass(frozen=True, slots=True)
class InternalClock:
    rung_at: Optional[float] = None

    @property
    def rung(self) -> bool:
        return self.rung_at is not None

    @property
    def key(self):
        return ("N", self.rung)

    @property
    def label(self) -> str:
        return "N(ff)" if self.rung else "N(t)"


SubsystemFactor = Union[Detector, DevicePulse, Indicator, Brain, InternalClock]


@dataclass(frozen=True, slots=True, eq=False)
class Component:
    """One superposition branch.

    ``track`` names the classical progression the component belongs to:
    the in-transit and completed parts of one progression share a track
    and are the same component seen at different times.
    """

    id: str
    factors: tuple
    weight: float
    created_at: float = 0.0
    track: str = ""
    key: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "key", tuple(f.key for f in self.factors))
        if not self.track:
            object.__setattr__(self, "track", self.id)

    @property
    def label(self) -> str:
        return " ".join(f.label for f in self.factors)

    @property
    def pulse(self) -> Optional[DevicePulse]:
        for f in self.factors:
            if isinstance(f, DevicePulse):
                return f
        return None

    @property
    def detector(self) -> Optional[int]:
        for f in self.factors:
            if isinstance(f, Detector):
                return f.value
        return None

    @property
    def brains(self) -> tuple:
        return tuple(f for f in self.factors if isinstance(f, Brain))

    def brain(self, agent: str) -> Optional[Brain]:
        for f in self.factors:
            if isinstance(f, Brain) and f.agent == agent:
                return f
        return None

    def evolve(self, **changes) -> "Component":
        return replace(self, **changes)

    def __repr__(self):
        return f"<{self.id} {self.label} w={self.weight:.6g}>"


def _check_factors(factors: Iterable[SubsystemFactor]) -> tuple:
    factors = tuple(factors)
    if not factors:
        raise ValueError("a component needs at least one factor")
    seen = set()
    for f in factors:
        if isinstance(f, Brain):
            if f.agent in seen:
                raise DuplicateAgent(f"agent {f.agent!r} appears twice in one component")
            seen.add(f.agent)
    return factors


WEIGHT_SLACK = 1e-12


def make_component(factors, weight: float, *, id: Optional[str] = None,
                   created_at: float = 0.0, track: Optional[str] = None) -> Component:
    factors = _check_factors(factors)
    # rounding in renormalised pulses may overshoot 1 by a few ulps
    if not (0.0 <= weight <= 1.0 + WEIGHT_SLACK) or math.isnan(weight):
        raise BadWeight(f"weight {weight!r} outside [0, 1]")
    cid = id if id is not None else uuid.uuid4().hex[:12]
    return Component(cid, factors, float(weight), created_at, track or cid)


def contains_ready(c: Component) -> bool:
    return any(isinstance(f, Brain) and f.status is BrainStatus.READY for f in c.factors)


def is_discontinuous(a: Component, b: Component) -> bool:
    """True when the two components differ in any discrete label.

    The task-axis position is never part of the comparison, and two
    components on the same classical progression are continuous however
    their labels have moved along it.
    """
    if a is b or a.track == b.track:
        return False
    return a.key != b.key


@dataclass(frozen=True)
class StateGraph:
    """Live components plus the clock.

    ``resolving`` maps observer agents whose observation branched the state
    to the time the physiological current started.
    """

    components: tuple = ()
    time: float = 0.0
    completion: Optional["CompletionMap"] = None
    resolving: tuple = ()
    next_id: int = 0

    @property
    def s(self) -> float:
        return math.fsum(c.weight for c in self.components)

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def get(self, cid: str) -> Component:
        for c in self.components:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def find(self, key: tuple) -> Optional[Component]:
        for c in self.components:
            if c.key == key:
                return c
        return None

    def resolving_since(self, agent: str) -> Optional[float]:
        for a, t in self.resolving:
            if a == agent:
                return t
        return None

    def evolve(self, **changes) -> "StateGraph":
        return replace(self, **changes)

    def add(self, factors, weight: float = 0.0, *,
            track: Optional[str] = None) -> tuple["StateGraph", Component]:
        """Return a new graph with a freshly numbered component appended."""
        cid = f"c{self.next_id}"
        comp = Component(cid, _check_factors(factors), weight, self.time, track or cid)
        return replace(self, components=self.components + (comp,), next_id=self.next_id + 1), comp


def graph_label(components: Iterable[Component]) -> str:
    """Canonical label for a set of components (sorted, joined by ``+``)."""
    labels = sorted(c.label for c in components)
    return " + ".join(labels)
