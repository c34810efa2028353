"""Scenario families and their classical completion maps.

A completion map says how a component's discrete labels change when its
device pulse reaches the end of the task axis, what an observer's
awareness label is for a given component, and how the internal clock of
the natural wake-up scenario acts when it rings.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .state import (DONE, REST, TRANSIT, Brain, BrainStatus, DevicePulse,
                    Indicator, InternalClock)


class Version(enum.Enum):
    APPARATUS_ONLY = "ApparatusOnly"
    APPARATUS_OBSERVER = "ApparatusObserver"
    CAT_V1 = "CatV1"
    CAT_V1_OBSERVER = "CatV1Observer"
    CAT_V2 = "CatV2"
    CAT_V2_OBSERVER = "CatV2Observer"
    CAT_V2_NATURAL_WAKE = "CatV2NaturalWake"

    @property
    def family(self) -> str:
        if self.value.startswith("Apparatus"):
            return "apparatus"
        if self.value.startswith("CatV1"):
            return "v1"
        return "v2"

    @property
    def has_cat(self) -> bool:
        return self.family != "apparatus"

    @property
    def has_observer(self) -> bool:
        return self.value.endswith("Observer")

    @property
    def has_clock(self) -> bool:
        return self is Version.CAT_V2_NATURAL_WAKE


_PROMOTED = {"i0": "i1", "I0": "I1"}


@dataclass(frozen=True)
class CompletionMap:
    version: Version
    cat: Optional[str] = None

    def perceive(self, factors) -> str:
        """Awareness label an observer settles into for these factors."""
        family = self.version.family
        if family == "apparatus":
            for f in factors:
                if isinstance(f, Indicator):
                    return "B_" + f.level[1]
            return "B_0"
        cat = self._cat_brain(factors)
        if family == "v1":
            return "B_U" if cat is not None and cat.awareness == "U" else "B_0"
        if cat is not None and cat.awareness == "C":
            return "B_fC"
        stage = next((f.stage for f in factors if isinstance(f, DevicePulse)), REST)
        if stage == TRANSIT:
            return "B_aU"
        return "B_0U" if stage == REST else "B_fU"

    def complete(self, factors) -> tuple:
        """Labels at the end of the classical progression of ``factors``.

        Brains are left conscious here; whether they end up ready is the
        branching rule's call, which depends on the rest of the state.
        """
        out = []
        for f in factors:
            if isinstance(f, DevicePulse):
                f = DevicePulse(DONE)
            elif isinstance(f, Indicator):
                f = Indicator(_PROMOTED.get(f.level, f.level))
            elif isinstance(f, Brain) and f.agent == self.cat and f.engaged:
                if self.version.family == "v1" and f.status is BrainStatus.CONSCIOUS:
                    f = f.become(BrainStatus.UNCONSCIOUS, "U")
                elif self.version.family == "v2" and f.status is BrainStatus.UNCONSCIOUS:
                    f = f.become(BrainStatus.CONSCIOUS, "C")
            out.append(f)
        return self._refresh_observers(out)

    def ring(self, factors, t: float) -> tuple:
        """Internal alarm: the clock rings and a sleeping cat wakes up.

        The woken cat is no longer engaged with the apparatus, so later
        branches copy it as it is.
        """
        out = []
        for f in factors:
            if isinstance(f, InternalClock) and not f.rung:
                f = InternalClock(rung_at=t)
            elif isinstance(f, Brain) and f.agent == self.cat:
                if f.status is BrainStatus.UNCONSCIOUS:
                    f = Brain(f.agent, "C", BrainStatus.CONSCIOUS, engaged=False)
                elif f.status is BrainStatus.CONSCIOUS:
                    f = Brain(f.agent, f.awareness, f.status, engaged=False)
            out.append(f)
        return self._refresh_observers(out)

    def _refresh_observers(self, factors) -> tuple:
        factors = tuple(factors)
        return tuple(
            f.become(BrainStatus.CONSCIOUS, self.perceive(factors))
            if isinstance(f, Brain) and f.agent != self.cat
            and f.status is BrainStatus.CONSCIOUS else f
            for f in factors)

    def _cat_brain(self, factors) -> Optional[Brain]:
        for f in factors:
            if isinstance(f, Brain) and f.agent == self.cat:
                return f
        return None
