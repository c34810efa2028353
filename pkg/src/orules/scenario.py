"""Scenario files: parsing, validation, serialisation, initial state.

The format is line oriented::

    # comment
    name = cat_v1
    version = CatV1

    [params]
    half_life = 1.0
    transit_time = 0.3

    [agents]
    cat = cat

    [events]

Times are in units of ``half_life`` unless the preamble sets
``time_unit = absolute``.  See docs/scn_format.md for the full grammar.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .dynamics import DynamicsParams
from .errors import (InvalidValue, MissingRequired, OrderViolation,
                     ScenarioSyntaxError, UnknownKey)
from .rules import CUTOFF, LOOK, OBSERVE, RING, ScheduledEvent
from .state import (REST, Brain, BrainStatus, Detector, DevicePulse,
                    Indicator, InternalClock, StateGraph)
from .templates import CompletionMap, Version

DEFAULT_BINS = 100
DEFAULT_PHYS_RATE = 50.0  # per half-life
MAX_TARGET_HAZARD = 0.09

_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_SECTION = re.compile(r"\[\s*([A-Za-z_]+)\s*\]")
_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_INTEGER = re.compile(r"[+]?\d+")

PREAMBLE_KEYS = ("name", "version", "time_unit")
PARAM_KEYS = ("half_life", "transit_time", "phys_rate", "bins", "pulse_width", "substeps", "dt")
EVENT_KEYS = ("t_look", "t_ob", "t_ff")
ROLES = ("cat", "observer")
SECTIONS = ("params", "agents", "events")


@dataclass(frozen=True)
class EventSchedule:
    """Time-ordered events; always holds exactly one cutoff."""

    events: tuple = ()

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def time_of(self, kind: str) -> Optional[float]:
        for e in self.events:
            if e.kind == kind:
                return e.time
        return None


@dataclass(frozen=True)
class Scenario:
    name: str
    version: Version
    params: DynamicsParams
    events: EventSchedule
    agents: tuple = ()

    def agent(self, role: str) -> Optional[str]:
        for aid, r in self.agents:
            if r == role:
                return aid
        return None


class _Entry:
    __slots__ = ("key", "value", "line", "kcol", "vcol")

    def __init__(self, key, value, line, kcol, vcol):
        self.key, self.value, self.line, self.kcol, self.vcol = key, value, line, kcol, vcol


def _tokenize(text: str):
    """Split into sections of entries; raises on malformed lines."""
    sections = {"": {}}
    headers = {}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.lstrip()
        if not stripped:
            continue
        col = len(line) - len(stripped) + 1
        if stripped.startswith("["):
            m = _SECTION.fullmatch(stripped)
            if not m:
                raise ScenarioSyntaxError(f"malformed section header {stripped!r}", lineno, col)
            name = m.group(1)
            if name not in SECTIONS:
                raise UnknownKey(f"unknown section [{name}]", lineno, col)
            if name in sections:
                raise ScenarioSyntaxError(f"section [{name}] appears twice", lineno, col)
            sections[name] = {}
            headers[name] = lineno
            current = name
            continue
        if "=" not in stripped:
            raise ScenarioSyntaxError("expected 'key = value'", lineno, col)
        key_part, value_part = stripped.split("=", 1)
        key = key_part.strip()
        if not _KEY.fullmatch(key):
            raise ScenarioSyntaxError(f"malformed key {key!r}", lineno, col)
        value = value_part.strip()
        vcol = col + len(key_part) + 1 + (len(value_part) - len(value_part.lstrip()))
        if not value:
            raise ScenarioSyntaxError(f"missing value for {key!r}", lineno, vcol)
        if key in sections[current]:
            raise ScenarioSyntaxError(f"duplicate key {key!r}", lineno, col)
        sections[current][key] = _Entry(key, value, lineno, col, vcol)
    return sections, headers


def _number(e: _Entry, *, allow_zero=False) -> float:
    if not _NUMBER.fullmatch(e.value):
        raise ScenarioSyntaxError(f"{e.key}: expected a decimal number, got {e.value!r}", e.line, e.vcol)
    v = float(e.value)
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        raise InvalidValue(f"{e.key} must be {'non-negative' if allow_zero else 'positive'}",
                           e.line, e.vcol)
    return v


def _integer(e: _Entry) -> int:
    if not _INTEGER.fullmatch(e.value):
        raise ScenarioSyntaxError(f"{e.key}: expected an integer, got {e.value!r}", e.line, e.vcol)
    v = int(e.value)
    if v < 1:
        raise InvalidValue(f"{e.key} must be at least 1", e.line, e.vcol)
    return v


def _end(text: str) -> int:
    return max(1, len(text.splitlines()) + 1)


def auto_substeps(version: Version, half_life: float, bin_time: float, phys_rate: float) -> int:
    """Fewest substeps keeping the per-step hit probability under 0.09."""
    rate = math.log(2.0) / half_life
    if version.has_observer:
        rate += phys_rate
    return max(1, math.ceil(rate * bin_time / MAX_TARGET_HAZARD - 1e-12))


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text.  Every error carries line/column."""
    sections, headers = _tokenize(text)
    pre = sections[""]
    end = _end(text)

    for key, e in pre.items():
        if key not in PREAMBLE_KEYS:
            raise UnknownKey(f"unknown key {key!r} outside any section", e.line, e.kcol)
    for req in ("name", "version"):
        if req not in pre:
            raise MissingRequired(f"missing required key {req!r}", end if text.strip() else 1, 1)
    ve = pre["version"]
    try:
        version = Version(ve.value)
    except ValueError:
        raise InvalidValue(f"unknown version {ve.value!r}; expected one of "
                           + ", ".join(v.value for v in Version), ve.line, ve.vcol) from None
    unit = "half_life"
    if "time_unit" in pre:
        ue = pre["time_unit"]
        if ue.value not in ("half_life", "absolute"):
            raise InvalidValue("time_unit must be 'half_life' or 'absolute'", ue.line, ue.vcol)
        unit = ue.value

    params = sections.get("params")
    if params is None:
        raise MissingRequired("missing [params] section", end, 1)
    for key, e in params.items():
        if key not in PARAM_KEYS:
            raise UnknownKey(f"unknown parameter {key!r}", e.line, e.kcol)
    for req in ("half_life", "transit_time"):
        if req not in params:
            raise MissingRequired(f"missing required parameter {req!r}", headers["params"], 1)

    half_life = _number(params["half_life"])
    scale = half_life if unit == "half_life" else 1.0
    transit = _number(params["transit_time"]) * scale
    phys_rate = (_number(params["phys_rate"]) / scale if "phys_rate" in params
                 else DEFAULT_PHYS_RATE / half_life)
    bins = _integer(params["bins"]) if "bins" in params else DEFAULT_BINS
    width = _integer(params["pulse_width"]) if "pulse_width" in params else 1
    if width > bins:
        e = params["pulse_width"]
        raise InvalidValue("pulse_width cannot exceed bins", e.line, e.vcol)
    bin_time = transit / bins
    if "substeps" in params and "dt" in params:
        e = params["dt"]
        raise InvalidValue("give either substeps or dt, not both", e.line, e.kcol)
    if "substeps" in params:
        substeps = _integer(params["substeps"])
    elif "dt" in params:
        e = params["dt"]
        substeps = substeps_for_dt(bin_time, _number(e) * scale, e.line, e.vcol)
    else:
        substeps = auto_substeps(version, half_life, bin_time, phys_rate)
    dyn = DynamicsParams(half_life=half_life, transit_time=transit, phys_rate=phys_rate,
                         bins=bins, pulse_width=width, substeps=substeps)

    agents = _agents(sections.get("agents", {}), version, headers.get("agents", end))
    events = _events(sections.get("events", {}), version, scale, half_life, agents,
                     headers.get("events", end))
    return Scenario(pre["name"].value, version, dyn, events, agents)


def substeps_for_dt(bin_time: float, dt: float, line: int = 1, col: int = 1) -> int:
    ratio = bin_time / dt
    m = round(ratio)
    if m < 1 or abs(ratio - m) > 1e-9 * ratio:
        raise InvalidValue(f"dt must divide the bin time {bin_time!r} into whole substeps", line, col)
    return int(m)


def _agents(entries: dict, version: Version, header_line: int) -> tuple:
    agents = []
    for key, e in entries.items():
        if e.value not in ROLES:
            raise InvalidValue(f"agent role must be 'cat' or 'observer', got {e.value!r}", e.line, e.vcol)
        agents.append((key, e.value, e))
    for role, wanted in (("cat", version.has_cat), ("observer", version.has_observer)):
        found = [a for a in agents if a[1] == role]
        if wanted and not found:
            raise MissingRequired(f"{version.value} needs a {role} agent", header_line, 1)
        if len(found) > 1 or (found and not wanted):
            e = found[-1][2]
            raise InvalidValue(f"{version.value} takes {'one' if wanted else 'no'} {role} agent",
                               e.line, e.kcol)
    return tuple((a, r) for a, r, _ in agents)


def _events(entries: dict, version: Version, scale: float, half_life: float,
            agents: tuple, header_line: int) -> EventSchedule:
    allowed = set()
    if version.has_observer:
        allowed |= {"t_look", "t_ob"}
    if version.has_clock:
        allowed.add("t_ff")
    for key, e in entries.items():
        if key not in EVENT_KEYS:
            raise UnknownKey(f"unknown event {key!r}", e.line, e.kcol)
        if key not in allowed:
            raise UnknownKey(f"{version.value} has no {key!r} event", e.line, e.kcol)
    for req in sorted(allowed):
        if req not in entries:
            raise MissingRequired(f"{version.value} needs {req!r}", header_line, 1)
    times = {k: _number(e, allow_zero=True) * scale for k, e in entries.items()}
    if "t_ob" in times and times["t_ob"] < times["t_look"]:
        e = entries["t_ob"]
        raise OrderViolation("t_ob must not precede t_look", e.line, e.vcol)
    observer = next((a for a, r in agents if r == "observer"), None)
    evs = [ScheduledEvent(half_life, CUTOFF)]
    if "t_look" in times:
        evs.append(ScheduledEvent(times["t_look"], LOOK, observer))
        evs.append(ScheduledEvent(times["t_ob"], OBSERVE, observer))
    if "t_ff" in times:
        evs.append(ScheduledEvent(times["t_ff"], RING))
    order = {LOOK: 0, OBSERVE: 1, CUTOFF: 2, RING: 3}
    evs.sort(key=lambda e: (e.time, order[e.kind]))
    return EventSchedule(tuple(evs))


def serialize_scenario(sc: Scenario) -> str:
    """Inverse of ``parse_scenario`` (absolute time units, exact floats)."""
    p = sc.params
    lines = [
        f"name = {sc.name}",
        f"version = {sc.version.value}",
        "time_unit = absolute",
        "",
        "[params]",
        f"half_life = {p.half_life!r}",
        f"transit_time = {p.transit_time!r}",
        f"phys_rate = {p.phys_rate!r}",
        f"bins = {p.bins}",
        f"pulse_width = {p.pulse_width}",
        f"substeps = {p.substeps}",
        "",
        "[agents]",
    ]
    lines += [f"{a} = {r}" for a, r in sc.agents]
    lines += ["", "[events]"]
    names = {LOOK: "t_look", OBSERVE: "t_ob", RING: "t_ff"}
    lines += [f"{names[e.kind]} = {e.time!r}" for e in sc.events if e.kind in names]
    return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


FIXTURES = ("apparatus", "apparatus_observer", "cat_v1", "cat_v1_observer",
            "cat_v2", "cat_v2_observer", "cat_v2_natural_wake")


def fixture_text(name: str) -> str:
    """Text of one of the seven shipped scenario files."""
    stem = name[:-4] if name.endswith(".scn") else name
    return resources.files("orules").joinpath("fixtures").joinpath(stem + ".scn").read_text("utf-8")


def fixture(name: str) -> Scenario:
    return parse_scenario(fixture_text(name))


def build_initial_state(sc: Scenario) -> tuple[StateGraph, CompletionMap]:
    """Initial product state, weight 1, plus the version's completion map."""
    cat = sc.agent("cat")
    cmap = CompletionMap(sc.version, cat)
    factors = [Detector(0), DevicePulse(REST)]
    if sc.version.has_clock:
        factors.append(InternalClock())
    if not sc.version.has_cat:
        factors.append(Indicator("i0"))
    elif sc.version.family == "v1":
        factors.append(Brain(cat, "C0", BrainStatus.CONSCIOUS))
    else:
        factors.append(Brain(cat, "U", BrainStatus.UNCONSCIOUS))
    for aid, role in sc.agents:
        if role == "observer":
            factors.append(Brain(aid, "X", BrainStatus.EXTERNAL))
    g, _ = StateGraph(completion=cmap).add(factors, 1.0)
    return g, cmap
