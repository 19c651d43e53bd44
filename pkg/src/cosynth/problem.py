"""Problem instances: plant, sensors, agent capabilities, intruder.

An instance is loaded from a JSON-compatible document, validated strictly,
and then exposes every derived event set the component builders need.
"""

from __future__ import annotations

import itertools
import json
import os
import re
from dataclasses import dataclass
from functools import cached_property

from .automaton import Automaton, AutomatonError
from .events import DECODE, STOP, Event, command, off, on, parse_event, plain, sensor_off, sensor_on, sharp

__all__ = [
    "ControlConstraint",
    "InstanceError",
    "ProblemInstance",
    "SatBounds",
    "load_instance",
    "save_instance",
    "derive_constraints",
]


class InstanceError(ValueError):
    """Raised with the full list of violations found in a document."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class ControlConstraint:
    controllable: frozenset
    observable: frozenset

    def __post_init__(self):
        object.__setattr__(self, "controllable", frozenset(self.controllable))
        object.__setattr__(self, "observable", frozenset(self.observable))

    @property
    def consistent(self) -> bool:
        return self.controllable <= self.observable

    def union(self, other: "ControlConstraint") -> "ControlConstraint":
        return ControlConstraint(self.controllable | other.controllable, self.observable | other.observable)


@dataclass(frozen=True)
class SatBounds:
    k0: int = 1
    l0: int = 1
    k_max: int = 6
    l_max: int = 6
    horizon_cap: int = 10_000


def _names(xs) -> frozenset:
    return frozenset(str(x) for x in xs)


class ProblemInstance:
    """A validated synthesis problem.

    Base-level sets (``sigma``, ``sigma_c``, ...) hold event *names*; the
    decorated sets (``sigma_b``, ``gamma``, ...) hold :class:`Event` objects.
    """

    def __init__(self, *, name, events, controllable, observable, plant: Automaton, secret, avoid,
                 sensors, maskable, editor_observable, editable, edit_bound, intruder_observable,
                 intruder_commands, sat: SatBounds | None = None):
        self.name = name
        self.sigma = tuple(events)
        self.sigma_c = _names(controllable)
        self.sigma_o = _names(observable)
        self.plant = plant
        self.secret = frozenset(secret)
        self.avoid = frozenset(avoid)
        self.sensors = {int(k): _names(v) for k, v in sensors.items()}
        self.maskable = tuple(sorted(int(i) for i in maskable))
        self.sigma_oe = _names(editor_observable)
        self.sigma_se = _names(editable)
        self.edit_bound = edit_bound
        self.sigma_oi = _names(intruder_observable)
        self.gamma_o = frozenset(intruder_commands)
        self.sat = sat or SatBounds()
        problems = self.violations()
        if problems:
            raise InstanceError(problems)

    # -- base-level sets ---------------------------------------------------------

    @cached_property
    def sigma_set(self) -> frozenset:
        return frozenset(self.sigma)

    @property
    def sigma_uc(self) -> frozenset:
        return self.sigma_set - self.sigma_c

    @property
    def sigma_uo(self) -> frozenset:
        return self.sigma_set - self.sigma_o

    @cached_property
    def sigma_om(self) -> frozenset:
        """Events whose sensor can be masked."""
        out = set()
        for i in self.maskable:
            out |= self.sensors.get(i, frozenset())
        return frozenset(out)

    def violations(self) -> list[str]:
        v = []
        sig = set(self.sigma)
        if len(sig) != len(self.sigma):
            v.append("duplicate base events")
        for e in self.sigma:
            try:
                plain(e)
            except ValueError:
                v.append(f"invalid base event name {e!r}")
        if not self.sigma_c <= sig:
            v.append("controllable events not in alphabet")
        if not self.sigma_o <= sig:
            v.append("observable events not in alphabet")
        seen: set = set()
        for i, evs in sorted(self.sensors.items()):
            if i < 0:
                v.append(f"sensor id {i} must be non-negative")
            if seen & evs:
                v.append("sensor sets not disjoint")
            seen |= evs
            if not evs <= self.sigma_o:
                v.append(f"sensor {i} covers events outside the observable set")
        if seen != set(self.sigma_o):
            v.append("sensor sets do not cover the observable events")
        if not set(self.maskable) <= set(self.sensors):
            v.append("maskable sensors not declared")
        for e in self.sigma_om if not v else ():
            if re.fullmatch(r"s\d+", e):
                v.append(f"maskable event {e!r} clashes with sensor toggle names")
        if not self.sigma_oe <= self.sigma_o:
            v.append("editor-observable events must be observable")
        if not self.sigma_se <= self.sigma_oe:
            v.append("editable events must be editor-observable")
        if not isinstance(self.edit_bound, int) or isinstance(self.edit_bound, bool) or self.edit_bound < 1:
            v.append("edit bound U must be an integer >= 1")
        if not self.sigma_oi <= sig:
            v.append("intruder-observable events not in alphabet")
        if not v:
            gamma = set(self.gamma)
            if not self.gamma_o <= gamma:
                v.append("intruder-observable commands not a subset of the generated command set")
        labels = set(self.plant.labels)
        if not self.secret <= labels:
            v.append("secret states not in plant")
        if not self.avoid <= labels:
            v.append("avoid states not in plant")
        for ev in self.plant.alphabet:
            if ev.kind.value != "plain" or ev.name not in sig:
                v.append(f"plant event {ev} not a base event")
        s = self.sat
        if s.k0 < 1 or s.l0 < 1:
            v.append("k0 and l0 must be >= 1")
        if s.k_max < s.k0 or s.l_max < s.l0:
            v.append("k_max/l_max must not be below k0/l0")
        if s.horizon_cap < 1:
            v.append("horizon cap must be >= 1")
        return v

    # -- decorated alphabet --------------------------------------------------------

    @cached_property
    def gamma(self) -> tuple[Event, ...]:
        """All nonempty subsets of the controllable events, as commands."""
        cs = sorted(self.sigma_c)
        out = []
        for r in range(1, len(cs) + 1):
            for combo in itertools.combinations(cs, r):
                out.append(command(combo))
        return tuple(sorted(out))

    def lift(self, names) -> frozenset:
        """Base events as the sensors report them when switched on: masked
        events get their ``+on`` copy, the rest stay plain."""
        return frozenset(on(n) if n in self.sigma_om else plain(n) for n in names)

    def plains(self, names) -> frozenset:
        return frozenset(plain(n) for n in names)

    def ons(self, names) -> frozenset:
        return frozenset(on(n) for n in names)

    def offs(self, names) -> frozenset:
        return frozenset(off(n) for n in names)

    def sharps(self, names) -> frozenset:
        return frozenset(sharp(n) for n in names)

    @cached_property
    def toggles_on(self) -> frozenset:
        return frozenset(sensor_on(i) for i in self.maskable)

    @cached_property
    def toggles_off(self) -> frozenset:
        return frozenset(sensor_off(i) for i in self.maskable)

    @cached_property
    def plant_events(self) -> frozenset:
        """Relabelled plant alphabet: unmasked plain plus on/off copies."""
        return (self.plains(self.sigma_set - self.sigma_om) | self.ons(self.sigma_om)
                | self.offs(self.sigma_om))

    @cached_property
    def sigma_b(self) -> frozenset:
        """The full decorated alphabet shared by the closed loop."""
        return (self.plant_events | self.toggles_on | self.toggles_off | self.sharps(self.sigma_se)
                | frozenset(self.gamma) | {STOP, DECODE})

    @cached_property
    def sigma_8(self) -> frozenset:
        """What reaches the supervisor after masking and editing."""
        return (self.plains(self.sigma_o - self.sigma_om - self.sigma_se)
                | self.ons(self.sigma_om - self.sigma_se) | self.sharps(self.sigma_se))

    # -- serialization ---------------------------------------------------------------

    def to_document(self) -> dict:
        p = self.plant
        names = p.state_names()
        return {
            "name": self.name,
            "alphabet": {
                "events": list(self.sigma),
                "controllable": sorted(self.sigma_c),
                "observable": sorted(self.sigma_o),
            },
            "plant": {
                "states": names,
                "initial": names[p.initial],
                "marked": [names[q] for q in sorted(p.marked)],
                "transitions": [[names[q], str(ev), names[d]] for q in range(p.n_states)
                                for ev, d in sorted(p.trans[q].items())],
                "secret": [names[q] for q in range(p.n_states) if p.labels[q] in self.secret],
                "avoid": [names[q] for q in range(p.n_states) if p.labels[q] in self.avoid],
            },
            "sensors": [{"id": i, "events": sorted(evs)} for i, evs in sorted(self.sensors.items())],
            "maskable": list(self.maskable),
            "editor": {
                "observable": sorted(self.sigma_oe),
                "editable": sorted(self.sigma_se),
                "bound": self.edit_bound,
            },
            "intruder": {
                "observable_events": sorted(self.sigma_oi),
                "observable_commands": sorted(str(g) for g in self.gamma_o),
            },
            "sat": {
                "k0": self.sat.k0, "l0": self.sat.l0, "k_max": self.sat.k_max,
                "l_max": self.sat.l_max, "horizon_cap": self.sat.horizon_cap,
            },
        }

    def __repr__(self):
        return f"<ProblemInstance {self.name}: |Q|={self.plant.n_states}, Sigma={list(self.sigma)}>"


_REQUIRED = {
    "alphabet": ("events", "controllable", "observable"),
    "plant": ("states", "initial", "transitions"),
    "editor": ("observable", "editable", "bound"),
    "intruder": ("observable_events", "observable_commands"),
}


def load_instance(document) -> ProblemInstance:
    """Build a :class:`ProblemInstance` from a dict, a JSON string or a path.

    Raises :class:`InstanceError` listing every schema or set-relation
    violation found.
    """
    if isinstance(document, (str, os.PathLike)):
        text = str(document)
        if os.path.exists(text):
            with open(text) as fh:
                document = json.load(fh)
        else:
            try:
                document = json.loads(text)
            except json.JSONDecodeError as exc:
                raise InstanceError([f"not a file or JSON document: {exc}"]) from exc
    if not isinstance(document, dict):
        raise InstanceError(["instance document must be a JSON object"])
    v = []
    for section, keys in _REQUIRED.items():
        sec = document.get(section)
        if not isinstance(sec, dict):
            v.append(f"missing section {section!r}")
            continue
        for k in keys:
            if k not in sec:
                v.append(f"missing field {section}.{k}")
    if "sensors" not in document or not isinstance(document["sensors"], list):
        v.append("missing section 'sensors'")
    if v:
        raise InstanceError(v)

    alpha = document["alphabet"]
    try:
        events = [str(e) for e in alpha["events"]]
        for e in events:
            plain(e)
    except ValueError as exc:
        raise InstanceError([str(exc)]) from exc

    pl = document["plant"]
    try:
        edges = [(s, plain(str(e)), d) for s, e, d in pl["transitions"]]
        plant = Automaton.from_edges(pl["states"], [plain(e) for e in events], edges, pl["initial"],
                                     pl.get("marked", []), name="G")
    except (AutomatonError, ValueError, TypeError) as exc:
        raise InstanceError([f"plant: {exc}"]) from exc

    sensors = {}
    for s in document["sensors"]:
        try:
            sid = int(s["id"])
        except (KeyError, TypeError, ValueError):
            raise InstanceError([f"sensor entry {s!r} needs an integer id"])
        if sid in sensors:
            raise InstanceError([f"duplicate sensor id {sid}"])
        sensors[sid] = s.get("events", [])

    intr = document["intruder"]
    try:
        cmds = [parse_event(c) for c in intr["observable_commands"]]
    except ValueError as exc:
        raise InstanceError([f"intruder command: {exc}"]) from exc
    if any(c.kind.value != "command" for c in cmds):
        raise InstanceError(["intruder.observable_commands must be cmd{...} strings"])

    sat_doc = document.get("sat", {}) or {}
    defaults = SatBounds()
    try:
        sat = SatBounds(
            k0=int(sat_doc.get("k0", defaults.k0)),
            l0=int(sat_doc.get("l0", defaults.l0)),
            k_max=int(sat_doc.get("k_max", defaults.k_max)),
            l_max=int(sat_doc.get("l_max", defaults.l_max)),
            horizon_cap=int(sat_doc.get("horizon_cap") or defaults.horizon_cap),
        )
    except (TypeError, ValueError) as exc:
        raise InstanceError([f"sat bounds: {exc}"]) from exc

    ed = document["editor"]
    return ProblemInstance(
        name=document.get("name", "instance"),
        events=events,
        controllable=alpha["controllable"],
        observable=alpha["observable"],
        plant=plant,
        secret=pl.get("secret", []),
        avoid=pl.get("avoid", []),
        sensors=sensors,
        maskable=document.get("maskable", []),
        editor_observable=ed["observable"],
        editable=ed["editable"],
        edit_bound=ed["bound"],
        intruder_observable=intr["observable_events"],
        intruder_commands=cmds,
        sat=sat,
    )


def save_instance(inst: ProblemInstance, path=None) -> dict:
    doc = inst.to_document()
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
    return doc


def derive_constraints(inst: ProblemInstance):
    """Return ``(C_m, C_e, C_s, C_me)`` for the mask, editor, supervisor and
    the joint mask-editor."""
    toggles = inst.toggles_on | inst.toggles_off
    sharps = inst.sharps(inst.sigma_se)
    c_m = ControlConstraint(
        toggles,
        inst.plains(inst.sigma_o - inst.sigma_om) | inst.ons(inst.sigma_om) | toggles,
    )
    c_e = ControlConstraint(
        sharps | {STOP},
        inst.plains(inst.sigma_oe - inst.sigma_om) | inst.ons(inst.sigma_om & inst.sigma_oe) | sharps | {STOP},
    )
    c_s = ControlConstraint(frozenset(inst.gamma), inst.sigma_8 | frozenset(inst.gamma))
    return c_m, c_e, c_s, c_m.union(c_e)
