"""Builders for the component automata of the closed loop.

Each builder transcribes one transition-rule list: the mask constraint of a
sensor, the edit constraint, the supervisor constraint, the command
execution component, the relabelled plant, and the two intruders (with and
without command eavesdropping).
"""

from __future__ import annotations

from dataclasses import dataclass

from .automaton import Automaton, Belief, mark_all, observer, relabel, sync_product
from .events import DECODE, STOP, Kind, off, on, plain, sensor_off, sensor_on, sharp
from .problem import ProblemInstance

__all__ = [
    "ComponentSet",
    "UNSAFE",
    "EMPTY_BELIEF",
    "build_mask_constraint",
    "build_mask_constraints",
    "build_edit_constraints",
    "build_supervisor_constraints",
    "build_command_execution",
    "relabel_plant",
    "build_intruder",
    "build_weak_intruder",
    "build_components",
    "mc_alphabet",
    "mc_rules",
    "ec_rules",
    "sc_rules",
    "ce_rules",
    "intruder_view",
    "intruder_observed",
]

UNSAFE = "unsafe"
EMPTY_BELIEF = Belief(())


def mc_alphabet(inst: ProblemInstance, i: int) -> frozenset:
    return (inst.plant_events | {sensor_on(i), sensor_off(i)} | inst.sharps(inst.sigma_se)
            | frozenset(inst.gamma) | {STOP, DECODE})


def mc_rules(inst: ProblemInstance, i: int):
    """Transition rules of one sensor's mask constraint as ``(src, events, dst)``."""
    s_i = inst.sensors[i]
    om = inst.sigma_om
    sharps_stop = inst.sharps(inst.sigma_se) | {STOP}
    tail = inst.plains(inst.sigma_uo) | sharps_stop | frozenset(inst.gamma) | {DECODE}
    sigma1 = inst.ons(om) | inst.plains(inst.sigma_o - om)
    sigma3 = inst.offs(om - s_i) | tail
    sigma2 = inst.ons(om - s_i) | inst.plains(inst.sigma_o - om)
    sigma4 = inst.offs(om) | tail
    return [
        ("init", {sensor_on(i)}, "on"),
        ("init", {sensor_off(i)}, "off"),
        ("on", sigma1, "init"),
        ("on", sigma3, "on"),
        ("off", sigma2, "init"),
        ("off", sigma4, "off"),
        ("init", sharps_stop, "init"),
    ]


def _from_rules(states, alphabet, rules, initial, marked, name):
    edges = [(src, ev, dst) for src, evs, dst in rules for ev in sorted(evs)]
    return Automaton.from_edges(states, alphabet, edges, initial, marked, name=name)


def build_mask_constraint(inst: ProblemInstance, i: int) -> Automaton:
    if i not in inst.maskable:
        raise ValueError(f"sensor {i} is not maskable")
    # all three states marked: the constraint imposes no liveness
    return _from_rules(["init", "on", "off"], mc_alphabet(inst, i), mc_rules(inst, i), "init", None,
                       f"MC{i}")


def build_mask_constraints(inst: ProblemInstance) -> Automaton:
    if not inst.maskable:
        alphabet = inst.plant_events | inst.sharps(inst.sigma_se) | frozenset(inst.gamma) | {STOP, DECODE}
        edges = [("init", ev, "init") for ev in sorted(alphabet)]
        return Automaton.from_edges(["init"], alphabet, edges, "init", None, name="MC")
    parts = [build_mask_constraint(inst, i) for i in inst.maskable]
    if len(parts) == 1:
        return parts[0]
    return sync_product(parts, name="MC")


def ec_rules(inst: ProblemInstance):
    om, oe, se = inst.sigma_om, inst.sigma_oe, inst.sigma_se
    toggles = inst.toggles_on | inst.toggles_off
    U = inst.edit_bound
    sigma7 = (inst.plains(inst.sigma_set - om - oe) | inst.ons(om - oe) | inst.offs(om) | toggles)
    sigma6 = inst.plains(se - om) | inst.ons(om & se)
    sigma5 = inst.plains(oe - om - se) | inst.ons(om & (oe - se))
    sharps = inst.sharps(se)
    rules = [
        ("init", sigma7 | frozenset(inst.gamma) | {DECODE}, "init"),
        ("init", sigma6, "q0"),
        ("init", sigma5, "hat1"),
    ]
    for n in range(U):
        rules.append((f"q{n}", sharps, f"q{n + 1}"))
    if U >= 2:
        rules.append(("hat1", sharps, "q2"))
    for n in range(U + 1):
        rules.append((f"q{n}", {STOP}, "init"))
    rules.append(("hat1", {STOP}, "init"))
    rules.append(("q0", toggles, "q0"))
    rules.append(("hat1", toggles, "hat1"))
    return rules


def build_edit_constraints(inst: ProblemInstance) -> Automaton:
    states = ["init", "hat1"] + [f"q{n}" for n in range(inst.edit_bound + 1)]
    return _from_rules(states, inst.sigma_b, ec_rules(inst), "init", ["init"], "EC")


def sc_rules(inst: ProblemInstance):
    gamma = frozenset(inst.gamma)
    s8 = inst.sigma_8
    return [
        ("init", inst.sigma_b - gamma, "init"),
        ("init", gamma, "issue"),
        ("issue", s8, "init"),
        ("issue", inst.sigma_b - s8 - gamma, "issue"),
    ]


def build_supervisor_constraints(inst: ProblemInstance) -> Automaton:
    return _from_rules(["init", "issue"], inst.sigma_b, sc_rules(inst), "init", None, "SC")


def ce_rules(inst: ProblemInstance):
    om, uo, o, uc = inst.sigma_om, inst.sigma_uo, inst.sigma_o, inst.sigma_uc
    rules = []
    for g in inst.gamma:
        q = str(g)
        allowed = g.members | uc
        rules.append(("init", {g}, q))
        rules.append((q, inst.plains(allowed & uo) | inst.offs(allowed & om), q))
        rules.append((q, inst.plains(allowed & (o - om)), "init"))
        rules.append((q, inst.ons(allowed & om), "init"))
    rules.append(("init", inst.plains(uc - om), "init"))
    rules.append(("init", inst.ons(uc & om) | inst.offs(uc & om), "init"))
    return rules


def build_command_execution(inst: ProblemInstance) -> Automaton:
    states = ["init"] + [str(g) for g in inst.gamma]
    alphabet = frozenset(inst.gamma) | inst.plant_events
    return _from_rules(states, alphabet, ce_rules(inst), "init", ["init"], "CE")


def relabel_plant(inst: ProblemInstance) -> Automaton:
    """The plant with every masked event split into ``+on``/``+off`` twins."""
    g = inst.plant
    rows = []
    for row in g.trans:
        new = {}
        for ev, d in row.items():
            if ev.name in inst.sigma_om:
                new[on(ev.name)] = d
                new[off(ev.name)] = d
            else:
                new[ev] = d
        rows.append(new)
    return Automaton(g.labels, inst.plant_events, rows, g.initial, g.marked, name="G")


def _drop_off(aut: Automaton, name: str) -> Automaton:
    keep = frozenset(ev for ev in aut.alphabet if ev.kind is not Kind.OFF)
    rows = [{ev: d for ev, d in row.items() if ev in keep} for row in aut.trans]
    return Automaton(aut.labels, keep, rows, aut.initial, aut.marked, name=name, components=aut.components)


def intruder_view(inst: ProblemInstance, with_commands: bool) -> frozenset:
    """Events the intruder observes in the off-free plant model."""
    view = inst.lift(inst.sigma_oi)
    if with_commands:
        view = view | inst.gamma_o
    return view


def intruder_observed(inst: ProblemInstance) -> frozenset:
    """Closed-loop events that move the intruder: its view with editable
    outputs replaced by their ``#`` copies."""
    sharp_of = _sharp_map(inst)
    return frozenset(sharp_of.get(ev, ev) for ev in intruder_view(inst, True))


def _sharp_map(inst: ProblemInstance) -> dict:
    m = {}
    for n in inst.sigma_se:
        src = on(n) if n in inst.sigma_om else plain(n)
        m[src] = sharp(n)
    return m


def _finish_intruder(inst, temp: Automaton, is_secret, name: str) -> Automaton:
    """Relabel editable events to ``#`` copies, add ``unsafe`` and decode,
    and make the empty belief and ``unsafe`` absorbing."""
    temp = relabel(temp, _sharp_map(inst))
    alphabet = temp.alphabet | {DECODE}
    n = temp.n_states
    rows = [dict(r) for r in temp.trans] + [{}]
    labels = list(temp.labels) + [UNSAFE]
    loop_events = sorted(alphabet - {DECODE})
    for q, lab in enumerate(temp.labels):
        if lab.is_empty:
            rows[q] = {ev: q for ev in loop_events}
        elif all(is_secret(m) for m in lab):
            rows[q][DECODE] = n
    rows[n] = {ev: n for ev in loop_events}
    marked = [q for q, lab in enumerate(temp.labels) if not lab.is_empty]
    return Automaton(labels, alphabet, rows, temp.initial, marked, name=name)


def build_intruder(inst: ProblemInstance, ce: Automaton | None = None) -> Automaton:
    """Sensor-actuator eavesdropping intruder."""
    if ce is None:
        ce = build_command_execution(inst)
    g1 = _drop_off(relabel_plant(inst), "G1")
    ce1 = _drop_off(ce, "CE1")
    prior = mark_all(sync_product([g1, ce1], name="G1||CE1"))
    temp = observer(prior, intruder_view(inst, True), totalize=True, name="I_temp")
    secret = inst.secret
    return _finish_intruder(inst, temp, lambda m: m[0] in secret, "I")


def build_weak_intruder(inst: ProblemInstance) -> Automaton:
    """Intruder that eavesdrops sensors only (no commands)."""
    g1 = mark_all(_drop_off(relabel_plant(inst), "G1"))
    temp = observer(g1, intruder_view(inst, False), totalize=True, name="Iw_temp")
    secret = inst.secret
    return _finish_intruder(inst, temp, lambda m: m in secret, "Iw")


@dataclass
class ComponentSet:
    G: Automaton
    CE: Automaton
    MC: Automaton
    MC_parts: dict
    EC: Automaton
    SC: Automaton
    I: Automaton
    I_weak: Automaton

    def base(self) -> list[Automaton]:
        """The factors shared by every closed-loop product, in order."""
        return [self.G, self.CE, self.MC, self.EC, self.SC]

    def as_dict(self) -> dict:
        out = {"G": self.G, "CE": self.CE, "MC": self.MC, "EC": self.EC, "SC": self.SC,
               "I": self.I, "Iw": self.I_weak}
        out.update({f"MC{i}": a for i, a in self.MC_parts.items()})
        return out


def build_components(inst: ProblemInstance) -> ComponentSet:
    ce = build_command_execution(inst)
    return ComponentSet(
        G=relabel_plant(inst),
        CE=ce,
        MC=build_mask_constraints(inst),
        MC_parts={i: build_mask_constraint(inst, i) for i in inst.maskable},
        EC=build_edit_constraints(inst),
        SC=build_supervisor_constraints(inst),
        I=build_intruder(inst, ce),
        I_weak=build_weak_intruder(inst),
    )
