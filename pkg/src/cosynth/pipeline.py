"""End-to-end co-synthesis and independent closed-loop verification.

:func:`run_procedure` chains the nine steps (components, weak intruder,
ensemble plant and requirement, ensemble synthesis, SAT decomposition,
supervisor plant and requirement, supervisor synthesis) and then verifies
the result on the full nine-factor product with :func:`verify_closed_loop`.
Verification uses only products and graph searches from
:mod:`cosynth.automaton`; it never looks at synthesis internals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .automaton import Automaton, StateBudgetExceeded, restrict, sync_product
from .components import EMPTY_BELIEF, UNSAFE, ComponentSet, build_components
from .events import Event, parse_event
from .problem import ProblemInstance, SatBounds, derive_constraints
from .sat.decompose import DEFAULT_MAX_CLAUSES, Decomposition, DecompositionFailed, decompose
from .synthesis import AgentAutomaton, NoSolution, SynthesisError, SynthesisGoal, synthesize

__all__ = [
    "STEPS",
    "StepRecord",
    "FailurePoint",
    "SynthesisResult",
    "VerificationReport",
    "TraceRejected",
    "SimulationStep",
    "ensemble_plant",
    "supervisor_plant",
    "closed_loop_product",
    "run_procedure",
    "run_procedure1",
    "verify_closed_loop",
    "simulate_trace",
    "runs_with_plant_word",
    "project",
]

STEPS = {
    1: "build components",
    2: "build weak intruder",
    3: "ensemble plant",
    4: "ensemble requirement",
    5: "synthesize ensemble",
    6: "decompose ensemble",
    7: "supervisor plant",
    8: "supervisor requirement",
    9: "synthesize supervisor",
    10: "verify closed loop",
}

_LOOP_ORDER = ("G", "CE", "MC", "EC", "SC", "I", "M", "E", "S")


@dataclass
class StepRecord:
    step: int
    seconds: float
    sizes: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return STEPS[self.step]

    def as_dict(self, timings: bool = True) -> dict:
        out = {"step": self.step, "name": self.name, "sizes": self.sizes}
        if timings:
            out["seconds"] = round(self.seconds, 4)
        return out


@dataclass
class FailurePoint:
    step: int
    kind: str
    message: str
    trace: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"step": self.step, "name": STEPS[self.step], "kind": self.kind,
                "message": self.message, "trace": list(self.trace)}


@dataclass
class VerificationReport:
    opacity: bool
    covertness: bool
    avoid_safety: bool
    nonblocking: bool
    witnesses: dict = field(default_factory=dict)
    n_states: int = 0
    n_transitions: int = 0

    @property
    def all_pass(self) -> bool:
        return self.opacity and self.covertness and self.avoid_safety and self.nonblocking

    def as_dict(self) -> dict:
        return {
            "opacity": self.opacity,
            "covertness": self.covertness,
            "avoid_safety": self.avoid_safety,
            "nonblocking": self.nonblocking,
            "all_pass": self.all_pass,
            "witnesses": {k: [str(e) for e in w] for k, w in self.witnesses.items()},
            "closed_loop_states": self.n_states,
            "closed_loop_transitions": self.n_transitions,
        }


@dataclass
class SynthesisResult:
    instance: ProblemInstance
    components: ComponentSet | None = None
    ME: AgentAutomaton | None = None
    M: AgentAutomaton | None = None
    E: AgentAutomaton | None = None
    S: AgentAutomaton | None = None
    decomposition: Decomposition | None = None
    report: VerificationReport | None = None
    steps: list = field(default_factory=list)
    failure: FailurePoint | None = None
    decompositions_tried: int = 0

    @property
    def ok(self) -> bool:
        return self.failure is None and self.report is not None and self.report.all_pass

    def manifest(self, files: dict | None = None, timings: bool = True) -> dict:
        """JSON-ready run summary; ``timings=False`` makes it reproducible byte for byte."""
        doc = {
            "instance": self.instance.name,
            "success": self.ok,
            "steps": [s.as_dict(timings) for s in self.steps],
            "failure": self.failure.as_dict() if self.failure else None,
            "verification": self.report.as_dict() if self.report else None,
            "decompositions_tried": self.decompositions_tried,
        }
        dec = self.decomposition
        if dec is not None:
            doc["decomposition"] = {
                "k": dec.k, "l": dec.l, "horizon": dec.horizon,
                "marking_saturated": dec.marking_saturated,
                "attempts": [_attempt_dict(a, timings) for a in dec.attempts],
            }
        for key in ("ME", "M", "E", "S"):
            agent = getattr(self, key)
            if agent is not None:
                doc.setdefault("agents", {})[key] = {"states": agent.automaton.n_states,
                                                     "transitions": agent.automaton.n_transitions}
        if files:
            doc["files"] = dict(files)
        return doc


def _attempt_dict(attempt, timings: bool) -> dict:
    out = attempt.as_dict()
    if not timings:
        out.pop("seconds", None)
    return out


class TraceRejected(ValueError):
    """A simulated event is undefined in one of the closed-loop factors."""

    def __init__(self, index: int, event, factor: str, visited):
        super().__init__(f"event {index} ({event}) is undefined in factor {factor}")
        self.index = index
        self.event = event
        self.factor = factor
        self.visited = list(visited)


@dataclass
class SimulationStep:
    event: Event | None
    state: tuple
    belief: object

    def as_dict(self) -> dict:
        return {"event": None if self.event is None else str(self.event),
                "state": [str(x) for x in self.state], "intruder": str(self.belief)}


# -- products ---------------------------------------------------------------------


def _intruder_bad(label) -> bool:
    return label == UNSAFE or label == EMPTY_BELIEF


def ensemble_plant(cs: ComponentSet) -> tuple[Automaton, Automaton]:
    """``G||CE||MC||EC||SC||Iw`` and its restriction to states whose weak
    intruder coordinate is neither ``unsafe`` nor the empty belief."""
    plant = sync_product(cs.base() + [cs.I_weak], name="P_ME")
    keep = [q for q in range(plant.n_states) if not _intruder_bad(plant.coordinate(q, "Iw"))]
    return plant, restrict(plant, keep, name="P_ME^r")


def supervisor_plant(inst: ProblemInstance, cs: ComponentSet, M: Automaton,
                     E: Automaton) -> tuple[Automaton, Automaton]:
    """``G||CE||MC||EC||SC||I||M||E`` and its restriction that drops avoid
    states and states with intruder at ``unsafe`` or the empty belief."""
    plant = sync_product(cs.base() + [cs.I, M, E], name="P_S")
    avoid = inst.avoid
    keep = [q for q in range(plant.n_states)
            if plant.coordinate(q, "G") not in avoid and not _intruder_bad(plant.coordinate(q, "I"))]
    return plant, restrict(plant, keep, name="P_S^r")


def _renamed(aut: Automaton, name: str) -> Automaton:
    if aut.name == name and aut.components == [name]:
        return aut
    return Automaton(aut.labels, aut.alphabet, aut.trans, aut.initial, aut.marked, name=name)


def _agent_automaton(agent) -> Automaton:
    return agent.automaton if isinstance(agent, AgentAutomaton) else agent


def closed_loop_product(inst: ProblemInstance, M, E, S, components: ComponentSet | None = None) -> Automaton:
    """The nine-factor product ``G||CE||MC||EC||SC||I||M||E||S``."""
    cs = components or build_components(inst)
    agents = [_renamed(_agent_automaton(a), n) for a, n in ((M, "M"), (E, "E"), (S, "S"))]
    expected = inst.sigma_b
    for a in agents:
        if a.alphabet != expected:
            extra = sorted(str(e) for e in a.alphabet - expected)
            missing = sorted(str(e) for e in expected - a.alphabet)
            raise ValueError(f"agent {a.name} alphabet mismatch: extra {extra[:5]}, missing {missing[:5]}")
    return sync_product(cs.base() + [cs.I] + agents, name="B")


# -- verification -----------------------------------------------------------------


def verify_closed_loop(inst: ProblemInstance, M, E, S, components: ComponentSet | None = None,
                       product: Automaton | None = None) -> VerificationReport:
    """Opacity, covertness, avoid-safety and nonblocking of the closed loop.

    Each failing property carries the shortest word reaching a violating
    state (for nonblocking: a state that cannot reach a marked state).
    """
    loop = product if product is not None else closed_loop_product(inst, M, E, S, components)
    g = loop.components.index("G")
    i = loop.components.index("I")
    labels = loop.labels
    unsafe = {q for q in range(loop.n_states) if labels[q][i] == UNSAFE}
    empty = {q for q in range(loop.n_states) if labels[q][i] == EMPTY_BELIEF}
    avoid = {q for q in range(loop.n_states) if labels[q][g] in inst.avoid}
    blocking = set(range(loop.n_states)) - loop.coaccessible_states()
    witnesses = {}
    for key, bad in (("opacity", unsafe), ("covertness", empty), ("avoid_safety", avoid),
                     ("nonblocking", blocking)):
        if bad:
            witnesses[key] = loop.shortest_path(bad.__contains__)
    return VerificationReport(
        opacity=not unsafe,
        covertness=not empty,
        avoid_safety=not avoid,
        nonblocking=not blocking,
        witnesses=witnesses,
        n_states=loop.n_states,
        n_transitions=loop.n_transitions,
    )


def _factor_name(cs: ComponentSet, name: str, q: int, ev) -> str:
    # name the single sensor constraint that blocks inside the MC product
    if name != "MC" or len(cs.MC_parts) < 2:
        return name
    label = cs.MC.labels[q]
    for (i, part), sub in zip(sorted(cs.MC_parts.items()), label):
        if ev in part.alphabet and part.step(part.index_of(sub), ev) is None:
            return f"MC{i}"
    return name


def simulate_trace(inst: ProblemInstance, M, E, S, trace, components: ComponentSet | None = None):
    """Replay ``trace`` factor by factor through the closed loop.

    Returns one :class:`SimulationStep` per visited state, the initial one
    first.  Raises :class:`TraceRejected` naming the first factor that
    cannot take an event.
    """
    cs = components or build_components(inst)
    factors = cs.base() + [cs.I] + [_renamed(_agent_automaton(a), n)
                                    for a, n in ((M, "M"), (E, "E"), (S, "S"))]
    names = list(_LOOP_ORDER)
    state = [f.initial for f in factors]
    i_pos = names.index("I")

    def snapshot(ev):
        return SimulationStep(ev, tuple(f.labels[q] for f, q in zip(factors, state)),
                              factors[i_pos].labels[state[i_pos]])

    visited = [snapshot(None)]
    for n, raw in enumerate(trace):
        ev = parse_event(raw) if isinstance(raw, str) else raw
        owners = [fi for fi, f in enumerate(factors) if ev in f.alphabet]
        if not owners:
            raise TraceRejected(n, ev, "<none: event outside every alphabet>", visited)
        nxt = list(state)
        for fi in owners:
            d = factors[fi].trans[state[fi]].get(ev)
            if d is None:
                raise TraceRejected(n, ev, _factor_name(cs, names[fi], state[fi], ev), visited)
            nxt[fi] = d
        state = nxt
        visited.append(snapshot(ev))
    return visited


def project(word, alphabet) -> list:
    return [ev for ev in word if ev in alphabet]


def runs_with_plant_word(loop: Automaton, plant_alphabet, pattern, tail: int = 8, limit: int = 100_000):
    """Words of ``loop`` whose projection onto ``plant_alphabet`` follows
    ``pattern`` (one set of admissible events per position).

    Each word is yielded once the pattern is consumed, and again after each
    of up to ``tail`` further non-plant events.  A state is not revisited
    between two plant events, which bounds the search.
    """
    pattern = [frozenset(p) for p in pattern]
    n = len(pattern)
    word: list = []
    found = 0

    def dfs(q, pos, on_path, extra):
        nonlocal found
        if pos == n:
            found += 1
            yield list(word)
            if extra == tail or found >= limit:
                return
        for ev in sorted(loop.trans[q]):
            d = loop.trans[q][ev]
            if ev in plant_alphabet:
                if pos == n or ev not in pattern[pos]:
                    continue
                word.append(ev)
                yield from dfs(d, pos + 1, {d}, 0)
                word.pop()
            elif d not in on_path:
                word.append(ev)
                yield from dfs(d, pos, on_path | {d}, extra + 1 if pos == n else 0)
                word.pop()
            if found >= limit:
                return

    yield from dfs(loop.initial, 0, {loop.initial}, 0)


# -- the procedure ----------------------------------------------------------------


def run_procedure(inst: ProblemInstance, *, bounds: SatBounds | None = None, backend: str = "auto",
                  retry_decompose: int = 0, solver_timeout: float | None = None,
                  max_clauses: int = DEFAULT_MAX_CLAUSES, state_budget: int = 1_000_000,
                  independent_sizes: bool = False, prune_witness: bool = True,
                  single_choice: bool = True,
                  log=None) -> SynthesisResult:
    """Run the full co-synthesis; failures are reported, never raised.

    ``retry_decompose`` allows that many extra SAT models (each excluding
    the previous mask/editor pair) when supervisor synthesis fails.
    ``prune_witness`` makes the decomposition's reachability witness avoid
    the states the supervisor requirement will remove.  ``single_choice``
    asks for a mask and editor that never offer two controllable events in
    the same state, which leaves the supervisor fewer branches to contain.
    """
    log = log or (lambda msg: None)
    bounds = bounds or inst.sat
    res = SynthesisResult(inst)
    c_m, c_e, c_s, c_me = derive_constraints(inst)

    def record(step, t0, **sizes):
        res.steps.append(StepRecord(step, time.monotonic() - t0, sizes))
        log(f"step {step} ({STEPS[step]}): {sizes} in {time.monotonic() - t0:.2f} s")

    def fail(step, kind, message, trace=()):
        res.failure = FailurePoint(step, kind, message, list(trace))
        log(f"step {step} ({STEPS[step]}) failed: {message}")
        return res

    t0 = time.monotonic()
    cs = build_components(inst)
    res.components = cs
    record(1, t0, G=cs.G.n_states, CE=cs.CE.n_states, MC=cs.MC.n_states, EC=cs.EC.n_states,
           SC=cs.SC.n_states, I=cs.I.n_states)
    record(2, t0, Iw=cs.I_weak.n_states)

    t0 = time.monotonic()
    p_me, p_me_r = ensemble_plant(cs)
    record(3, t0, states=p_me.n_states, transitions=p_me.n_transitions)
    record(4, t0, states=p_me_r.n_states, removed=p_me.n_states - p_me_r.n_states)

    t0 = time.monotonic()
    try:
        me = synthesize(p_me, p_me_r, c_me, SynthesisGoal.MARKER_REACHABLE, name="ME",
                        state_budget=state_budget)
    except NoSolution as exc:
        return fail(5, "no-solution", str(exc), exc.trace)
    except (StateBudgetExceeded, SynthesisError) as exc:
        return fail(5, type(exc).__name__, str(exc))
    res.ME = me
    record(5, t0, states=me.automaton.n_states, transitions=me.automaton.n_transitions)

    product = sync_product(cs.base() + [cs.I], name="Q")
    g_pos, i_pos = product.components.index("G"), product.components.index("I")
    avoid = inst.avoid

    def doomed(label):
        # states the supervisor requirement removes anyway
        return label[g_pos] in avoid or _intruder_bad(label[i_pos])

    blocked: list = []
    for attempt in range(retry_decompose + 1):
        t0 = time.monotonic()
        try:
            dec = decompose(me.automaton, c_m, c_e, product, bounds, backend=backend,
                            timeout=solver_timeout, max_clauses=max_clauses, blocked=blocked,
                            independent=independent_sizes,
                            exclude=doomed if prune_witness else None,
                            single_choice=single_choice, log=log)
        except DecompositionFailed as exc:
            return fail(6, "bounds-exhausted", str(exc), [str(a.as_dict()) for a in exc.attempts])
        res.decompositions_tried += 1
        res.decomposition = dec
        res.M, res.E = dec.M, dec.E
        record(6, t0, k=dec.k, l=dec.l, horizon=dec.horizon, M=dec.M.automaton.n_states,
               E=dec.E.automaton.n_states, attempt=attempt)

        t0 = time.monotonic()
        p_s, p_s_r = supervisor_plant(inst, cs, dec.M.automaton, dec.E.automaton)
        record(7, t0, states=p_s.n_states, transitions=p_s.n_transitions)
        record(8, t0, states=p_s_r.n_states, removed=p_s.n_states - p_s_r.n_states)

        t0 = time.monotonic()
        try:
            s = synthesize(p_s, p_s_r, c_s, SynthesisGoal.NONBLOCKING, name="S",
                           state_budget=state_budget)
        except NoSolution as exc:
            if attempt < retry_decompose:
                log(f"supervisor synthesis failed ({exc}); requesting another decomposition")
                blocked.append((dec.k, dec.l, dec.blocking_literals()))
                continue
            return fail(9, "no-solution", str(exc), exc.trace)
        except (StateBudgetExceeded, SynthesisError) as exc:
            return fail(9, type(exc).__name__, str(exc))
        res.S = s
        record(9, t0, states=s.automaton.n_states, transitions=s.automaton.n_transitions)
        break

    t0 = time.monotonic()
    res.report = verify_closed_loop(inst, res.M, res.E, res.S, cs)
    record(10, t0, states=res.report.n_states, transitions=res.report.n_transitions,
           all_pass=res.report.all_pass)
    if not res.report.all_pass:
        failed = [k for k in ("opacity", "covertness", "avoid_safety", "nonblocking")
                  if not getattr(res.report, k)]
        return fail(10, "verification-failed", "closed loop violates " + ", ".join(failed))
    return res


run_procedure1 = run_procedure
