"""Partial-observation synthesis over belief space.

Every agent synthesized here (mask-editor ensemble, supervisor) can observe
each event it controls.  Under that condition the set of plant states
consistent with an observation does not depend on earlier control decisions,
so the open-loop observer of the plant is the exact information structure of
the closed loop and a fixpoint over its beliefs yields a supremal safe agent.

The result is never trusted: :func:`synthesize` re-checks the agent contract,
safety and the goal on the explicit closed loop before returning.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .automaton import Automaton, StateBudgetExceeded, sync_product
from .problem import ControlConstraint

__all__ = [
    "SynthesisGoal",
    "AgentAutomaton",
    "NoSolution",
    "SynthesisError",
    "StateBudgetExceeded",
    "synthesize",
    "contract_violations",
    "closed_loop",
    "plant_coordinate_indices",
    "DEFAULT_STATE_BUDGET",
]

DEFAULT_STATE_BUDGET = 1_000_000


class SynthesisGoal(Enum):
    MARKER_REACHABLE = "marker-reachable"
    NONBLOCKING = "nonblocking"


class NoSolution(Exception):
    """The fixpoint removed the initial belief (or the goal is unreachable)."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class SynthesisError(RuntimeError):
    """Post-validation rejected a synthesized agent, or bad inputs."""


@dataclass
class AgentAutomaton:
    automaton: Automaton
    constraint: ControlConstraint
    beliefs: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.automaton.name

    def violations(self) -> list[str]:
        return contract_violations(self.automaton, self.constraint)


def contract_violations(aut: Automaton, constraint: ControlConstraint) -> list[str]:
    """Controllability and observability contract of an agent.

    Uncontrollable events must be defined everywhere; defined unobservable
    events must self-loop.
    """
    out = []
    uncontrollable = sorted(aut.alphabet - constraint.controllable)
    unobservable = aut.alphabet - constraint.observable
    names = aut.state_names()
    for q, row in enumerate(aut.trans):
        for ev in uncontrollable:
            if ev not in row:
                out.append(f"uncontrollable {ev} undefined at {names[q]}")
        for ev, d in row.items():
            if ev in unobservable and d != q:
                out.append(f"unobservable {ev} moves {names[q]} -> {names[d]}")
    return out


def plant_coordinate_indices(plant: Automaton, product: Automaton):
    """Map each product state to the index of its plant coordinate."""
    width = len(plant.components)
    out = []
    for lab in product.labels:
        sub = lab[:width] if width > 1 else lab[0]
        out.append(plant.index_of(sub))
    return out


def closed_loop(plant: Automaton, agent: Automaton) -> Automaton:
    return sync_product([plant, agent], name=f"{plant.name}||{agent.name}")


def _requirement_states(plant: Automaton, requirement: Automaton) -> set[int]:
    good = set()
    for lab in requirement.labels:
        try:
            good.add(plant.index_of(lab))
        except KeyError:
            raise SynthesisError(f"requirement state {lab!r} is not a plant state") from None
    if plant.initial not in good:
        raise SynthesisError("requirement does not contain the plant's initial state")
    return good


def synthesize(plant: Automaton, requirement: Automaton, constraint: ControlConstraint,
               goal: SynthesisGoal, name: str = "agent",
               state_budget: int = DEFAULT_STATE_BUDGET,
               infeasible: str = "universal") -> AgentAutomaton:
    """Synthesize an agent that keeps ``plant`` inside ``requirement``.

    ``requirement`` must be a restriction of ``plant`` (same state labels).

    ``infeasible`` fixes what the agent does on an observable event that no
    plant state of the current belief can execute.  ``"universal"`` sends it
    to one extra state that permits everything; ``"self-loop"`` keeps
    uncontrollable ones as self-loops and leaves controllable ones disabled.
    Neither choice changes the closed loop.  The universal completion leaves
    the agent's language unconstrained outside the plant, which is what a
    later language-inclusion decomposition needs.
    Raises :class:`NoSolution`, :class:`StateBudgetExceeded`, or
    :class:`SynthesisError` when post-validation fails.
    """
    if infeasible not in ("universal", "self-loop"):
        raise SynthesisError(f"unknown infeasible-event policy {infeasible!r}")
    if not constraint.consistent:
        raise SynthesisError("synthesis needs controllable events to be observable")
    goal = SynthesisGoal(goal)
    trace: list[str] = []
    alphabet = plant.alphabet
    controllable = constraint.controllable & alphabet
    observable = constraint.observable & alphabet
    uncontrollable = alphabet - controllable

    good = _requirement_states(plant, requirement)
    bad_states = _uncontrollable_closure(plant, set(range(plant.n_states)) - good, uncontrollable)
    trace.append(f"seed: {plant.n_states - len(good)} plant states outside the requirement, "
                 f"{len(bad_states)} after uncontrollable backward closure")
    if plant.initial in bad_states:
        raise NoSolution("the initial plant state is uncontrollably unsafe", trace)

    beliefs, edges = _explore_beliefs(plant, observable, bad_states, state_budget)
    bad_b = {b for b, members in enumerate(beliefs) if members & bad_states}
    trace.append(f"observer: {len(beliefs)} beliefs, {len(bad_b)} contain unsafe states")

    obs_uc = observable & uncontrollable
    round_no = 0
    while True:
        round_no += 1
        before = len(bad_b)
        bad_b = _safety_fixpoint(edges, bad_b, obs_uc)
        trace.append(f"round {round_no}: safety fixpoint marks {len(bad_b)} beliefs bad "
                     f"(+{len(bad_b) - before})")
        if 0 in bad_b:
            raise NoSolution("the initial belief is unsafe", trace)
        live = _accessible_beliefs(edges, bad_b)
        if goal is SynthesisGoal.MARKER_REACHABLE:
            if not any(beliefs[b] & plant.marked for b in live):
                raise NoSolution("no marked plant state is reachable under the safe agent", trace)
            break
        blocking = _blocking_beliefs(plant, beliefs, edges, live, observable)
        trace.append(f"round {round_no}: {len(live)} live beliefs, {len(blocking)} blocking")
        if not blocking:
            break
        bad_b |= blocking

    agent, kept = _emit(plant, beliefs, edges, live, alphabet, observable, uncontrollable, name,
                        universal=infeasible == "universal")
    trace.append(f"agent: {agent.n_states} states, {agent.n_transitions} transitions")
    result = AgentAutomaton(agent, constraint,
                            [frozenset() if b is None else beliefs[b] for b in kept], trace)
    _post_validate(plant, good, result, goal)
    trace.append("post-validation passed")
    return result


def _uncontrollable_closure(plant: Automaton, seeds: set[int], uncontrollable) -> set[int]:
    pred: list[list[int]] = [[] for _ in range(plant.n_states)]
    for q, row in enumerate(plant.trans):
        for ev, d in row.items():
            if ev in uncontrollable:
                pred[d].append(q)
    bad = set(seeds)
    stack = list(bad)
    while stack:
        q = stack.pop()
        for p in pred[q]:
            if p not in bad:
                bad.add(p)
                stack.append(p)
    return bad


def _explore_beliefs(plant: Automaton, observable, bad_states, budget):
    """Observer beliefs as frozensets of plant indices; beliefs meeting
    ``bad_states`` are recorded but not expanded."""
    trans = plant.trans
    unobs_succ = [[d for ev, d in row.items() if ev not in observable] for row in trans]
    obs_rows = [[(ev, d) for ev, d in row.items() if ev in observable] for row in trans]

    def closure(seeds):
        seen = set(seeds)
        stack = list(seen)
        while stack:
            q = stack.pop()
            for d in unobs_succ[q]:
                if d not in seen:
                    seen.add(d)
                    stack.append(d)
        return frozenset(seen)

    init = closure([plant.initial])
    beliefs = [init]
    index = {init: 0}
    edges: list[dict] = []
    i = 0
    while i < len(beliefs):
        b = beliefs[i]
        i += 1
        row: dict = {}
        if not (b & bad_states):
            images: dict = {}
            for q in b:
                for ev, d in obs_rows[q]:
                    images.setdefault(ev, set()).add(d)
            for ev in sorted(images):
                tgt = closure(images[ev])
                j = index.get(tgt)
                if j is None:
                    j = len(beliefs)
                    if j >= budget:
                        raise StateBudgetExceeded(f"belief exploration exceeded {budget} states")
                    index[tgt] = j
                    beliefs.append(tgt)
                row[ev] = j
        edges.append(row)
    return beliefs, edges


def _safety_fixpoint(edges, bad_b: set[int], obs_uc) -> set[int]:
    bad = set(bad_b)
    pred: list[list[int]] = [[] for _ in edges]
    for b, row in enumerate(edges):
        for ev, d in row.items():
            if ev in obs_uc:
                pred[d].append(b)
    stack = list(bad)
    while stack:
        d = stack.pop()
        for b in pred[d]:
            if b not in bad:
                bad.add(b)
                stack.append(b)
    return bad


def _accessible_beliefs(edges, bad_b) -> list[int]:
    seen = {0}
    queue = deque([0])
    while queue:
        b = queue.popleft()
        for ev in sorted(edges[b]):
            d = edges[b][ev]
            if d not in bad_b and d not in seen:
                seen.add(d)
                queue.append(d)
    return sorted(seen)


def _blocking_beliefs(plant, beliefs, edges, live, observable) -> set[int]:
    """Beliefs holding some plant state that cannot reach a marked state in
    the closed loop (pairs of plant state and belief)."""
    live_set = set(live)
    pair_id: dict = {}
    pairs = []
    for b in live:
        for q in sorted(beliefs[b]):
            pair_id[(q, b)] = len(pairs)
            pairs.append((q, b))
    pred: list[list[int]] = [[] for _ in pairs]
    for n, (q, b) in enumerate(pairs):
        for ev, d in plant.trans[q].items():
            if ev in observable:
                nb = edges[b].get(ev)
                if nb is None or nb not in live_set:
                    continue
            else:
                nb = b
            m = pair_id[(d, nb)]
            pred[m].append(n)
    marked = plant.marked
    co = [False] * len(pairs)
    stack = [n for n, (q, _) in enumerate(pairs) if q in marked]
    for n in stack:
        co[n] = True
    while stack:
        m = stack.pop()
        for n in pred[m]:
            if not co[n]:
                co[n] = True
                stack.append(n)
    return {pairs[n][1] for n in range(len(pairs)) if not co[n]}


def _emit(plant, beliefs, edges, live, alphabet, observable, uncontrollable, name, universal):
    kept = list(live)
    order = {b: n for n, b in enumerate(kept)}
    unobservable = sorted(alphabet - observable)
    obs_uc = sorted(observable & uncontrollable)
    sink = len(kept)
    uses_sink = False
    rows = []
    for b in kept:
        row = {}
        executable = edges[b]
        for ev, d in executable.items():
            if d in order:
                row[ev] = order[d]
        if universal:
            for ev in observable:
                if ev not in executable:
                    row[ev] = sink
                    uses_sink = True
        else:
            for ev in obs_uc:
                row.setdefault(ev, order[b])
        for ev in unobservable:
            row[ev] = order[b]
        rows.append(row)
    assert all(ev in row for row in rows for ev in obs_uc)
    if uses_sink:
        rows.append({ev: sink for ev in alphabet})
    labels = [f"s{n}" for n in range(len(rows))]
    aut = Automaton(labels, alphabet, rows, 0, range(len(rows)), name=name)
    if uses_sink:
        kept.append(None)
    return aut, kept


def _post_validate(plant, good, result: AgentAutomaton, goal: SynthesisGoal):
    agent = result.automaton
    problems = contract_violations(agent, result.constraint)
    if problems:
        raise SynthesisError("agent contract violated: " + "; ".join(problems[:5]))
    loop = closed_loop(plant, agent)
    coords = plant_coordinate_indices(plant, loop)
    for q in range(loop.n_states):
        if coords[q] not in good:
            raise SynthesisError(f"closed loop reaches a state outside the requirement: {loop.labels[q]!r}")
    if goal is SynthesisGoal.MARKER_REACHABLE and not loop.is_marker_reachable():
        raise SynthesisError("closed loop is not marker-reachable")
    if goal is SynthesisGoal.NONBLOCKING and not loop.is_nonblocking():
        raise SynthesisError("closed loop is blocking")
