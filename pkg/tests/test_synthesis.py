import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cosynth.automaton import Automaton, StateBudgetExceeded, restrict, sync_product
from cosynth.problem import ControlConstraint
from cosynth.synthesis import NoSolution, SynthesisError, SynthesisGoal, synthesize

import oracles
from oracles import events

A, B, C = events("abc")
GOALS = [SynthesisGoal.MARKER_REACHABLE, SynthesisGoal.NONBLOCKING]


def random_problem(rng, max_states=4, full_observation=False):
    n = rng.randint(1, max_states)
    plant = oracles.random_automaton(rng, n, [A, B, C], density=0.6, p_marked=0.4, name="G")
    evs = sorted(plant.alphabet)
    if full_observation:
        observable = set(evs)
    else:
        observable = {e for e in evs if rng.random() < 0.7}
    controllable = {e for e in sorted(observable) if rng.random() < 0.5}
    good = {0} | {q for q in range(1, n) if rng.random() < 0.7}
    return plant, good, ControlConstraint(controllable, observable), rng.choice(GOALS)


def post_validate(plant, good, constraint, goal, agent):
    """Independent check of the four post-conditions; returns the failures."""
    failures = []
    unc = plant.alphabet - constraint.controllable
    for q, row in enumerate(agent.trans):
        for ev in unc:
            if ev not in row:
                failures.append(f"uncontrollable {ev} undefined at agent state {q}")
        for ev, d in row.items():
            if ev not in constraint.observable and d != q:
                failures.append(f"unobservable {ev} moves agent state {q}")
    pairs = oracles.closed_loop_pairs(plant, agent)
    for (x, q), _ in pairs.items():
        if x not in good:
            failures.append(f"closed loop reaches removed plant state {x}")
    marked = {p for p in pairs if p[0] in plant.marked and p[1] in agent.marked}

    def reaches_marked(p):
        seen, stack = {p}, [p]
        while stack:
            x = stack.pop()
            if x in marked:
                return True
            for y in pairs[x].values():
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return False

    if goal is SynthesisGoal.NONBLOCKING:
        if not all(reaches_marked(p) for p in pairs):
            failures.append("closed loop blocks")
    elif not marked:
        failures.append("no marked closed-loop state reachable")
    return failures


def run(plant, good, constraint, goal, **kw):
    return synthesize(plant, restrict(plant, good), constraint, goal, **kw)


def closed_language(plant, agent, max_len):
    return oracles.automaton_language(sync_product([plant, agent]), max_len)[0]


def test_soundness_gate_on_random_problems():
    rng = random.Random(606)
    solved = failures = 0
    for _ in range(400):
        plant, good, cons, goal = random_problem(rng)
        try:
            agent = run(plant, good, cons, goal)
        except NoSolution:
            continue
        solved += 1
        failures += len(post_validate(plant, good, cons, goal, agent.automaton))
        if solved >= 80:
            break
    assert solved >= 50
    assert failures == 0


def test_result_inside_supremal_safe_sublanguage():
    rng = random.Random(17)
    solved = 0
    for _ in range(300):
        plant, good, cons, goal = random_problem(rng, max_states=3)
        try:
            agent = run(plant, good, cons, goal)
        except NoSolution:
            continue
        solved += 1
        sup = oracles.safe_controllable_strings(plant, good, plant.alphabet - cons.controllable, 8)
        assert closed_language(plant, agent.automaton, 8) <= sup
    assert solved >= 50


def _sub_automata(plant):
    edges = list(plant.edges())
    for keep in itertools.product((False, True), repeat=len(edges)):
        rows = [dict() for _ in range(plant.n_states)]
        for (q, ev, d), k in zip(edges, keep):
            if k:
                rows[q][ev] = d
        yield Automaton(plant.labels, plant.alphabet, rows, plant.initial, plant.marked)


def brute_supremal(plant, good, controllable, goal, max_len):
    """Union of the languages of all admissible sub-automata (full observation)."""
    best = set()
    for sub in _sub_automata(plant):
        acc = oracles.reachable(sub)
        if acc - good:
            continue
        if any(ev not in controllable and ev not in sub.trans[q]
               for q in acc for ev in plant.trans[q]):
            continue
        ok = oracles.is_nonblocking(sub) if goal is SynthesisGoal.NONBLOCKING else oracles.is_marker_reachable(sub)
        if ok:
            best |= oracles.automaton_language(sub, max_len)[0]
    return best


def test_full_observation_matches_brute_force_supremal():
    rng = random.Random(3)
    compared = 0
    for _ in range(200):
        plant, good, cons, goal = random_problem(rng, max_states=3, full_observation=True)
        if plant.n_transitions > 7:
            continue
        sup = brute_supremal(plant, good, cons.controllable, goal, 8)
        try:
            agent = run(plant, good, cons, goal)
        except NoSolution:
            assert not sup
            continue
        assert closed_language(plant, agent.automaton, 8) == sup
        compared += 1
    assert compared >= 30


def test_agent_disables_move_into_bad_state():
    plant = Automaton.from_edges(["0", "1", "bad"], [A, B],
                                 [("0", A, "bad"), ("0", B, "1"), ("1", B, "0")], "0", ["0"])
    cons = ControlConstraint({A}, {A, B})
    good = {0, 1}
    agent = run(plant, good, cons, SynthesisGoal.MARKER_REACHABLE)
    lang = closed_language(plant, agent.automaton, 8)
    assert not any(A in w for w in lang)
    assert lang == brute_supremal(plant, good, cons.controllable, SynthesisGoal.MARKER_REACHABLE, 8)


def test_nothing_to_prune_gives_the_plant_back():
    rng = random.Random(12)
    done = 0
    while done < 20:
        plant = oracles.random_automaton(rng, 4, [A, B, C])
        if not plant.is_nonblocking():
            continue
        cons = ControlConstraint(plant.alphabet, plant.alphabet)
        agent = run(plant, set(range(plant.n_states)), cons, SynthesisGoal.NONBLOCKING)
        assert closed_language(plant, agent.automaton, 6) == oracles.automaton_language(plant, 6)[0]
        done += 1


def test_blocking_plant_without_control_has_no_solution():
    plant = Automaton.from_edges(["0", "1", "2"], [A, B], [("0", A, "1"), ("0", B, "2")], "0", ["1"])
    cons = ControlConstraint(set(), {A, B})
    with pytest.raises(NoSolution) as info:
        run(plant, {0, 1, 2}, cons, SynthesisGoal.NONBLOCKING)
    assert info.value.trace
    # with b controllable the blocking branch is cut
    agent = run(plant, {0, 1, 2}, ControlConstraint({B}, {A, B}), SynthesisGoal.NONBLOCKING)
    assert B not in agent.automaton.trans[agent.automaton.initial]


def test_uncontrollably_unsafe_initial_state():
    plant = Automaton.from_edges(["0", "1"], [A], [("0", A, "1")], "0", ["0"])
    with pytest.raises(NoSolution, match="uncontrollably"):
        run(plant, {0}, ControlConstraint(set(), {A}), SynthesisGoal.MARKER_REACHABLE)


def test_partial_observation_forces_conservative_choice():
    # b is silent, so after a the agent cannot tell 1 from 2 and must stop c
    plant = Automaton.from_edges(
        ["0", "1", "2", "3", "bad"], [A, B, C],
        [("0", A, "1"), ("1", B, "2"), ("1", C, "3"), ("2", C, "bad")], "0", ["1", "3"])
    cons = ControlConstraint({C}, {A, C})
    agent = run(plant, {0, 1, 2, 3}, cons, SynthesisGoal.MARKER_REACHABLE)
    lang = closed_language(plant, agent.automaton, 5)
    assert (A, C) not in lang and (A, B) in lang


def test_monotone_in_the_requirement():
    rng = random.Random(44)
    for _ in range(200):
        plant, good, cons, goal = random_problem(rng)
        smaller = {q for q in good if q == 0 or rng.random() < 0.6}
        try:
            run(plant, good, cons, goal)
        except NoSolution:
            with pytest.raises(NoSolution):
                run(plant, smaller, cons, goal)


@given(st.integers(0, 10**6))
def test_deterministic_output(seed):
    plant, good, cons, goal = random_problem(random.Random(seed))
    outs = []
    for _ in range(2):
        try:
            outs.append(run(plant, good, cons, goal).automaton.to_json())
        except NoSolution as exc:
            outs.append(str(exc))
    assert outs[0] == outs[1]


@given(st.integers(0, 10**6))
def test_infeasible_event_policies_agree_on_the_closed_loop(seed):
    plant, good, cons, goal = random_problem(random.Random(seed))
    try:
        uni = run(plant, good, cons, goal, infeasible="universal")
    except NoSolution:
        with pytest.raises(NoSolution):
            run(plant, good, cons, goal, infeasible="self-loop")
        return
    loop = run(plant, good, cons, goal, infeasible="self-loop")
    assert closed_language(plant, uni.automaton, 5) == closed_language(plant, loop.automaton, 5)
    assert not post_validate(plant, good, cons, goal, loop.automaton)


def test_universal_state_accepts_everything():
    plant = Automaton.from_edges(["0", "1"], [A, B], [("0", A, "1")], "0", ["1"])
    agent = run(plant, {0, 1}, ControlConstraint({A}, {A, B}), SynthesisGoal.MARKER_REACHABLE).automaton
    sink = agent.trans[agent.initial][B]
    assert agent.trans[sink] == {A: sink, B: sink}
    assert sink in agent.marked


def test_input_errors():
    plant = Automaton.from_edges(["0", "1"], [A, B], [("0", A, "1")], "0", ["1"])
    req = restrict(plant, {0, 1})
    with pytest.raises(SynthesisError, match="controllable events to be observable"):
        synthesize(plant, req, ControlConstraint({A}, {B}), SynthesisGoal.NONBLOCKING)
    with pytest.raises(SynthesisError, match="policy"):
        synthesize(plant, req, ControlConstraint({A}, {A}), SynthesisGoal.NONBLOCKING, infeasible="drop")
    stranger = Automaton(["zz"], [A, B], [{}])
    with pytest.raises(SynthesisError, match="not a plant state"):
        synthesize(plant, stranger, ControlConstraint({A}, {A}), SynthesisGoal.NONBLOCKING)


def test_state_budget_is_reported_separately():
    rng = random.Random(1)
    plant = oracles.random_automaton(rng, 6, [A, B, C], density=0.9, p_marked=0.5)
    with pytest.raises(StateBudgetExceeded):
        synthesize(plant, plant, ControlConstraint({A}, {A, B, C}), SynthesisGoal.MARKER_REACHABLE,
                   state_budget=1)
