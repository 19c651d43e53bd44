import random

import pytest

from cosynth.automaton import Automaton
from cosynth.components import EMPTY_BELIEF, UNSAFE, intruder_observed
from cosynth.events import parse_event
from cosynth.pipeline import (TraceRejected, closed_loop_product, project, run_procedure,
                              runs_with_plant_word, simulate_trace, verify_closed_loop)
from cosynth.problem import load_instance


def two_event_document(transitions, secret=(), marked=("1",), maskable=(), editable=(),
                       intruder_events=("a", "u")):
    events = ["a", "u"]
    return {
        "name": "two-event",
        "alphabet": {"events": events, "controllable": ["a"], "observable": events},
        "plant": {"states": ["0", "1"], "initial": "0", "marked": list(marked),
                  "transitions": [list(t) for t in transitions], "secret": list(secret), "avoid": []},
        "sensors": [{"id": 1, "events": ["a"]}, {"id": 2, "events": ["u"]}],
        "maskable": list(maskable),
        "editor": {"observable": events, "editable": list(editable), "bound": 1},
        "intruder": {"observable_events": list(intruder_events), "observable_commands": ["cmd{a}"]},
    }


def permissive(inst, name):
    sigma = sorted(inst.sigma_b)
    return Automaton(["u"], sigma, [{e: 0 for e in sigma}], 0, [0], name=name)


def test_example_succeeds_with_all_pass_report(example_result):
    res = example_result
    assert res.ok, res.failure
    assert res.report.all_pass
    assert [s.step for s in res.steps] == list(range(1, 11))
    assert res.decomposition.k <= 8 and res.decomposition.l <= 8


def test_success_report_recomputed_independently(example, example_result):
    res = example_result
    report = verify_closed_loop(example, res.M, res.E, res.S)
    assert report.as_dict() == res.report.as_dict()
    loop = closed_loop_product(example, res.M, res.E, res.S)
    i = loop.components.index("I")
    assert not any(lab[i] in (UNSAFE, EMPTY_BELIEF) for lab in loop.labels)


def test_example_is_deterministic(example, example_result):
    again = run_procedure(example)
    for attr in ("M", "E", "S"):
        assert getattr(again, attr).automaton.to_json() == getattr(example_result, attr).automaton.to_json()


def test_secret_free_instance_succeeds():
    inst = load_instance(two_event_document([("0", "a", "1")]))
    res = run_procedure(inst)
    assert res.ok and res.report.all_pass


def test_exposed_secret_fails_at_ensemble_synthesis():
    # u is uncontrollable, unmaskable and uneditable, the intruder sees it,
    # and the only marked state lies behind it
    doc = two_event_document([("0", "u", "1"), ("0", "a", "0"), ("1", "a", "1")], secret=["1"],
                             marked=["1"])
    res = run_procedure(load_instance(doc))
    assert not res.ok
    assert res.failure.step == 5 and res.failure.kind == "no-solution"
    assert res.ME is None and res.S is None


def test_stalling_editor_leaves_supervisor_without_solution():
    # ME may withhold stop after u forever; marker reachability allows that,
    # but the supervisor's nonblocking goal does not
    doc = two_event_document([("0", "u", "1"), ("0", "a", "0"), ("1", "a", "1")], secret=["1"],
                             marked=["0"])
    res = run_procedure(load_instance(doc))
    assert res.ME is not None
    assert res.failure.step == 9 and res.failure.kind == "no-solution"


def test_permissive_agents_fail_and_witnesses_replay(example):
    M, E, S = (permissive(example, n) for n in "MES")
    report = verify_closed_loop(example, M, E, S)
    assert not report.opacity and not report.all_pass
    for key, coordinate_check in (
        ("opacity", lambda step: step.belief == UNSAFE),
        ("covertness", lambda step: step.belief == EMPTY_BELIEF),
        ("avoid_safety", lambda step: step.state[0] in example.avoid),
    ):
        witness = report.witnesses[key]
        visited = simulate_trace(example, M, E, S, witness)
        assert len(visited) == len(witness) + 1
        assert coordinate_check(visited[-1])
        assert not any(coordinate_check(s) for s in visited[:-1])


def test_empty_trace_gives_initial_tuple(example, example_result):
    res = example_result
    (step,) = simulate_trace(example, res.M, res.E, res.S, [])
    comps = res.components
    assert step.event is None
    assert step.state[:5] == tuple(a.labels[a.initial] for a in comps.base())


def test_rejected_trace_names_the_factor(example, example_result):
    res = example_result
    with pytest.raises(TraceRejected) as info:
        simulate_trace(example, res.M, res.E, res.S, ["b"])
    # the plant cannot execute b before a command enables it
    assert info.value.index == 0 and info.value.factor in {"CE", "S", "M", "E", "MC3", "MC5", "MC"}
    assert len(info.value.visited) == 1
    with pytest.raises(TraceRejected, match="outside every alphabet"):
        simulate_trace(example, res.M, res.E, res.S, [parse_event("q")])


def test_random_walks_agree_with_the_product(example, example_result):
    res = example_result
    loop = closed_loop_product(example, res.M, res.E, res.S)
    rng = random.Random(0)
    for _ in range(60):
        q, trace = loop.initial, []
        for _ in range(rng.randint(0, 25)):
            row = loop.trans[q]
            if not row:
                break
            ev = rng.choice(sorted(row))
            trace.append(ev)
            q = row[ev]
        last = simulate_trace(example, res.M, res.E, res.S, trace)[-1]
        assert flatten(last.state) == tuple(loop.labels[q])


def flatten(label):
    # the MC factor is itself a product, so its coordinate is a tuple
    out = []
    for part in label:
        out.extend(part if isinstance(part, tuple) else [part])
    return tuple(out)


def _observation_patterns(inst):
    v6, v7 = parse_event("cmd{b,c}"), parse_event("cmd{a,b,c}")
    big = {v6, v7}
    gamma_o = {g for g in inst.gamma if g in intruder_observed(inst)}
    b_sharp, f = parse_event("b#"), parse_event("f")
    return [
        [big, {b_sharp}, {f}, big],
        [big, {b_sharp}, {f}, big, {b_sharp}],
        [big, {b_sharp}, gamma_o, {f}, big],
        [big, {b_sharp}, gamma_o, {f}, big, {b_sharp}],
    ]


def matches(word, pattern):
    return len(word) == len(pattern) and all(ev in allowed for ev, allowed in zip(word, pattern))


def realized_patterns(inst, res):
    loop = closed_loop_product(inst, res.M, res.E, res.S)
    plant_word = [{parse_event(x)} for x in ("a", "c+on", "e+off", "f")] + [
        {parse_event("c+on"), parse_event("c+off")}]
    visible = intruder_observed(inst)
    patterns = _observation_patterns(inst)
    hits = {}
    for word in runs_with_plant_word(loop, res.components.G.alphabet, plant_word):
        seen = project(word, visible)
        for n, pat in enumerate(patterns):
            if n not in hits and matches(seen, pat):
                hits[n] = word
    return hits


def test_secret_route_disguised_for_the_intruder(example, example_result):
    hits = realized_patterns(example, example_result)
    assert hits
    for word in hits.values():
        visited = simulate_trace(example, example_result.M, example_result.E, example_result.S, word)
        assert all(s.belief not in (UNSAFE, EMPTY_BELIEF) for s in visited)
        assert "5" in {s.state[0] for s in visited}
