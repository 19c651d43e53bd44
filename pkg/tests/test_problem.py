import copy
import json

import pytest

from cosynth.data import example_document
from cosynth.events import DECODE, STOP, command, on, parse_event, plain, sensor_off, sensor_on, sharp
from cosynth.problem import InstanceError, derive_constraints, load_instance, save_instance


def _doc(**overrides):
    doc = copy.deepcopy(example_document())
    for path, value in overrides.items():
        node = doc
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return doc


def _violations(doc):
    with pytest.raises(InstanceError) as info:
        load_instance(doc)
    return info.value.violations


def test_example_loads(example):
    assert example.plant.n_states == 8
    assert example.secret == {"5"} and example.avoid == {"4"}
    assert example.maskable == (3, 5)
    assert example.edit_bound == 1


def test_decorated_alphabet_of_example(example):
    # 7 commands, 4 toggles, 2 sharps, stop, decode, a b d f plain, c and e in on/off form
    assert len(example.gamma) == 2 ** 3 - 1
    assert len(example.sigma_b) == 23
    assert {plain("a"), on("c"), sharp("b"), sensor_on(3), sensor_off(5), STOP, DECODE} <= example.sigma_b
    assert plain("c") not in example.sigma_b
    assert example.sigma_8 == {plain("a"), plain("d"), plain("f"), on("e"), sharp("b"), sharp("c")}


def test_gamma_enumerates_nonempty_subsets(example):
    subsets = ["a", "b", "c", "ab", "ac", "bc", "abc"]
    assert set(example.gamma) == {command(s) for s in subsets}
    assert list(example.gamma) == sorted(example.gamma)


def test_derived_constraints(example):
    c_m, c_e, c_s, c_me = derive_constraints(example)
    assert c_m.controllable == {sensor_on(3), sensor_off(3), sensor_on(5), sensor_off(5)}
    assert c_e.controllable == {sharp("b"), sharp("c"), STOP}
    assert all(c.consistent for c in (c_m, c_e, c_s, c_me))
    # the mask sees masked events only when their sensor is on
    assert on("c") in c_m.observable and parse_event("c+off") not in c_m.observable
    assert c_s.controllable == frozenset(example.gamma)
    assert c_me.controllable == c_m.controllable | c_e.controllable


def test_round_trip_through_document(example, tmp_path):
    doc = save_instance(example, tmp_path / "inst.json")
    again = load_instance(tmp_path / "inst.json")
    assert save_instance(again) == doc
    assert load_instance(json.dumps(doc)).to_document() == doc


def test_overlapping_sensors_rejected():
    doc = _doc(sensors=[{"id": 1, "events": ["a", "b"]}, {"id": 2, "events": ["b", "c", "d", "e", "f"]}],
               maskable=[1])
    assert "sensor sets not disjoint" in _violations(doc)


def test_missing_sections_listed_together():
    doc = _doc()
    del doc["editor"]
    del doc["plant"]["initial"]
    v = _violations(doc)
    assert "missing section 'editor'" in v
    assert "missing field plant.initial" in v


@pytest.mark.parametrize("override, message", [
    ({"maskable": [9]}, "maskable sensors not declared"),
    ({"editor__editable": ["a", "zz"]}, "editable events must be editor-observable"),
    ({"editor__bound": 0}, "edit bound U must be an integer >= 1"),
    ({"alphabet__controllable": ["a", "q"]}, "controllable events not in alphabet"),
    ({"plant__secret": ["77"]}, "secret states not in plant"),
    ({"intruder__observable_commands": ["cmd{d}"]},
     "intruder-observable commands not a subset of the generated command set"),
    ({"sat": {"k0": 3, "k_max": 2}}, "k_max/l_max must not be below k0/l0"),
])
def test_set_relation_violations(override, message):
    assert message in _violations(_doc(**override))


def test_sensors_must_cover_observable_events():
    doc = _doc(sensors=[{"id": 1, "events": ["a"]}], maskable=[1])
    assert "sensor sets do not cover the observable events" in _violations(doc)


def test_nondeterministic_plant_rejected():
    doc = _doc()
    doc["plant"]["transitions"].append(["1", "a", "3"])
    (msg,) = _violations(doc)
    assert msg.startswith("plant:")


def test_bad_documents():
    assert _violations("[1, 2]") == ["instance document must be a JSON object"]
    assert _violations("{not json")[0].startswith("not a file or JSON document")
