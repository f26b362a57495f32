from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lp_reachability, random_mdp_document
from smcmdp.model import (
    IntervalMdp,
    ModelError,
    exact_reachability_value,
    from_document,
    load_model,
    parse_model,
    serialize_model,
)
from smcmdp.pipeline import bundled_models, resolve_model


def doc(**over):
    base = {
        "states": ["s", "g"],
        "initial": "s",
        "target": ["g"],
        "actions": {"s": {"a": {"s": 0.5, "g": 0.5}}, "g": {"loop": {"g": 1.0}}},
    }
    base.update(over)
    return base


def test_minimal_model_and_value():
    m = from_document(doc())
    assert m.n_transitions == 3
    assert exact_reachability_value(m)["s"] == pytest.approx(1.0)


def test_single_absorbing_state():
    m = from_document({"states": ["x"], "initial": "x", "target": [], "actions": {"x": {"a": {"x": 1.0}}}})
    assert exact_reachability_value(m) == {"x": 0.0}


@pytest.mark.parametrize(
    "override,message",
    [
        ({"actions": {"s": {"a": {"s": 0.5, "g": 0.49}}, "g": {"loop": {"g": 1.0}}}}, "sums to"),
        ({"actions": {"s": {"a": {"x": 1.0}}, "g": {"loop": {"g": 1.0}}}}, "dangling"),
        ({"actions": {"s": {}, "g": {"loop": {"g": 1.0}}}}, "empty action set"),
        ({"actions": {"s": {"a": {"s": 0.0, "g": 1.0}}, "g": {"loop": {"g": 1.0}}}}, "outside"),
        ({"actions": {"s": {"a": {"g": "1"}}, "g": {"loop": {"g": 1.0}}}}, "non-numeric"),
        ({"initial": "q"}, "initial"),
        ({"target": ["q"]}, "target"),
        ({"states": ["s", "g", "s"]}, "duplicate"),
    ],
)
def test_invalid_documents(override, message):
    with pytest.raises(ModelError, match=message):
        from_document(doc(**override))


def test_missing_key_and_syntax_error():
    d = doc()
    del d["target"]
    with pytest.raises(ModelError, match="missing key"):
        from_document(d)
    with pytest.raises(ModelError, match="line 1 column"):
        parse_model('{"states": [}')


def test_round_trip_is_exact(tmp_path):
    for name in bundled_models():
        m = resolve_model(name)
        text = serialize_model(m)
        assert parse_model(text) == m
        path = tmp_path / f"{name}.json"
        path.write_text(text)
        assert load_model(path) == m
        assert serialize_model(load_model(path)) == text


def test_end_component_structure_and_value():
    m = resolve_model("end_component")
    loops = sum(1 for s, a, t, p in m.transitions() if s == t and p == 1.0)
    assert m.n_transitions - loops == 12
    assert exact_reachability_value(m)["s_hat"] == pytest.approx(0.7, abs=1e-12)


def test_bundled_values():
    expected = {"end_component": 0.7, "exit_fragment": 5 / 7, "rare_coin": 0.001, "mec_grid": 0.55}
    for name, v in expected.items():
        m = resolve_model(name)
        assert exact_reachability_value(m)[m.initial] == pytest.approx(v, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_value_agrees_with_lp(seed):
    d = random_mdp_document(seed)
    m = from_document(d)
    ours = exact_reachability_value(m)
    ref = lp_reachability(d["states"], d["initial"], d["target"], d["actions"])
    for s in m.states:
        assert ours[s] == pytest.approx(ref[s], abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_adding_an_action_never_lowers_the_value(seed):
    d = random_mdp_document(seed)
    m = from_document(d)
    before = exact_reachability_value(m)
    d2 = json.loads(json.dumps(d))
    s0 = d2["states"][0]
    d2["actions"][s0]["extra"] = {d2["target"][0]: 1.0} if d2["target"] else {s0: 1.0}
    after = exact_reachability_value(from_document(d2))
    assert all(after[s] >= before[s] - 1e-9 for s in m.states)


def test_interval_mdp_validation():
    with pytest.raises(ModelError):
        IntervalMdp(("s",), "s", frozenset(), {"s": {"a": {"s": (0.5, 0.4)}}})
    with pytest.raises(ModelError):
        IntervalMdp(("s", "t"), "s", frozenset(), {"s": {"a": {"s": (0.6, 0.7), "t": (0.6, 0.7)}}})
