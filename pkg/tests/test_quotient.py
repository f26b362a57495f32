from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_mdp_document
from smcmdp.budget import Rule, enumerate_tasks
from smcmdp.model import exact_reachability_value, from_document
from smcmdp.pipeline import resolve_model
from smcmdp.quotient import (
    FragmentError,
    Transforms,
    apply_chains,
    build_quotient,
    collapse_mecs,
    exact_macro_distribution,
    fragment_quotient,
    identity_quotient,
    instantiate,
    merge_value_classes,
    plan_fragment,
)

NONE = Transforms(False, False, False)


def value(m):
    return exact_reachability_value(m)[m.initial]


def test_identity_keeps_every_transition():
    m = resolve_model("end_component")
    q = build_quotient(m, NONE)
    assert q.n_transitions == 12
    assert value(instantiate(q, m)) == pytest.approx(0.7)


def test_end_component_full_quotient():
    m = resolve_model("end_component")
    q = build_quotient(m)
    assert q.n_transitions == 4
    assert [(sl.state, sl.succ) for sl in q.all_slots()] == [
        ("s_hat", ("GOAL", "{s1,s2}")),
        ("{s1,s2}", ("GOAL", "SINK")),
    ]
    tasks = enumerate_tasks(q)
    assert len(tasks) == 2 and all(t.rule is Rule.COMPLEMENT for t in tasks)
    assert value(instantiate(q, m)) == pytest.approx(0.7, abs=1e-12)


def test_merge_then_collapse_steps():
    m = resolve_model("end_component")
    q = merge_value_classes(identity_quotient(m.support_view()))
    assert q.rep["t"] == q.rep["goal"] == "GOAL"
    assert q.rep["sink"] == "SINK"
    q = collapse_mecs(q)
    assert q.rep["s1"] == q.rep["s2"] == "{s1,s2}"


def test_exit_fragment_scc_fragment():
    m = resolve_model("exit_fragment")
    plan = plan_fragment(identity_quotient(m.support_view()), ["s1", "s2", "s3", "s4"])
    assert plan.fragment.entries == ("s1",)
    assert plan.fragment.strategies == 2
    assert (plan.quotient_cost, plan.direct_cost) == (4, 15)
    q = build_quotient(m)
    assert len(q.all_slots()) == 2
    assert value(instantiate(q, m)) == pytest.approx(5 / 7, abs=1e-12)


def test_macro_distribution_of_exit_fragment():
    m = resolve_model("exit_fragment")
    strat = {s: "a" for s in ("s1", "s2", "s3", "s4")}
    dist = exact_macro_distribution(m, ["s1", "s2", "s3", "s4"], "s1", strat)
    assert dist == pytest.approx({"e1": 5 / 7, "e2": 2 / 7})
    with pytest.raises(ValueError):
        exact_macro_distribution(m, ["s2"], "s1", strat)


def test_fragment_may_not_contain_target():
    q = identity_quotient(resolve_model("exit_fragment").support_view())
    with pytest.raises(FragmentError):
        fragment_quotient(q, ["s1", "e1"])


def test_chain_removes_state_with_one_incoming_transition():
    m = resolve_model("ladder")
    before = build_quotient(m, Transforms(True, False, False))
    after = apply_chains(before)
    assert after.n_transitions < before.n_transitions
    assert value(instantiate(after, m)) == pytest.approx(value(m), abs=1e-12)


@pytest.mark.parametrize(
    "transforms",
    [Transforms(True, False, False), Transforms(False, True, False), Transforms(False, False, True), Transforms()],
)
@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_each_transform_preserves_the_value(transforms, seed):
    m = from_document(random_mdp_document(seed))
    q = build_quotient(m, transforms)
    assert q.n_transitions <= build_quotient(m, NONE).n_transitions
    assert value(instantiate(q, m)) == pytest.approx(value(m), abs=1e-9)
