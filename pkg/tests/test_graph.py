from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_mdp_document
from smcmdp.graph import (
    can_reach,
    mec_decomposition,
    reachable,
    sccs,
    tarjan,
    reverse_topological_order,
    value0_states,
    value1_states,
)
from smcmdp.model import from_document
from smcmdp.pipeline import resolve_model


def test_tarjan_on_a_dag_and_a_cycle():
    succ = {1: [2], 2: [3], 3: []}
    comps = tarjan([1, 2, 3], lambda v: succ[v])
    assert sorted(map(sorted, comps)) == [[1], [2], [3]]
    # successors come out first
    assert [c[0] for c in comps] == [3, 2, 1]
    cyc = {1: [2], 2: [1, 3], 3: []}
    assert sorted(map(sorted, tarjan([1, 2, 3], lambda v: cyc[v]))) == [[1, 2], [3]]


def test_tarjan_handles_long_chains():
    n = 20_000
    comps = tarjan(list(range(n)), lambda v: [v + 1] if v + 1 < n else [])
    assert len(comps) == n


def test_reverse_topological_order():
    succ = {"a": ["b", "c"], "b": ["c"], "c": []}
    order = reverse_topological_order(["a", "b", "c"], lambda v: succ[v])
    assert order.index("a") > order.index("b") > order.index("c")


def test_end_component_components():
    m = resolve_model("end_component")
    g = m.support_view()
    assert {"s1", "s2", "t"} in [set(c) for c in sccs(g)]
    mecs = mec_decomposition(g)
    sets = [set(x) for x in mecs.mecs]
    assert {"s1", "s2"} in sets
    assert "t" not in mecs.index
    assert value1_states(g, m.target) == {"goal", "t"}
    assert value0_states(g, m.target) == {"sink"}


def test_mec_keeps_only_staying_actions():
    mecs = mec_decomposition(resolve_model("end_component").support_view())
    k = mecs.index["s1"]
    assert mecs.mecs[k] == {"s1": ("a",), "s2": ("b",)}


def test_empty_target():
    g = resolve_model("exit_fragment").support_view()
    assert value0_states(g, []) == set(g.states)
    assert value1_states(g, []) == set()


def test_reachability_helpers():
    g = resolve_model("exit_fragment").support_view()
    assert reachable(g, "s_hat") == set(g.states)
    assert reachable(g, "s_hat", stop={"s1"}) == {"s_hat", "s1"}
    assert can_reach(g, {"e1"}) == {"s_hat", "s1", "s2", "s3", "s4", "e1"}


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_mec_properties(seed):
    m = from_document(random_mdp_document(seed))
    g = m.support_view()
    mecs = mec_decomposition(g)
    for comp in mecs.mecs:
        members = set(comp)
        for s, acts in comp.items():
            assert acts
            for a in acts:
                assert set(g.edges[s][a]) <= members
        # strongly connected under the kept actions
        for s in members:
            seen = {s}
            frontier = [s]
            while frontier:
                x = frontier.pop()
                for a in comp[x]:
                    for t in g.edges[x][a]:
                        if t not in seen:
                            seen.add(t)
                            frontier.append(t)
            assert seen == members
    one, zero = value1_states(g, m.target), value0_states(g, m.target)
    assert not one & zero
    assert set(m.target) <= one
