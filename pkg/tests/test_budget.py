from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smcmdp.budget import (
    Allocation,
    EstimationTask,
    Rule,
    allocate,
    enumerate_tasks,
    independence_delta_d,
    task_for,
    uniform_allocation,
)
from smcmdp.intervals import CiMethod
from smcmdp.pipeline import GreyEstimator, resolve_model
from smcmdp.quotient import Transforms, build_quotient
from smcmdp.sampler import CountsTable

INDEPENDENCE_D2 = 0.0513167019494862004  # 1 - sqrt(0.9), mpmath


def direct(k):
    return EstimationTask(("s", "a"), tuple(f"t{i}" for i in range(k)), Rule.DIRECT)


def test_task_rules():
    assert task_for(("s", "a"), ["x"], True).rule is Rule.NONE
    assert task_for(("s", "a"), ["x", "y"], True).rule is Rule.COMPLEMENT
    assert task_for(("s", "a"), ["x", "y", "z"], True).rule is Rule.DIRECT
    assert task_for(("s", "a"), ["x"], False).rule is Rule.DIRECT
    assert [task_for(("s", "a"), "xy"[:k], True).n_direct for k in (1, 2)] == [0, 1]


def test_uniform_budget_golden():
    tasks = [direct(4)] * 121
    plan = uniform_allocation(tasks, 0.1)
    assert plan.mode is Allocation.UNIFORM
    assert plan.delta_t[0] == pytest.approx(2.066115702479338843e-4, rel=1e-15)
    assert sum(plan.delta_d) == pytest.approx(0.1)


def test_independence_budget_golden():
    assert independence_delta_d(0.1, 2) == pytest.approx(INDEPENDENCE_D2, rel=1e-15)
    plan = allocate([direct(3), direct(2)], 0.1, independence=True)
    assert plan.delta_d == pytest.approx((INDEPENDENCE_D2, INDEPENDENCE_D2))
    assert plan.delta_t == pytest.approx((INDEPENDENCE_D2 / 3, INDEPENDENCE_D2 / 2))


@given(delta=st.floats(1e-9, 0.9), d=st.integers(1, 10_000))
def test_independence_identity_and_dominance(delta, d):
    dd = independence_delta_d(delta, d)
    assert math.isclose((1 - dd) ** d, 1 - delta, rel_tol=1e-9)
    assert dd >= delta / d * (1 - 1e-12)


def test_tasks_without_learning_get_no_budget():
    tasks = [EstimationTask(("s", "a"), ("x",), Rule.NONE), direct(2)]
    for indep in (False, True):
        plan = allocate(tasks, 0.1, indep)
        assert plan.delta_t[0] == 0.0 and plan.delta_d[0] == 0.0
        assert plan.delta_t[1] > 0.0
    doc = allocate(tasks, 0.1, True).to_json(tasks)
    assert doc[1]["transitions"] == 2


def test_complement_rule_mirrors_the_estimated_successor():
    q = build_quotient(resolve_model("end_component"))
    tasks = enumerate_tasks(q)
    est = GreyEstimator(q, tasks, [0.05] * len(tasks), CiMethod.CLOPPER_PEARSON)
    counts = CountsTable.empty([t.distribution for t in tasks], [t.successors for t in tasks])
    lo, hi = est.update(counts)
    assert np.all(lo == 0.0) and np.all(hi == 1.0)
    counts.n[:] = [100, 40]
    counts.k[:] = [30, 70, 20, 20]
    lo, hi = est.update(counts)
    # first task: the second successor is the frequent one
    assert (lo[0], hi[0]) == pytest.approx((1 - hi[1], 1 - lo[1]))
    assert hi[1] - lo[1] > 0
    # tie: the earlier successor is estimated
    assert (lo[3], hi[3]) == pytest.approx((1 - hi[2], 1 - lo[2]))


def test_small_support_off_gives_direct_tasks():
    q = build_quotient(resolve_model("end_component"), Transforms())
    assert all(t.rule is Rule.DIRECT for t in enumerate_tasks(q, small_support=False))
