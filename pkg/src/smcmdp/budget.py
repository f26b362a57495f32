"""Splitting the global failure budget over the estimation tasks."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from smcmdp.quotient import Quotient


class Rule(str, enum.Enum):
    DIRECT = "direct"  # every successor gets its own interval
    COMPLEMENT = "complement"  # estimate one successor, mirror the other
    NONE = "none"  # deterministic: probability 1, nothing to learn


@dataclass(frozen=True)
class EstimationTask:
    distribution: tuple[str, str]  # (transformed state, transformed action)
    successors: tuple[str, ...]
    rule: Rule

    @property
    def n_direct(self) -> int:
        if self.rule is Rule.NONE:
            return 0
        if self.rule is Rule.COMPLEMENT:
            return 1
        return len(self.successors)


def task_for(dist: tuple[str, str], succ: Sequence[str], small_support: bool) -> EstimationTask:
    succ = tuple(succ)
    if small_support and len(succ) == 1:
        return EstimationTask(dist, succ, Rule.NONE)
    if small_support and len(succ) == 2:
        return EstimationTask(dist, succ, Rule.COMPLEMENT)
    return EstimationTask(dist, succ, Rule.DIRECT)


def enumerate_tasks(q: Quotient, small_support: bool = True) -> list[EstimationTask]:
    """One task per transformed distribution outside GOAL/SINK, in model order."""
    return [task_for((sl.state, sl.action), sl.succ, small_support) for sl in q.all_slots()]


class Allocation(str, enum.Enum):
    UNIFORM = "uniform"
    INDEPENDENCE = "independence"


@dataclass(frozen=True)
class BudgetPlan:
    delta: float
    mode: Allocation
    delta_d: tuple[float, ...]  # per task (0 for tasks with nothing to learn)
    delta_t: tuple[float, ...]  # per task, budget of each directly estimated transition

    def to_json(self, tasks: Sequence[EstimationTask]) -> list[dict]:
        return [
            {
                "distribution": list(t.distribution),
                "delta_d": dd,
                "transitions": t.n_direct,
                "delta_t": dt,
            }
            for t, dd, dt in zip(tasks, self.delta_d, self.delta_t)
        ]


def uniform_allocation(tasks: Sequence[EstimationTask], delta: float) -> BudgetPlan:
    """Union bound over all directly estimated transitions."""
    total = sum(t.n_direct for t in tasks)
    dt = delta / total if total else 0.0
    return BudgetPlan(
        delta,
        Allocation.UNIFORM,
        tuple(dt * t.n_direct for t in tasks),
        tuple(dt if t.n_direct else 0.0 for t in tasks),
    )


def independence_delta_d(delta: float, n_distributions: int) -> float:
    """Per-distribution budget with prod(1 - delta_d) = 1 - delta."""
    return -math.expm1(math.log1p(-delta) / n_distributions)


def independence_allocation(tasks: Sequence[EstimationTask], delta: float) -> BudgetPlan:
    """Distributions are sampled independently, so their budgets multiply; union bound inside each."""
    d = sum(1 for t in tasks if t.n_direct)
    dd = independence_delta_d(delta, d) if d else 0.0
    return BudgetPlan(
        delta,
        Allocation.INDEPENDENCE,
        tuple(dd if t.n_direct else 0.0 for t in tasks),
        tuple(dd / t.n_direct if t.n_direct else 0.0 for t in tasks),
    )


def allocate(tasks: Sequence[EstimationTask], delta: float, independence: bool) -> BudgetPlan:
    return independence_allocation(tasks, delta) if independence else uniform_allocation(tasks, delta)
