"""Interval iteration for maximal reachability on interval MDPs.

A lower sequence starts at 0 and uses the pessimistic inner step, an upper
sequence starts at 1 and uses the optimistic one; both maximise over actions.
Before iterating, states that cannot reach anything with a positive upper
value are fixed to 0 and end components of the support graph are collapsed
(their internal mass becomes a self-loop), since the upper sequence only
converges on models without end components.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from smcmdp import kernels
from smcmdp.graph import mec_decomposition, tarjan
from smcmdp.model import SUM_TOL, IntervalMdp

DEFAULT_MAX_SWEEPS = 10**6


class InfeasibleIntervals(ValueError):
    pass


@dataclass
class ValueBounds:
    states: tuple[str, ...]
    lo: np.ndarray
    hi: np.ndarray
    sweeps: int
    converged: bool
    initial: str

    def at(self, s: str) -> tuple[float, float]:
        i = self.states.index(s)
        return float(self.lo[i]), float(self.hi[i])

    @property
    def gap(self) -> float:
        lo, hi = self.at(self.initial)
        return hi - lo


class IterationCapError(RuntimeError):
    def __init__(self, bounds: ValueBounds):
        super().__init__(f"interval iteration hit the sweep cap ({bounds.sweeps}); gap {bounds.gap:.3g}")
        self.bounds = bounds


def robust_bellman(lo: Sequence[float], hi: Sequence[float], values: Sequence[float], optimistic: bool) -> float:
    """Extremal expected value over {p : lo <= p <= hi, sum p = 1}.

    Successors are saturated greedily, best first when optimistic and worst
    first otherwise; equal values are taken in the given order.
    """
    if sum(lo) > 1.0 + SUM_TOL or sum(hi) < 1.0 - SUM_TOL:
        raise InfeasibleIntervals(f"no distribution fits (sum lo={sum(lo)}, sum hi={sum(hi)})")
    from smcmdp._pykernels import robust_expectation

    return robust_expectation(list(lo), list(hi), list(values), list(range(len(lo))), optimistic)


@dataclass
class _RowGraph:
    states: list[str]
    edges: dict


class SolverPlan:
    """Topology-dependent preprocessing, reusable while only the interval bounds change.

    ``rows[s]`` lists, per state, the successor names of each of its actions.
    ``fixed`` maps states to constant (lo, hi) values.
    Entries are addressed in the flattened order of ``rows``.
    """

    def __init__(self, states: Sequence[str], rows: Mapping[str, Sequence[Sequence[str]]], fixed: Mapping[str, tuple[float, float]]):
        self.states = tuple(states)
        idx = {s: i for i, s in enumerate(self.states)}
        n = len(self.states)
        self.n_entries = sum(len(r) for s in self.states for r in rows.get(s, ()))
        fixed = dict(fixed)
        # states that cannot reach a fixed state with positive upper value are worth 0
        pred: list[set[int]] = [set() for _ in range(n)]
        for s in self.states:
            if s in fixed:
                continue
            for r in rows.get(s, ()):
                for t in r:
                    pred[idx[t]].add(idx[s])
        alive = {idx[s] for s, (_, h) in fixed.items() if h > 0.0}
        frontier = list(alive)
        while frontier:
            t = frontier.pop()
            for s in pred[t]:
                if s not in alive:
                    alive.add(s)
                    frontier.append(s)
        for s in self.states:
            if s not in fixed and (idx[s] not in alive or not rows.get(s)):
                fixed[s] = (0.0, 0.0)
        self.fixed = fixed
        free = [s for s in self.states if s not in fixed]
        # end components among free states (support = all listed successors)
        mecs = mec_decomposition(_RowGraph(free, {s: {i: tuple(r) for i, r in enumerate(rows.get(s, ()))} for s in free}))
        node_of = {}
        nodes: list[list[str]] = []
        for s in self.states:
            if s in node_of:
                continue
            k = mecs.index.get(s)
            members = [u for u in self.states if mecs.index.get(u) == k] if k is not None else [s]
            for u in members:
                node_of[u] = len(nodes)
            nodes.append(members)
        self.node_of = np.array([node_of[s] for s in self.states], dtype=np.int64)
        self.nodes = nodes
        m = len(nodes)
        node_fixed = np.zeros(m, dtype=np.uint8)
        init_lo = np.zeros(m)
        init_hi = np.ones(m)
        for s, (l, h) in fixed.items():
            j = node_of[s]
            node_fixed[j] = 1
            init_lo[j] = l
            init_hi[j] = h
        # collapsed rows: drop actions internal to an end component, merge entries by target node
        first_index = {}
        for i, s in enumerate(self.states):
            first_index.setdefault(node_of[s], i)
        per_node: list[list[tuple[str, tuple[str, ...], int]]] = [[] for _ in range(m)]
        e = 0
        for s in self.states:
            for r in rows.get(s, ()):
                j = node_of[s]
                k = mecs.index.get(s)
                internal = k is not None and all(mecs.index.get(t) == k for t in r)
                if not node_fixed[j] and not internal:
                    per_node[j].append((s, tuple(r), e))
                e += len(r)
        agg_index = np.full(self.n_entries, -1, dtype=np.int64)
        succ_nodes: list[int] = []
        row_ends: list[int] = []
        self_pos: list[int] = []
        state_row_start = np.zeros(m + 1, dtype=np.int64)
        for j in range(m):
            state_row_start[j] = len(row_ends)
            for s, r, first in per_node[j]:
                base = len(succ_nodes)
                targets = sorted({node_of[t] for t in r}, key=first_index.__getitem__)
                pos = {t: base + i for i, t in enumerate(targets)}
                succ_nodes.extend(targets)
                for off, t in enumerate(r):
                    agg_index[first + off] = pos[node_of[t]]
                self_pos.append(pos.get(j, -1))
                row_ends.append(len(succ_nodes))
        state_row_start[m] = len(row_ends)
        self.state_row_start = state_row_start
        self.row_start = np.array([0] + row_ends, dtype=np.int64)
        self.succ = np.array(succ_nodes, dtype=np.int64)
        self.self_pos = np.array(self_pos, dtype=np.int64)
        self.row_of_entry = np.repeat(np.arange(len(row_ends)), np.diff(self.row_start))
        self.agg_index = agg_index
        self.node_fixed = node_fixed
        self.init_lo = init_lo
        self.init_hi = init_hi

        def node_succ(j):
            return self.succ[self.row_start[state_row_start[j]]:self.row_start[state_row_start[j + 1]]].tolist()

        self.order = np.array([j for comp in tarjan(list(range(m)), node_succ) for j in comp], dtype=np.int64)

    def aggregate(self, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Entry bounds of the collapsed rows (sums per target node)."""
        n = len(self.succ)
        clo = np.zeros(n)
        chi = np.zeros(n)
        keep = self.agg_index >= 0
        np.add.at(clo, self.agg_index[keep], lo[keep])
        np.add.at(chi, self.agg_index[keep], hi[keep])
        return np.minimum(clo, 1.0), np.minimum(chi, 1.0)

    def condition(self, clo: np.ndarray, chi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Bounds with self-loops conditioned away, for the lower and the upper sequence.

        Every distribution p in the box, conditioned on leaving, lies in the
        box lo_t / (1 - lo_self) <= q_t <= hi_t / (1 - hi_self). Iterating
        over that relaxation keeps both sequences sound, and the upper one
        no longer sticks at 1 on self-loops. When the self-loop may take all
        the mass (hi_self = 1) the adversary can stay forever, so the lower
        sequence keeps the raw row and the upper one lets q_t go up to 1.
        """
        llo, lhi = clo.copy(), chi.copy()
        ulo, uhi = clo.copy(), chi.copy()
        rows = np.flatnonzero(self.self_pos >= 0)
        if len(rows) == 0:
            return llo, lhi, ulo, uhi
        sp = self.self_pos[rows]
        ls = clo[sp]
        hs = chi[sp]
        scale_lo = np.zeros(len(self.self_pos))
        scale_hi = np.zeros(len(self.self_pos))
        trap = np.zeros(len(self.self_pos), dtype=bool)
        has = np.zeros(len(self.self_pos), dtype=bool)
        has[rows] = True
        trap[rows] = hs >= 1.0
        with np.errstate(divide="ignore"):
            scale_lo[rows] = 1.0 / (1.0 - np.minimum(ls, 1.0 - 1e-300))
            scale_hi[rows] = np.where(hs >= 1.0, np.inf, 1.0 / (1.0 - np.minimum(hs, 1.0)))
        r = self.row_of_entry
        cond = has[r]
        qlo = np.minimum(clo * scale_lo[r], 1.0)
        qhi = np.minimum(chi * scale_hi[r], 1.0)
        ulo = np.where(cond, qlo, clo)
        uhi = np.where(cond, qhi, chi)
        relax = cond & ~trap[r]
        llo = np.where(relax, qlo, clo)
        lhi = np.where(relax, qhi, chi)
        ulo[sp] = 0.0
        uhi[sp] = 0.0
        relaxed_self = sp[~trap[rows]]
        llo[relaxed_self] = 0.0
        lhi[relaxed_self] = 0.0
        return llo, lhi, ulo, uhi

    def solve(self, lo: np.ndarray, hi: np.ndarray, kappa: float, max_sweeps: int = DEFAULT_MAX_SWEEPS,
              initial: str | None = None) -> ValueBounds:
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        llo, lhi, ulo, uhi = self.condition(*self.aggregate(lo, hi))
        vlo = self.init_lo.copy()
        vhi = self.init_hi.copy()
        sweeps, converged = kernels.interval_iterate(
            self.state_row_start, self.row_start, self.succ, llo, lhi, ulo, uhi,
            self.node_fixed, self.order, vlo, vhi, float(kappa), int(max_sweeps),
        )
        return ValueBounds(self.states, vlo[self.node_of], vhi[self.node_of], int(sweeps), bool(converged),
                           initial if initial is not None else self.states[0])


def compile_interval_mdp(imdp: IntervalMdp) -> tuple[SolverPlan, np.ndarray, np.ndarray]:
    rows = {}
    lo: list[float] = []
    hi: list[float] = []
    targets = set(imdp.target)
    for s in imdp.states:
        if s in targets:
            continue
        rs = []
        for a, dist in imdp.intervals.get(s, {}).items():
            rs.append(tuple(dist))
            for t, (l, h) in dist.items():
                lo.append(l)
                hi.append(h)
        rows[s] = rs
    plan = SolverPlan(imdp.states, rows, {t: (1.0, 1.0) for t in targets})
    return plan, np.array(lo), np.array(hi)


def interval_iteration(imdp: IntervalMdp, kappa: float = 1e-6, max_sweeps: int = DEFAULT_MAX_SWEEPS) -> ValueBounds:
    """Sound lower and upper bounds on the maximal reachability value of every state."""
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    plan, lo, hi = compile_interval_mdp(imdp)
    bounds = plan.solve(lo, hi, kappa, max_sweeps, imdp.initial)
    if not bounds.converged:
        raise IterationCapError(bounds)
    return bounds
