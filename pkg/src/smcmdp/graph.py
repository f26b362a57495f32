"""Support-only graph analyses: SCCs, maximal end components, value classes.

Functions take any object with ``states`` and ``edges`` (state -> action ->
successor tuple), so they work on ground models, support views and
transformed models alike.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence


def tarjan(nodes: Sequence[Hashable], succ: Callable[[Hashable], Iterable[Hashable]]) -> list[list]:
    """Strongly connected components in reverse topological order (sinks first).

    Iterative, so deep graphs do not hit the recursion limit. Successors not
    in ``nodes`` are ignored.
    """
    member = set(nodes)
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    out: list[list] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter([t for t in succ(root) if t in member]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter([t for t in succ(w) if t in member])))
                    advanced = True
                    break
                if w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def successors(g, s) -> list:
    seen = {}
    for succ in g.edges.get(s, {}).values():
        for t in succ:
            seen[t] = None
    return list(seen)


def sccs(g, states: Iterable | None = None) -> list[list]:
    """SCCs of the support graph, reverse topological order."""
    nodes = list(g.states if states is None else states)
    return tarjan(nodes, lambda s: successors(g, s))


@dataclass(frozen=True)
class MecDecomposition:
    mecs: list[dict]  # each: state -> tuple of retained actions
    index: dict  # state -> MEC position

    def states_of(self, k: int) -> set:
        return set(self.mecs[k])


def mec_decomposition(g, states: Iterable | None = None) -> MecDecomposition:
    """Maximal end components, optionally restricted to a state subset.

    Repeatedly computes SCCs and drops actions whose support leaves the SCC
    of their state, until nothing changes.
    """
    cand = list(g.states if states is None else [s for s in g.states if s in set(states)])
    allowed = {s: list(g.edges.get(s, {})) for s in cand}
    comp_of = {s: 0 for s in cand}
    changed = True
    while changed:
        changed = False
        live = [s for s in cand if allowed[s]]
        live_set = set(live)
        # drop actions leaving the current candidate set
        for s in live:
            keep = [a for a in allowed[s] if all(t in live_set and comp_of.get(t) == comp_of[s] for t in g.edges[s][a])]
            if len(keep) != len(allowed[s]):
                allowed[s] = keep
                changed = True
        live = [s for s in cand if allowed[s]]
        comps = tarjan(live, lambda s: {t for a in allowed[s] for t in g.edges[s][a]})
        new_comp = {}
        for i, c in enumerate(comps):
            for s in c:
                new_comp[s] = i
        for s in cand:
            if not allowed[s]:
                new_comp[s] = -1
        if new_comp != comp_of:
            comp_of = new_comp
            changed = True
    groups: dict[int, dict] = {}
    for s in cand:
        if allowed[s] and comp_of[s] >= 0:
            groups.setdefault(comp_of[s], {})[s] = tuple(allowed[s])
    order = {s: i for i, s in enumerate(g.states)}
    mecs = sorted(groups.values(), key=lambda m: min(order[s] for s in m))
    index = {s: k for k, m in enumerate(mecs) for s in m}
    return MecDecomposition(mecs, index)


def _predecessors(g, states: Iterable) -> dict:
    pred: dict = {s: set() for s in states}
    for s in states:
        for succ in g.edges.get(s, {}).values():
            for t in succ:
                if t in pred:
                    pred[t].add(s)
    return pred


def can_reach(g, sources: Iterable, states: Iterable | None = None, through: Callable | None = None) -> set:
    """States that can reach ``sources`` along support edges (target states are not expanded)."""
    nodes = list(g.states if states is None else states)
    pred = _predecessors(g, nodes)
    seen = set(s for s in sources if s in pred)
    frontier = list(seen)
    while frontier:
        t = frontier.pop()
        for s in pred[t]:
            if s not in seen and (through is None or through(s)):
                seen.add(s)
                frontier.append(s)
    return seen


def value0_states(g, target: Iterable) -> set:
    """States with no support path to the target."""
    target = set(target)
    reach = can_reach(g, target, through=lambda s: s not in target)
    return set(g.states) - reach


def value1_states(g, target: Iterable) -> set:
    """States from which some strategy reaches the target almost surely."""
    target = set(target)
    states = list(g.states)
    u = set(states)
    while True:
        r = set(t for t in target if t in u)
        grew = True
        while grew:
            grew = False
            for s in states:
                if s in r or s not in u:
                    continue
                for succ in g.edges.get(s, {}).values():
                    if all(t in u for t in succ) and any(t in r for t in succ):
                        r.add(s)
                        grew = True
                        break
        if r == u:
            return r
        u = r


def reachable(g, start, stop: Iterable = ()) -> set:
    """States reachable from ``start``; states in ``stop`` are not expanded."""
    stop = set(stop)
    seen = {start}
    frontier = [start]
    while frontier:
        s = frontier.pop()
        if s in stop:
            continue
        for t in successors(g, s):
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return seen


def reverse_topological_order(nodes: Sequence, succ: Callable) -> list:
    """Nodes in reverse topological SCC order, flattened (successors first)."""
    return [s for comp in tarjan(nodes, succ) for s in comp]

