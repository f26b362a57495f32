"""Structural transformations of a grey-box model.

A :class:`Quotient` is the transformed model together with the bookkeeping
needed to map ground observations into it. Transformed states are either
ground states, the merged ``GOAL``/``SINK`` classes, or collapsed end
components. Each transformed action (a :class:`Slot`) is backed by a
:class:`Move`: take a ground action at ``origin``, then, while the walk is in
a state absorbed by a fragment, follow the fixed ``choices``. The first
non-absorbed ground state reached is the exit; its representative is the
transformed successor.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from smcmdp.graph import mec_decomposition, tarjan, value0_states, value1_states
from smcmdp.model import Mdp, SupportMdp

STRATEGY_CAP = 1 << 20
ENUMERATION_CAP = 4096


class FragmentError(ValueError):
    """A state set cannot be quotiented as a fragment."""


@dataclass(frozen=True, order=True)
class Move:
    origin: str
    action: str
    choices: tuple[tuple[str, str], ...] = ()

    @property
    def choice_map(self) -> dict[str, str]:
        return dict(self.choices)


@dataclass(frozen=True)
class Slot:
    state: str
    action: str
    move: Move
    succ: tuple[str, ...]
    # collapsed end components drop their own state from the successors
    # (the leaving distribution is conditioned on actually leaving)
    drop_self: bool = False


@dataclass(frozen=True)
class Fragment:
    states: tuple[str, ...]
    entries: tuple[str, ...]
    exits: tuple[str, ...]
    strategies: int
    kind: str = "scc"


@dataclass
class Quotient:
    ground: SupportMdp
    states: list[str]
    initial: str
    targets: set[str]
    zeros: set[str]
    rep: dict[str, str | None]
    slots: dict[str, list[Slot]]
    absorbed: set[str] = field(default_factory=set)
    internal: set[tuple[str, str]] = field(default_factory=set)
    collapsed: dict[str, tuple[str, ...]] = field(default_factory=dict)
    ground_stop: set[str] = field(default_factory=set)
    goal: str | None = None
    sink: str | None = None
    report: list[dict] = field(default_factory=list)

    # graph protocol
    @property
    def edges(self) -> dict[str, dict[str, tuple[str, ...]]]:
        return {s: {sl.action: sl.succ for sl in self.slots.get(s, [])} for s in self.states}

    @property
    def target(self) -> set[str]:
        return self.targets

    @property
    def stop(self) -> set[str]:
        return self.targets | self.zeros

    @property
    def n_transitions(self) -> int:
        return sum(len(sl.succ) for s in self.states for sl in self.slots.get(s, []))

    def all_slots(self) -> list[Slot]:
        return [sl for s in self.states for sl in self.slots.get(s, [])]

    def copy(self) -> Quotient:
        return replace(
            self,
            states=list(self.states),
            targets=set(self.targets),
            zeros=set(self.zeros),
            rep=dict(self.rep),
            slots={s: list(v) for s, v in self.slots.items()},
            absorbed=set(self.absorbed),
            internal=set(self.internal),
            collapsed=dict(self.collapsed),
            ground_stop=set(self.ground_stop),
            report=list(self.report),
        )

    def is_plain(self, s: str) -> bool:
        """A transformed state that is still exactly one ground state."""
        return s in self.ground.edges and self.rep.get(s) == s and s not in self.collapsed

    def slot_action_map(self) -> dict[str, dict[str, Slot]]:
        return {s: {sl.action: sl for sl in self.slots.get(s, [])} for s in self.states}


def _unique(name: str, taken: set[str]) -> str:
    while name in taken:
        name = "_" + name + "_"
    return name


# --------------------------------------------------------------------- core


def move_exits(q: Quotient, move: Move) -> set[str]:
    """Ground states where a move can leave the absorbed region."""
    edges = q.ground.edges
    choice = move.choice_map
    out: set[str] = set()
    seen: set[str] = set()
    frontier = list(edges[move.origin][move.action])
    while frontier:
        x = frontier.pop()
        if x in seen:
            continue
        seen.add(x)
        if x in q.absorbed:
            if x not in choice:
                raise FragmentError(f"move {move} reaches absorbed state {x!r} without a choice")
            frontier.extend(edges[x][choice[x]])
        else:
            out.add(x)
    return out


def _slot_succ(q: Quotient, slot: Slot, order: dict[str, int]) -> tuple[str, ...]:
    succ = {q.rep[x] for x in move_exits(q, slot.move)}
    succ.discard(None)
    if slot.drop_self:
        succ.discard(slot.state)
    return tuple(sorted(succ, key=lambda t: order.get(t, len(order))))


def _refresh(q: Quotient) -> None:
    """Recompute successors and drop transformed states unreachable from the initial state."""
    order = {s: i for i, s in enumerate(q.states)}
    for s in q.states:
        fresh = []
        seen_moves = set()
        for sl in q.slots.get(s, []):
            if sl.move in seen_moves:
                continue
            seen_moves.add(sl.move)
            succ = _slot_succ(q, sl, order)
            if succ:
                fresh.append(replace(sl, succ=succ))
        q.slots[s] = fresh
    stop = q.stop
    seen = {q.initial}
    frontier = [q.initial]
    while frontier:
        s = frontier.pop()
        if s in stop:
            continue
        for sl in q.slots.get(s, []):
            for t in sl.succ:
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
    dropped = [s for s in q.states if s not in seen]
    q.states = [s for s in q.states if s in seen]
    for s in dropped:
        q.slots.pop(s, None)
        q.collapsed.pop(s, None)
    q.targets &= seen
    q.zeros &= seen


def _record(q: Quotient, kind: str, before: tuple[int, int], **detail) -> None:
    q.report.append(
        {
            "transform": kind,
            "states_before": before[0],
            "states_after": len(q.states),
            "transitions_before": before[1],
            "transitions_after": q.n_transitions,
            **detail,
        }
    )


def identity_quotient(g: SupportMdp) -> Quotient:
    """The untransformed model; targets and value-0 states stop sampling."""
    zero = value0_states(g, g.target)
    stop = set(g.target) | zero
    q = Quotient(
        ground=g,
        states=list(g.states),
        initial=g.initial,
        targets=set(g.target),
        zeros=set(zero) - set(g.target),
        rep={s: s for s in g.states},
        slots={s: ([] if s in stop else [Slot(s, a, Move(s, a), ()) for a in g.edges[s]]) for s in g.states},
        ground_stop=stop,
    )
    _refresh(q)
    return q


def merge_value_classes(q: Quotient) -> Quotient:
    """Merge value-1 states into GOAL and value-0 states into SINK."""
    q = q.copy()
    before = (len(q.states), q.n_transitions)
    g = q.ground
    one = value1_states(g, g.target)
    zero = value0_states(g, g.target)
    taken = set(g.states)
    goal = _unique("GOAL", taken)
    sink = _unique("SINK", taken | {goal})
    for s in g.states:
        if s in one:
            q.rep[s] = goal
        elif s in zero:
            q.rep[s] = sink
    new_states = [goal] if one else []
    new_states += [s for s in q.states if s not in one and s not in zero]
    if zero:
        new_states.append(sink)
    q.states = new_states
    for s in list(q.slots):
        if s in one or s in zero:
            del q.slots[s]
    q.slots[goal] = []
    q.slots[sink] = []
    q.targets = {goal}
    q.zeros = {sink}
    q.goal, q.sink = goal, sink
    q.ground_stop = set(g.target) | one | zero
    if q.initial in one:
        q.initial = goal
    elif q.initial in zero:
        q.initial = sink
    _refresh(q)
    _record(q, "merge-value-classes", before, value1=len(one), value0=len(zero))
    return q


def collapse_mecs(q: Quotient) -> Quotient:
    """Replace every end component (outside GOAL/SINK) by one state with its leaving actions."""
    q = q.copy()
    before = (len(q.states), q.n_transitions)
    live = [s for s in q.states if s not in q.stop]
    mecs = mec_decomposition(q, states=live)
    taken = set(q.ground.states) | set(q.states)
    sizes = []
    for mec in mecs.mecs:
        members = tuple(s for s in q.states if s in mec)
        name = _unique("{" + ",".join(members) + "}", taken)
        taken.add(name)
        sizes.append(len(members))
        new_slots = []
        for s in members:
            for sl in q.slots[s]:
                if sl.action in mec[s]:
                    if sl.move.choices:
                        raise FragmentError("end components must be collapsed before fragments are built")
                    q.internal.add((sl.move.origin, sl.move.action))
                else:
                    new_slots.append(Slot(name, f"{s}:{sl.action}", sl.move, (), drop_self=True))
            del q.slots[s]
        ground_members = tuple(x for x in q.ground.states if q.rep.get(x) in members)
        for x in ground_members:
            q.rep[x] = name
        q.collapsed[name] = ground_members
        pos = min(q.states.index(s) for s in members)
        q.states = [t for t in q.states if t not in members]
        q.states.insert(pos, name)
        if q.initial in members:
            q.initial = name
        q.slots[name] = new_slots
    _refresh(q)
    _record(q, "collapse-mecs", before, mecs=sizes)
    return q


# --------------------------------------------------------------- fragments


def eligible(q: Quotient, s: str) -> bool:
    return s != q.initial and s not in q.stop and q.is_plain(s) and bool(q.slots.get(s))


def _incoming(q: Quotient) -> dict[str, list[Slot]]:
    inc: dict[str, list[Slot]] = {s: [] for s in q.states}
    for sl in q.all_slots():
        for t in sl.succ:
            inc[t].append(sl)
    return inc


def _strategy_count(q: Quotient, states: Iterable[str]) -> int:
    n = 1
    for s in states:
        n *= len(q.slots[s])
    return n


def describe_fragment(q: Quotient, states: Iterable[str], kind: str = "scc") -> Fragment:
    r = [s for s in q.states if s in set(states)]
    rs = set(r)
    inc = _incoming(q)
    entries = tuple(s for s in r if any(sl.state not in rs for sl in inc[s]))
    exits = tuple(t for t in q.states if t not in rs and any(t in sl.succ for s in r for sl in q.slots[s]))
    return Fragment(tuple(r), entries, exits, _strategy_count(q, r), kind)


def chain_candidates(q: Quotient) -> list[Fragment]:
    """Single states with exactly one incoming transition (from another state)."""
    inc = _incoming(q)
    out = []
    for s in q.states:
        if not eligible(q, s):
            continue
        if len(inc[s]) == 1 and inc[s][0].state != s:
            out.append(describe_fragment(q, [s], "chain"))
    return out


def scc_candidates(q: Quotient) -> list[Fragment]:
    """Non-trivial SCCs of the eligible part of the model."""
    nodes = [s for s in q.states if eligible(q, s)]
    node_set = set(nodes)
    comps = tarjan(nodes, lambda s: [t for sl in q.slots[s] for t in sl.succ if t in node_set])
    out = []
    for comp in comps:
        if len(comp) == 1:
            s = comp[0]
            if not any(s in sl.succ for sl in q.slots[s]):
                continue
        out.append(describe_fragment(q, comp, "scc"))
    return out


def _compose(q: Quotient, entering: Slot, r: set[str], cap: int) -> list[Move]:
    """All flattened moves for one entering slot: one per internal MD strategy on reachable fragment states."""
    order = {s: i for i, s in enumerate(q.states)}
    land = [t for t in entering.succ if t in r]
    moves: list[Move] = []

    def reach(assigned: dict[str, Slot]) -> list[str]:
        seen = set(land)
        frontier = list(land)
        while frontier:
            s = frontier.pop()
            sl = assigned.get(s)
            if sl is None:
                continue
            for t in sl.succ:
                if t in r and t not in seen:
                    seen.add(t)
                    frontier.append(t)
        return sorted(seen, key=order.__getitem__)

    def emit(assigned: dict[str, Slot]) -> None:
        choice = dict(entering.move.choices)
        for s, sl in assigned.items():
            for key, val in ((s, sl.move.action), *sl.move.choices):
                if choice.get(key, val) != val:
                    return  # not memoryless on the flattened level
                choice[key] = val
        # the slot leaves its own ground state through sl.move.origin == s
        moves.append(Move(entering.move.origin, entering.move.action, tuple(sorted(choice.items()))))

    def walk(assigned: dict[str, Slot]) -> None:
        todo = [s for s in reach(assigned) if s not in assigned]
        if not todo:
            emit(assigned)
            if len(moves) > cap:
                raise FragmentError("too many internal strategies")
            return
        s = todo[0]
        for sl in q.slots[s]:
            assigned[s] = sl
            walk(assigned)
            del assigned[s]

    walk({})
    return list(dict.fromkeys(moves))


def _macro_name(q: Quotient, entering: Slot, move: Move) -> str:
    # only choices at states with a real alternative distinguish macros
    own = set(entering.move.choices)
    extra = [f"{x}>{a}" for x, a in move.choices if (x, a) not in own and len(q.ground.edges[x]) > 1]
    return f"{entering.action}[{','.join(extra)}]" if extra else entering.action


@dataclass(frozen=True)
class FragmentPlan:
    fragment: Fragment
    quotient_cost: int
    direct_cost: int
    total_before: int
    total_after: int
    result: Quotient


def plan_fragment(q: Quotient, states: Iterable[str], kind: str = "scc", cap: int = STRATEGY_CAP) -> FragmentPlan:
    """Build the fragment quotient for ``states`` and its cost figures, without committing."""
    r = set(states)
    for s in r:
        if not eligible(q, s):
            raise FragmentError(f"state {s!r} cannot be part of a fragment")
    if mec_decomposition(q, states=r).mecs:
        raise FragmentError("fragment contains an end component; collapse end components first")
    frag = describe_fragment(q, r, kind)
    if frag.strategies > cap:
        raise FragmentError(f"{frag.strategies} internal strategies exceed the cap of {cap}")
    new = q.copy()
    new.absorbed |= r
    for s in r:
        new.rep[s] = None
    entering = [sl for sl in q.all_slots() if sl.state not in r and any(t in r for t in sl.succ)]
    replaced: dict[Slot, list[Slot]] = {}
    for e in entering:
        replaced[e] = [Slot(e.state, _macro_name(q, e, mv), mv, (), e.drop_self) for mv in _compose(q, e, r, cap)]
    for s in new.states:
        if s in r:
            continue
        lst = []
        for sl in new.slots.get(s, []):
            lst.extend(replaced.get(sl, [sl]))
        new.slots[s] = lst
    new.states = [s for s in new.states if s not in r]
    for s in r:
        new.slots.pop(s, None)
    _refresh(new)
    composites = [sl for s in new.states for sl in new.slots.get(s, []) if sl.move in {m.move for v in replaced.values() for m in v}]
    quotient_cost = sum(len(sl.succ) for sl in composites) - sum(len([t for t in e.succ if t not in r]) for e in entering)
    direct_cost = sum(len(sl.succ) for s in r for sl in q.slots[s])
    total_before = direct_cost + sum(len(e.succ) for e in entering)
    total_after = sum(len(sl.succ) for sl in composites)
    return FragmentPlan(frag, quotient_cost, direct_cost, total_before, total_after, new)


def fragment_cost(q: Quotient, f: Fragment) -> tuple[int, int]:
    """(quotient_cost, direct_cost) of quotienting ``f``."""
    p = plan_fragment(q, f.states, f.kind)
    return p.quotient_cost, p.direct_cost


def fragment_quotient(q: Quotient, f: Fragment | Iterable[str]) -> Quotient:
    states = f.states if isinstance(f, Fragment) else tuple(f)
    kind = f.kind if isinstance(f, Fragment) else "scc"
    before = (len(q.states), q.n_transitions)
    p = plan_fragment(q, states, kind)
    _record(p.result, f"{kind}-fragment", before, fragment=list(p.fragment.states),
            quotient_cost=p.quotient_cost, direct_cost=p.direct_cost)
    return p.result


def _formula_cost(q: Quotient, f: Fragment) -> int:
    return len(f.entries) * f.strategies * len(f.exits)


def apply_scc_fragments(q: Quotient) -> Quotient:
    rejected: set[frozenset] = set()
    while True:
        progressed = False
        for f in scc_candidates(q):
            key = frozenset(f.states)
            if key in rejected:
                continue
            if f.strategies > STRATEGY_CAP or (f.strategies > ENUMERATION_CAP and _formula_cost(q, f) >= sum(len(sl.succ) for s in f.states for sl in q.slots[s])):
                rejected.add(key)
                continue
            try:
                p = plan_fragment(q, f.states, "scc")
            except FragmentError:
                rejected.add(key)
                continue
            if p.quotient_cost < p.direct_cost and p.total_after <= p.total_before:
                before = (len(q.states), q.n_transitions)
                q = p.result
                _record(q, "scc-fragment", before, fragment=list(f.states),
                        quotient_cost=p.quotient_cost, direct_cost=p.direct_cost)
                progressed = True
                break
            rejected.add(key)
        if not progressed:
            return q


def apply_chains(q: Quotient) -> Quotient:
    rejected: set[str] = set()
    while True:
        progressed = False
        for f in chain_candidates(q):
            s = f.states[0]
            if s in rejected:
                continue
            try:
                p = plan_fragment(q, f.states, "chain")
            except FragmentError:
                rejected.add(s)
                continue
            if p.quotient_cost <= p.direct_cost + 1 and p.total_after <= p.total_before:
                before = (len(q.states), q.n_transitions)
                q = p.result
                _record(q, "chain", before, fragment=[s], quotient_cost=p.quotient_cost, direct_cost=p.direct_cost)
                progressed = True
                break
            rejected.add(s)
        if not progressed:
            return q


@dataclass(frozen=True)
class Transforms:
    equivalence: bool = True
    scc_fragments: bool = True
    chains: bool = True


def build_quotient(g: SupportMdp | Mdp, transforms: Transforms = Transforms()) -> Quotient:
    """Apply the enabled transformations in the fixed order."""
    if isinstance(g, Mdp):
        g = g.support_view()
    q = identity_quotient(g)
    if transforms.equivalence:
        q = merge_value_classes(q)
        q = collapse_mecs(q)
    if transforms.scc_fragments:
        q = apply_scc_fragments(q)
    if transforms.chains:
        q = apply_chains(q)
    return q


# ------------------------------------------------------------ exact oracle


def exact_move_distribution(m: Mdp, absorbed: set[str], move: Move) -> dict[str, float]:
    """Exit distribution (over ground states) of a move, by solving the absorption system."""
    choice = move.choice_map
    first = m.actions[move.origin][move.action]
    inner: list[str] = []
    seen = set()
    frontier = [x for x in first if x in absorbed]
    while frontier:
        x = frontier.pop()
        if x in seen:
            continue
        seen.add(x)
        inner.append(x)
        frontier.extend(t for t in m.actions[x][choice[x]] if t in absorbed)
    pos = {x: i for i, x in enumerate(inner)}
    exits = sorted({t for x in inner for t in m.actions[x][choice[x]] if t not in absorbed} | {t for t in first if t not in absorbed}, key=m.index.__getitem__)
    epos = {t: j for j, t in enumerate(exits)}
    out = np.zeros(len(exits))
    for t, p in first.items():
        if t not in absorbed:
            out[epos[t]] += p
    if inner:
        a = np.eye(len(inner))
        b = np.zeros((len(inner), len(exits)))
        for x in inner:
            for t, p in m.actions[x][choice[x]].items():
                if t in absorbed:
                    a[pos[x], pos[t]] -= p
                else:
                    b[pos[x], epos[t]] += p
        absorb = np.linalg.solve(a, b)
        start = np.zeros(len(inner))
        for t, p in first.items():
            if t in absorbed:
                start[pos[t]] += p
        out += start @ absorb
    return {t: float(out[j]) for j, t in enumerate(exits) if out[j] > 0.0}


def exact_macro_distribution(m: Mdp, fragment: Iterable[str], entry: str, strategy: dict[str, str]) -> dict[str, float]:
    """Exit distribution when entering ``fragment`` at ``entry`` and following ``strategy`` inside it."""
    r = set(fragment)
    if entry not in r:
        raise ValueError("entry must belong to the fragment")
    origin_action = strategy[entry]
    choices = tuple(sorted((s, a) for s, a in strategy.items() if s in r and s != entry))
    # reuse the move machinery: the entry state plays the origin
    dist = exact_move_distribution(m, r - {entry}, Move(entry, origin_action, choices))
    if entry in dist:
        # walks that come back to the entry restart under the same strategy
        back = dist.pop(entry)
        dist = {t: p / (1.0 - back) for t, p in dist.items()}
    return dist


def instantiate(q: Quotient, m: Mdp) -> Mdp:
    """The transformed model with exact probabilities (oracle use only)."""
    actions: dict[str, dict[str, dict[str, float]]] = {}
    for s in q.states:
        acts: dict[str, dict[str, float]] = {}
        for sl in q.slots.get(s, []):
            dist: dict[str, float] = {}
            for x, p in exact_move_distribution(m, q.absorbed, sl.move).items():
                t = q.rep[x]
                dist[t] = dist.get(t, 0.0) + p
            if sl.drop_self:
                stay = dist.pop(s, 0.0)
                if stay >= 1.0:
                    continue
                dist = {t: p / (1.0 - stay) for t, p in dist.items()}
            total = sum(dist.values())
            acts[sl.action] = {t: p / total for t, p in dist.items()}
        if not acts:
            acts = {"stay": {s: 1.0}}
        actions[s] = acts
    return Mdp(tuple(q.states), q.initial, frozenset(q.targets), actions)
