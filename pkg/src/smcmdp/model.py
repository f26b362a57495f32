"""MDP data model, the JSON model format, and the exact value oracle.

Model document (UTF-8 JSON)::

    {
      "states":  ["s0", "s1", "goal"],
      "initial": "s0",
      "target":  ["goal"],
      "actions": {"s0": {"a": {"s1": 0.5, "goal": 0.5}}, ...}
    }

Every state needs at least one action; probabilities must be finite numbers
in (0, 1] summing to 1 within 1e-9 per distribution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

SUM_TOL = 1e-9


class ModelError(ValueError):
    """Malformed or invalid model document."""


def _freeze(actions) -> dict:
    return {s: {a: dict(d) for a, d in acts.items()} for s, acts in actions.items()}


@dataclass(frozen=True, eq=False)
class Mdp:
    """Ground-truth MDP. Treat as immutable."""

    states: tuple[str, ...]
    initial: str
    target: frozenset[str]
    actions: Mapping[str, Mapping[str, Mapping[str, float]]]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "target", frozenset(self.target))
        object.__setattr__(self, "actions", _freeze(self.actions))
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.states)})
        validate(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mdp):
            return NotImplemented
        return (
            self.states == other.states
            and self.initial == other.initial
            and self.target == other.target
            and _ordered(self.actions) == _ordered(other.actions)
        )

    @property
    def edges(self) -> dict[str, dict[str, tuple[str, ...]]]:
        return {s: {a: tuple(d) for a, d in acts.items()} for s, acts in self.actions.items()}

    def transitions(self) -> Iterator[tuple[str, str, str, float]]:
        for s in self.states:
            for a, dist in self.actions[s].items():
                for t, p in dist.items():
                    yield s, a, t, p

    @property
    def n_transitions(self) -> int:
        return sum(len(d) for acts in self.actions.values() for d in acts.values())

    def support_view(self) -> SupportMdp:
        return support_view(self)


def _ordered(actions) -> list:
    return [(s, [(a, list(d.items()) if isinstance(d, Mapping) else list(d)) for a, d in acts.items()]) for s, acts in actions.items()]


@dataclass(frozen=True)
class SupportMdp:
    """Grey-box view: supports only, no probabilities."""

    states: tuple[str, ...]
    initial: str
    target: frozenset[str]
    edges: Mapping[str, Mapping[str, tuple[str, ...]]]

    @property
    def n_transitions(self) -> int:
        return sum(len(d) for acts in self.edges.values() for d in acts.values())


@dataclass(frozen=True)
class IntervalMdp:
    """MDP with an interval [lo, hi] per transition."""

    states: tuple[str, ...]
    initial: str
    target: frozenset[str]
    intervals: Mapping[str, Mapping[str, Mapping[str, tuple[float, float]]]]

    def __post_init__(self) -> None:
        for s, acts in self.intervals.items():
            for a, dist in acts.items():
                lo = sum(v[0] for v in dist.values())
                hi = sum(v[1] for v in dist.values())
                for t, (l, h) in dist.items():
                    if not (0.0 <= l <= h <= 1.0):
                        raise ModelError(f"interval for {s}/{a}->{t} is not within [0, 1]: [{l}, {h}]")
                if lo > 1.0 + SUM_TOL or hi < 1.0 - SUM_TOL:
                    raise ModelError(f"intervals of {s}/{a} admit no distribution (sum lo={lo}, sum hi={hi})")

    @property
    def edges(self) -> dict[str, dict[str, tuple[str, ...]]]:
        return {s: {a: tuple(d) for a, d in acts.items()} for s, acts in self.intervals.items()}


def validate(m: Mdp) -> None:
    if len(set(m.states)) != len(m.states):
        raise ModelError("duplicate state names")
    known = set(m.states)
    if m.initial not in known:
        raise ModelError(f"initial state {m.initial!r} is not a declared state")
    for t in m.target:
        if t not in known:
            raise ModelError(f"target state {t!r} is not a declared state")
    for s in m.actions:
        if s not in known:
            raise ModelError(f"actions given for undeclared state {s!r}")
    for s in m.states:
        acts = m.actions.get(s)
        if not acts:
            raise ModelError(f"state {s!r} has an empty action set")
        for a, dist in acts.items():
            if not dist:
                raise ModelError(f"distribution {s}/{a} is empty")
            total = 0.0
            for t, p in dist.items():
                if t not in known:
                    raise ModelError(f"distribution {s}/{a} has dangling successor {t!r}")
                if isinstance(p, bool) or not isinstance(p, (int, float)) or not math.isfinite(p):
                    raise ModelError(f"distribution {s}/{a} has non-numeric probability for {t!r}")
                if not (0.0 < p <= 1.0):
                    raise ModelError(f"distribution {s}/{a} has probability {p} for {t!r} outside (0, 1]")
                total += p
            if abs(total - 1.0) > SUM_TOL:
                raise ModelError(f"distribution {s}/{a} sums to {total:.12g}")


def parse_model(text: str) -> Mdp:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"syntax error at line {e.lineno} column {e.colno}: {e.msg}") from None
    return from_document(doc)


def from_document(doc) -> Mdp:
    if not isinstance(doc, dict):
        raise ModelError("model document must be a JSON object")
    for key in ("states", "initial", "target", "actions"):
        if key not in doc:
            raise ModelError(f"missing key {key!r}")
    states, initial, target, actions = doc["states"], doc["initial"], doc["target"], doc["actions"]
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        raise ModelError("'states' must be an array of strings")
    if not isinstance(initial, str):
        raise ModelError("'initial' must be a string")
    if not isinstance(target, list) or not all(isinstance(s, str) for s in target):
        raise ModelError("'target' must be an array of strings")
    if not isinstance(actions, dict):
        raise ModelError("'actions' must be an object")
    for s, acts in actions.items():
        if not isinstance(acts, dict):
            raise ModelError(f"actions of {s!r} must be an object")
        for a, dist in acts.items():
            if not isinstance(dist, dict):
                raise ModelError(f"distribution {s}/{a} must be an object")
    ordered = {s: actions[s] for s in states if s in actions}
    ordered.update({s: v for s, v in actions.items() if s not in ordered})
    return Mdp(tuple(states), initial, frozenset(target), ordered)


def to_document(m: Mdp) -> dict:
    return {
        "states": list(m.states),
        "initial": m.initial,
        "target": [s for s in m.states if s in m.target],
        "actions": {s: {a: dict(d) for a, d in m.actions[s].items()} for s in m.states},
    }


def serialize_model(m: Mdp) -> str:
    # json writes floats with repr, the shortest round-tripping literal
    return json.dumps(to_document(m), indent=2) + "\n"


def load_model(path) -> Mdp:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def support_view(m: Mdp) -> SupportMdp:
    return SupportMdp(m.states, m.initial, m.target, m.edges)


def exact_reachability_value(m: Mdp, tol: float = 1e-12) -> dict[str, float]:
    """Maximal probability of reaching the target from every state.

    States with no support path to the target get 0; maximal end components
    are collapsed (keeping only their leaving actions, conditioned on leaving),
    after which every strategy terminates and policy iteration with exact
    linear solves gives the optimum. ``tol`` bounds the improvement threshold.
    """
    from smcmdp.graph import mec_decomposition, value0_states

    g = m.support_view()
    zero = value0_states(g, m.target)
    value = {s: (1.0 if s in m.target else 0.0) for s in m.states}
    rest = [s for s in m.states if s not in m.target and s not in zero]
    if not rest:
        return value
    mecs = mec_decomposition(g, states=set(rest))
    node_of: dict[str, int] = {}
    nodes: list[list[str]] = []
    for s in rest:
        if s in node_of:
            continue
        k = mecs.index.get(s)
        members = sorted(mecs.mecs[k], key=m.index.__getitem__) if k is not None else [s]
        for u in members:
            node_of[u] = len(nodes)
        nodes.append(members)
    n = len(nodes)
    # choices[i] = list of (constant reward, {node: prob}) per leaving action
    choices: list[list[tuple[float, dict[int, float]]]] = []
    for i, members in enumerate(nodes):
        opts = []
        for u in members:
            for dist in m.actions[u].values():
                stay = sum(p for t, p in dist.items() if node_of.get(t) == i)
                if stay >= 1.0 - 1e-15 or all(node_of.get(t) == i for t in dist):
                    continue
                leave = 1.0 - stay
                r = sum(p for t, p in dist.items() if t in m.target) / leave
                row: dict[int, float] = {}
                for t, p in dist.items():
                    j = node_of.get(t)
                    if j is not None and j != i:
                        row[j] = row.get(j, 0.0) + p / leave
                opts.append((r, row))
        choices.append(opts)
    policy = [0] * n
    v = np.zeros(n)
    for _ in range(10_000):
        a_mat = np.eye(n)
        b = np.zeros(n)
        for i in range(n):
            r, row = choices[i][policy[i]]
            b[i] = r
            for j, p in row.items():
                a_mat[i, j] -= p
        v = np.linalg.solve(a_mat, b)
        changed = False
        for i in range(n):
            best_q = None
            best_k = policy[i]
            for k, (r, row) in enumerate(choices[i]):
                q = r + sum(p * v[j] for j, p in row.items())
                if best_q is None or q > best_q:
                    best_q, best_k = q, k
            cur_r, cur_row = choices[i][policy[i]]
            cur_q = cur_r + sum(p * v[j] for j, p in cur_row.items())
            if best_q > cur_q + max(tol, 1e-14):
                policy[i] = best_k
                changed = True
        if not changed:
            break
    for i, members in enumerate(nodes):
        val = float(min(1.0, max(0.0, v[i])))
        for u in members:
            value[u] = val
    return value
