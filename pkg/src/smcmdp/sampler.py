"""Simulation of the ground truth and attribution of observations.

Paths follow the uniform scheduler over ground actions. Inside fragment
states the first draw at each state is remembered for the rest of that
traversal, so a traversal behaves like one fixed internal MD strategy; the
traversal is then attributed to the macro-action that agrees with those
choices. Choices the traversal never needed are completed from a per-path
auxiliary stream, which amounts to drawing the whole internal strategy up
front.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from smcmdp import kernels
from smcmdp.intervals import CiMethod, confidence_interval
from smcmdp.model import Mdp
from smcmdp.quotient import Move, Quotient
from smcmdp.rng import Stream

DEFAULT_STEP_CAP = 10**6


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    step_cap: int = DEFAULT_STEP_CAP
    mode: str = "grey"
    p_min: float | None = None

    def __post_init__(self) -> None:
        if self.step_cap < 1:
            raise ValueError("step cap must be >= 1")
        if self.mode not in ("grey", "black"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "black" and not (self.p_min is not None and 0.0 < self.p_min <= 1.0):
            raise ValueError("black mode needs p_min in (0, 1]")


@dataclass
class CountsTable:
    """Visit counts n per distribution and k per (distribution, successor)."""

    keys: list[tuple[str, str]]
    successors: list[tuple[str, ...]]
    start: np.ndarray
    n: np.ndarray
    k: np.ndarray
    paths: int = 0
    cap_hits: int = 0
    steps: int = 0

    @classmethod
    def empty(cls, keys: Sequence[tuple[str, str]], successors: Sequence[Sequence[str]]) -> CountsTable:
        start = np.zeros(len(keys) + 1, dtype=np.int64)
        start[1:] = np.cumsum([len(s) for s in successors])
        return cls(list(keys), [tuple(s) for s in successors], start,
                   np.zeros(len(keys), dtype=np.int64), np.zeros(int(start[-1]), dtype=np.int64))

    def counts_of(self, i: int) -> np.ndarray:
        return self.k[self.start[i]:self.start[i + 1]]

    def consistent(self) -> bool:
        sums = np.add.reduceat(self.k, self.start[:-1]) if len(self.k) else np.zeros(0, dtype=np.int64)
        empty = self.start[1:] == self.start[:-1]
        sums = np.where(empty, 0, sums)
        return bool(np.all(sums == self.n) and np.all(self.k >= 0))

    def copy(self) -> CountsTable:
        return CountsTable(self.keys, self.successors, self.start, self.n.copy(), self.k.copy(),
                           self.paths, self.cap_hits, self.steps)

    def merge(self, other: CountsTable) -> CountsTable:
        if self.keys != other.keys or self.successors != other.successors:
            raise ValueError("counts tables have different layouts")
        return CountsTable(self.keys, self.successors, self.start, self.n + other.n, self.k + other.k,
                           self.paths + other.paths, self.cap_hits + other.cap_hits, self.steps + other.steps)

    def rows(self):
        for i, (s, a) in enumerate(self.keys):
            for j, t in enumerate(self.successors[i]):
                yield s, a, t, int(self.n[i]), int(self.k[self.start[i] + j])

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["state", "action", "successor", "n", "k"])
            for row in self.rows():
                w.writerow(row)


@dataclass
class PathSummary:
    paths: int
    steps: int
    cap_hits: int
    unattributed: int = 0


class GroundArrays:
    """The ground truth in CSR form for the simulation kernel."""

    def __init__(self, m: Mdp):
        self.m = m
        idx = m.index
        row_start = [0]
        trans_start = [0]
        succ: list[int] = []
        cum: list[float] = []
        self.row_of: dict[tuple[str, str], int] = {}
        self.row_key: list[tuple[str, str]] = []
        for s in m.states:
            for a, dist in m.actions[s].items():
                self.row_of[(s, a)] = len(self.row_key)
                self.row_key.append((s, a))
                acc = 0.0
                for t, p in dist.items():
                    acc += p
                    succ.append(idx[t])
                    cum.append(acc)
                cum[-1] = 1.0  # u < 1 always finds a successor
                trans_start.append(len(succ))
            row_start.append(len(self.row_key))
        self.row_start = np.array(row_start, dtype=np.int64)
        self.trans_start = np.array(trans_start, dtype=np.int64)
        self.succ = np.array(succ, dtype=np.int64)
        self.cum = np.array(cum, dtype=np.float64)


def macro_strategy_choice(moves: Sequence[Move], visited: dict[str, str], actions_of, stream: Stream) -> int:
    """Index of the macro-action a traversal belongs to.

    ``visited`` holds the internal choices the traversal made. The choices at
    all other states that any candidate depends on are drawn uniformly (in a
    fixed state order) and the first move agreeing with the completed
    strategy is returned; -1 if none agrees.
    """
    domain = sorted({x for mv in moves for x, _ in mv.choices} - set(visited), key=actions_of.order)
    full = dict(visited)
    for x in domain:
        acts = actions_of(x)
        full[x] = acts[stream.index(len(acts))]
    for i, mv in enumerate(moves):
        if all(full.get(x) == a for x, a in mv.choices):
            return i
    return -1


class _ActionsOf:
    def __init__(self, m: Mdp):
        self.m = m
        self._acts = {s: list(m.actions[s]) for s in m.states}

    def __call__(self, s: str) -> list[str]:
        return self._acts[s]

    def order(self, s: str) -> int:
        return self.m.index[s]


class Sampler:
    """Grey-box sampler feeding the counts of a transformed model."""

    def __init__(self, m: Mdp, q: Quotient, cfg: SamplerConfig = SamplerConfig()):
        self.m = m
        self.q = q
        self.cfg = cfg
        self.ground = GroundArrays(m)
        self.tindex = {t: i for i, t in enumerate(q.states)}
        self.slots = q.all_slots()
        self.keys = [(sl.state, sl.action) for sl in self.slots]
        n_states = len(m.states)
        n_rows = len(self.ground.row_key)
        self.rep = np.full(n_states, -1, dtype=np.int64)
        for g, t in q.rep.items():
            if t is not None and t in self.tindex:
                self.rep[m.index[g]] = self.tindex[t]
        self.stop = np.zeros(n_states, dtype=np.uint8)
        for g in q.ground_stop:
            self.stop[m.index[g]] = 1
        self.absorbed = np.zeros(n_states, dtype=np.uint8)
        for g in q.absorbed:
            self.absorbed[m.index[g]] = 1
        self.slot_succ_start = np.zeros(len(self.slots) + 1, dtype=np.int64)
        self.slot_succ_start[1:] = np.cumsum([len(sl.succ) for sl in self.slots])
        self.slot_succ = np.array([self.tindex[t] for sl in self.slots for t in sl.succ], dtype=np.int64)
        self.families: dict[int, list[int]] = {}
        for i, sl in enumerate(self.slots):
            self.families.setdefault(self.ground.row_of[(sl.move.origin, sl.move.action)], []).append(i)
        self.plain_slot = np.full(n_rows, -1, dtype=np.int64)
        for row, fam in self.families.items():
            if len(fam) == 1 and not self.slots[fam[0]].move.choices:
                self.plain_slot[row] = fam[0]
            else:
                self.plain_slot[row] = -2
        self._actions_of = _ActionsOf(m)
        self._pick_cache: dict = {}
        self._succ_col = [
            {int(self.slot_succ[e]): e for e in range(self.slot_succ_start[i], self.slot_succ_start[i + 1])}
            for i in range(len(self.slots))
        ]

    def new_counts(self) -> CountsTable:
        return CountsTable.empty(self.keys, [sl.succ for sl in self.slots])

    def run(self, first_path: int, n_paths: int, counts: CountsTable) -> PathSummary:
        """Simulate paths ``first_path .. first_path + n_paths - 1`` into ``counts``."""
        g = self.ground
        complex_out: list = []
        status = np.zeros(n_paths, dtype=np.uint8)
        steps = kernels.simulate_paths(
            g.row_start, g.trans_start, g.succ, g.cum,
            self.stop, self.absorbed, self.plain_slot, self.rep,
            self.slot_succ_start, self.slot_succ,
            counts.n, counts.k,
            self.m.index[self.m.initial], self.cfg.seed, first_path, n_paths, self.cfg.step_cap,
            complex_out, status,
        )
        unattributed = self._attribute(complex_out, counts)
        hits = int(status.sum())
        counts.paths += n_paths
        counts.cap_hits += hits
        counts.steps += int(steps)
        return PathSummary(n_paths, int(steps), hits, unattributed)

    def _attribute(self, complex_out: list, counts: CountsTable) -> int:
        names = self.m.states
        row_key = self.ground.row_key
        missed = 0
        for path, row, exit_state, choices in complex_out:
            fam = self.families.get(row)
            if not fam:
                missed += 1
                continue
            pick = self._pick_cache.get((row, choices))
            if pick is None:
                visited = {names[x]: row_key[r][1] for x, r in choices}
                moves = [self.slots[i].move for i in fam]
                stream = Stream.for_path(self.cfg.seed, path, aux=True)
                pick = macro_strategy_choice(moves, visited, self._actions_of, stream)
                # without completion draws the answer depends on the choices alone
                if stream.counter == 0:
                    self._pick_cache[(row, choices)] = pick
            if pick < 0:
                missed += 1
                continue
            i = fam[pick]
            col = self._succ_col[i].get(int(self.rep[exit_state]))
            if col is not None:
                counts.n[i] += 1
                counts.k[col] += 1
        return missed


def sample_path(m: Mdp, cfg: SamplerConfig, q: Quotient, counts: CountsTable, path: int = 0,
                sampler: Sampler | None = None) -> PathSummary:
    """Sample the single path with index ``path`` into ``counts``."""
    sampler = sampler or Sampler(m, q, cfg)
    return sampler.run(path, 1, counts)


# ------------------------------------------------------------------ black box


class BlackSampler:
    """Sampler that only knows states and action names; supports are learned."""

    def __init__(self, m: Mdp, cfg: SamplerConfig):
        if cfg.mode != "black":
            raise ValueError("BlackSampler needs mode='black'")
        self.m = m
        self.cfg = cfg
        self.ground = GroundArrays(m)
        n = len(m.states)
        self.keys = [k for k in self.ground.row_key if k[0] not in m.target]
        self.slot_of_row = {self.ground.row_of[k]: i for i, k in enumerate(self.keys)}
        self.plain_slot = np.full(len(self.ground.row_key), -1, dtype=np.int64)
        for row, i in self.slot_of_row.items():
            self.plain_slot[row] = i
        self.rep = np.arange(n, dtype=np.int64)
        self.absorbed = np.zeros(n, dtype=np.uint8)
        self.slot_succ_start = np.arange(0, (len(self.keys) + 1) * n, n, dtype=np.int64)
        self.slot_succ = np.tile(np.arange(n, dtype=np.int64), len(self.keys))
        self.stop = np.zeros(n, dtype=np.uint8)
        for s in m.target:
            self.stop[m.index[s]] = 1

    def new_counts(self) -> CountsTable:
        return CountsTable.empty(self.keys, [self.m.states] * len(self.keys))

    def set_stop(self, states) -> None:
        self.stop[:] = 0
        for s in set(states) | set(self.m.target):
            self.stop[self.m.index[s]] = 1

    def run(self, first_path: int, n_paths: int, counts: CountsTable) -> PathSummary:
        g = self.ground
        status = np.zeros(n_paths, dtype=np.uint8)
        steps = kernels.simulate_paths(
            g.row_start, g.trans_start, g.succ, g.cum,
            self.stop, self.absorbed, self.plain_slot, self.rep,
            self.slot_succ_start, self.slot_succ,
            counts.n, counts.k,
            self.m.index[self.m.initial], self.cfg.seed, first_path, n_paths, self.cfg.step_cap,
            [], status,
        )
        hits = int(status.sum())
        counts.paths += n_paths
        counts.cap_hits += hits
        counts.steps += int(steps)
        return PathSummary(n_paths, int(steps), hits)


def blackbox_support_update(counts: CountsTable, method: CiMethod | str, delta_t: float | Sequence[float],
                            p_min: float) -> list[bool]:
    """Per distribution: is the observed support complete?

    Complete means the lower confidence bounds of the observed successors sum
    to more than 1 - p_min, so any unseen successor would have probability
    below p_min.
    """
    out = []
    for i in range(len(counts.keys)):
        n = int(counts.n[i])
        d = delta_t if isinstance(delta_t, float) else delta_t[i]
        if n == 0:
            out.append(False)
            continue
        ks = counts.counts_of(i)
        lo = sum(confidence_interval(method, n, int(k), d).lo for k in ks if k > 0)
        out.append(lo > 1.0 - p_min)
    return out
