"""Sample, estimate, solve: the end-to-end statistical model checking loop.

Results are plain JSON documents. They are a pure function of the model and
the configuration (wall time is only added on request), so a rerun with the
same configuration reproduces the output byte for byte.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from smcmdp.budget import Allocation, EstimationTask, Rule, allocate, enumerate_tasks, independence_delta_d
from smcmdp.complexity import coverage_curve, fmt, ratio_grid, required_n_at_phat, write_ratio_grid
from smcmdp.intervals import CiMethod, confidence_interval
from smcmdp.model import Mdp, exact_reachability_value, load_model
from smcmdp.quotient import Quotient, Transforms, build_quotient
from smcmdp.sampler import DEFAULT_STEP_CAP, BlackSampler, CountsTable, Sampler, SamplerConfig
from smcmdp.solver import SolverPlan, ValueBounds

BLACK_STEP_CAP = 10**4
VIRTUAL = "?unseen"
ADAPTIVE_NOTE = (
    "bounds are re-checked after every batch; each look uses the fixed-sample "
    "intervals, so the overall confidence under repeated looks is not guaranteed "
    "to be 1 - delta (use fixed_paths for a single look)"
)
ABLATION_AXES = ("cp", "small-support", "independence", "equivalence", "chains", "scc-fragments")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: str
    epsilon: float = 0.01
    delta: float = 0.1
    ci_method: str = "cp"
    small_support: bool = True
    independence: bool = True
    equivalence: bool = True
    chains: bool = True
    scc_fragments: bool = True
    batch_size: int = 1000
    max_batches: int = 1000
    fixed_paths: int | None = None
    seed: int = 0
    mode: str = "grey"
    p_min: float | None = None
    step_cap: int | None = None
    output: str | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.epsilon <= 1.0):
            raise ConfigError("epsilon must be in (0, 1]")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError("delta must be in (0, 1)")
        CiMethod.parse(self.ci_method)
        if self.batch_size < 1 or self.max_batches < 1:
            raise ConfigError("batch size and max batches must be >= 1")
        if self.fixed_paths is not None and self.fixed_paths < 0:
            raise ConfigError("fixed paths must be >= 0")
        if self.mode not in ("grey", "black"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "black" and not (self.p_min is not None and 0.0 < self.p_min <= 1.0):
            raise ConfigError("black mode needs p_min in (0, 1]")
        if self.step_cap is not None and self.step_cap < 1:
            raise ConfigError("step cap must be >= 1")

    @property
    def method(self) -> CiMethod:
        return CiMethod.parse(self.ci_method)

    @property
    def transforms(self) -> Transforms:
        return Transforms(self.equivalence, self.scc_fragments, self.chains)

    @property
    def kappa(self) -> float:
        return self.epsilon / 10.0

    def without(self, axis: str) -> RunConfig:
        """The configuration with one improvement switched off."""
        if axis == "cp":
            return replace(self, ci_method=CiMethod.HOEFFDING.value)
        key = axis.replace("-", "_")
        if key not in ("small_support", "independence", "equivalence", "chains", "scc_fragments"):
            raise ConfigError(f"unknown ablation axis {axis!r}")
        return replace(self, **{key: False})

    def baseline(self) -> RunConfig:
        return replace(self, ci_method=CiMethod.HOEFFDING.value, small_support=False, independence=False,
                       equivalence=False, chains=False, scc_fragments=False)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("output")
        d["ci_method"] = self.method.value
        return d


@dataclass
class RunResult:
    config: RunConfig
    bounds: tuple[float, float]
    converged: bool
    paths: int
    steps: int
    cap_hits: int
    batches: int
    transitions_original: int
    transitions_transformed: int
    tasks: int
    transforms: list[dict]
    budget: dict
    wall_time: float | None = None
    history: list[dict] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.bounds[1] - self.bounds[0]

    def to_json(self) -> dict:
        out = {
            "config": self.config.to_json(),
            "bounds": [self.bounds[0], self.bounds[1]],
            "gap": self.gap,
            "converged": self.converged,
            "paths": self.paths,
            "steps": self.steps,
            "cap_hits": self.cap_hits,
            "batches": self.batches,
            "transitions_original": self.transitions_original,
            "transitions_transformed": self.transitions_transformed,
            "tasks": self.tasks,
            "transforms": self.transforms,
            "budget": self.budget,
            "stopping": {
                "mode": "fixed" if self.config.fixed_paths is not None else "adaptive",
                "note": None if self.config.fixed_paths is not None else ADAPTIVE_NOTE,
            },
            "history": self.history,
        }
        if self.wall_time is not None:
            out["wall_time"] = self.wall_time
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------------ models


def bundled_models() -> dict[str, dict]:
    """Name -> metadata (file, epsilon, description) of the shipped models."""
    text = resources.files("smcmdp").joinpath("models/index.json").read_text()
    return json.loads(text)


def resolve_model(name_or_path: str) -> Mdp:
    if os.path.exists(name_or_path):
        return load_model(name_or_path)
    index = bundled_models()
    if name_or_path in index:
        text = resources.files("smcmdp").joinpath("models/" + index[name_or_path]["file"]).read_text()
        from smcmdp.model import parse_model

        return parse_model(text)
    raise FileNotFoundError(f"no model file or bundled model named {name_or_path!r}")


# ------------------------------------------------------------------ estimation


@lru_cache(maxsize=1 << 16)
def _ci(method: CiMethod, n: int, k: int, delta: float) -> tuple[float, float]:
    c = confidence_interval(method, n, k, delta, allow_empty=True)
    return c.lo, c.hi


class GreyEstimator:
    """Turns counts of the transformed model into per-entry intervals."""

    def __init__(self, q: Quotient, tasks: Sequence[EstimationTask], delta_t: Sequence[float], method: CiMethod):
        self.q = q
        self.tasks = list(tasks)
        self.delta_t = list(delta_t)
        self.method = method
        sizes = [len(t.successors) for t in self.tasks]
        self.start = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.lo = np.zeros(int(self.start[-1]))
        self.hi = np.ones(int(self.start[-1]))
        self._seen_n = np.full(len(self.tasks), -1, dtype=np.int64)
        for i, t in enumerate(self.tasks):
            if t.rule is Rule.NONE:
                self.lo[self.start[i]:self.start[i + 1]] = 1.0

    def update(self, counts: CountsTable) -> tuple[np.ndarray, np.ndarray]:
        for i, t in enumerate(self.tasks):
            n = int(counts.n[i])
            if t.rule is Rule.NONE or n == self._seen_n[i]:
                continue
            self._seen_n[i] = n
            a, b = self.start[i], self.start[i + 1]
            ks = counts.k[a:b]
            if n == 0:
                self.lo[a:b] = 0.0
                self.hi[a:b] = 1.0
            elif t.rule is Rule.COMPLEMENT:
                # estimate the more frequent successor; the earlier one on ties
                j = 0 if ks[0] >= ks[1] else 1
                lo, hi = _ci(self.method, n, int(ks[j]), self.delta_t[i])
                self.lo[a + j], self.hi[a + j] = lo, hi
                self.lo[a + 1 - j], self.hi[a + 1 - j] = 1.0 - hi, 1.0 - lo
            else:
                for j in range(b - a):
                    self.lo[a + j], self.hi[a + j] = _ci(self.method, n, int(ks[j]), self.delta_t[i])
        return self.lo, self.hi


def _solver_plan(q: Quotient) -> SolverPlan:
    rows = {s: [sl.succ for sl in q.slots.get(s, [])] for s in q.states if s not in q.stop}
    fixed = {t: (1.0, 1.0) for t in q.targets}
    fixed.update({z: (0.0, 0.0) for z in q.zeros})
    return SolverPlan(q.states, rows, fixed)


def _initial_bounds(b: ValueBounds, initial: str) -> tuple[float, float]:
    lo, hi = b.at(initial)
    return max(0.0, min(1.0, lo)), max(0.0, min(1.0, hi))


def _schedule(cfg: RunConfig) -> tuple[list[int], bool]:
    """Batch sizes and whether to solve after every batch."""
    if cfg.fixed_paths is not None:
        n = cfg.fixed_paths
        sizes = [cfg.batch_size] * (n // cfg.batch_size)
        if n % cfg.batch_size:
            sizes.append(n % cfg.batch_size)
        return sizes, False
    return [cfg.batch_size] * cfg.max_batches, True


def run_smc(cfg: RunConfig, m: Mdp | None = None, timing: bool = False) -> RunResult:
    """One statistical model checking run; deterministic in (model, cfg)."""
    t0 = time.perf_counter()
    m = m if m is not None else resolve_model(cfg.model)
    if cfg.mode == "black":
        res = _run_black(cfg, m)
    else:
        res = _run_grey(cfg, m)
    if timing:
        res.wall_time = time.perf_counter() - t0
    return res


def _run_grey(cfg: RunConfig, m: Mdp) -> RunResult:
    q = build_quotient(m, cfg.transforms)
    tasks = enumerate_tasks(q, cfg.small_support)
    plan = allocate(tasks, cfg.delta, cfg.independence)
    estimator = GreyEstimator(q, tasks, plan.delta_t, cfg.method)
    budget = {"mode": plan.mode.value, "tasks": plan.to_json(tasks)}
    base = dict(
        config=cfg,
        transitions_original=m.n_transitions,
        transitions_transformed=q.n_transitions,
        tasks=sum(t.n_direct for t in tasks),
        transforms=q.report,
        budget=budget,
    )
    if q.initial in q.stop:
        v = 1.0 if q.initial in q.targets else 0.0
        return RunResult(bounds=(v, v), converged=True, paths=0, steps=0, cap_hits=0, batches=0, **base)
    sampler = Sampler(m, q, SamplerConfig(cfg.seed, cfg.step_cap or DEFAULT_STEP_CAP))
    counts = sampler.new_counts()
    solver = _solver_plan(q)
    sizes, every = _schedule(cfg)
    history = []
    bounds = (0.0, 1.0)
    done = 0
    batches = 0
    for i, size in enumerate(sizes):
        sampler.run(done, size, counts)
        done += size
        batches += 1
        if every or i == len(sizes) - 1:
            lo, hi = estimator.update(counts)
            b = solver.solve(lo, hi, cfg.kappa, initial=q.initial)
            bounds = _initial_bounds(b, q.initial)
            history.append({"paths": done, "lo": bounds[0], "hi": bounds[1]})
            if every and bounds[1] - bounds[0] <= cfg.epsilon:
                break
    if not sizes:
        lo, hi = estimator.update(counts)
        bounds = _initial_bounds(solver.solve(lo, hi, cfg.kappa, initial=q.initial), q.initial)
    return RunResult(bounds=bounds, converged=bounds[1] - bounds[0] <= cfg.epsilon, paths=counts.paths,
                     steps=counts.steps, cap_hits=counts.cap_hits, batches=batches, history=history, **base)


# ------------------------------------------------------------------ black box


class BlackEstimator:
    """Interval model over observed successors plus one virtual successor for unseen mass.

    A distribution keeps the virtual successor (value interval [0, 1]) until
    its support is declared complete. Every distribution can have at most
    min(|S|, floor(1 / p_min)) successors, which fixes the per-transition
    budget in advance.
    """

    def __init__(self, m: Mdp, keys: Sequence[tuple[str, str]], cfg: RunConfig):
        self.m = m
        self.keys = list(keys)
        self.cfg = cfg
        self.k_max = min(len(m.states), math.floor(1.0 / cfg.p_min + 1e-12))
        d = len(self.keys)
        if cfg.independence and d:
            self.delta_d = independence_delta_d(cfg.delta, d)
            self.delta_t = self.delta_d / self.k_max
            self.mode = Allocation.INDEPENDENCE
        else:
            self.delta_t = cfg.delta / (d * self.k_max) if d else 0.0
            self.delta_d = self.delta_t * self.k_max
            self.mode = Allocation.UNIFORM

    def complete(self, counts: CountsTable) -> list[bool]:
        from smcmdp.sampler import blackbox_support_update

        return blackbox_support_update(counts, self.cfg.method, self.delta_t, self.cfg.p_min)

    def build(self, counts: CountsTable):
        """(states, rows, fixed, lo, hi, value-0 states) for the current counts."""
        m = self.m
        done = self.complete(counts)
        rows: dict[str, list[tuple[str, ...]]] = {}
        lo: list[float] = []
        hi: list[float] = []
        for i, (s, a) in enumerate(self.keys):
            n = int(counts.n[i])
            ks = counts.counts_of(i)
            succ = [t for t, k in zip(m.states, ks) if k > 0]
            row = list(succ)
            for t, k in zip(m.states, ks):
                if k > 0:
                    l, h = _ci(self.cfg.method, n, int(k), self.delta_t)
                    lo.append(l)
                    hi.append(h)
            if not done[i]:
                row.append(VIRTUAL)
                lo.append(0.0)
                hi.append(1.0)
            rows.setdefault(s, []).append(tuple(row))
        states = list(m.states) + [VIRTUAL]
        fixed = {t: (1.0, 1.0) for t in m.target}
        fixed[VIRTUAL] = (0.0, 1.0)
        # value 0 by learned support: cannot reach a target or anything still unknown
        pred: dict[str, set[str]] = {s: set() for s in states}
        for s, rs in rows.items():
            for r in rs:
                for t in r:
                    pred[t].add(s)
        alive = set(m.target) | {VIRTUAL}
        frontier = list(alive)
        while frontier:
            t = frontier.pop()
            for s in pred[t]:
                if s not in alive:
                    alive.add(s)
                    frontier.append(s)
        zeros = {s for s in m.states if s in rows and s not in alive}
        return states, rows, fixed, np.array(lo), np.array(hi), zeros


def _run_black(cfg: RunConfig, m: Mdp) -> RunResult:
    scfg = SamplerConfig(cfg.seed, cfg.step_cap or BLACK_STEP_CAP, "black", cfg.p_min)
    sampler = BlackSampler(m, scfg)
    counts = sampler.new_counts()
    est = BlackEstimator(m, sampler.keys, cfg)
    budget = {
        "mode": est.mode.value,
        "distributions": len(est.keys),
        "max_successors": est.k_max,
        "delta_d": est.delta_d,
        "delta_t": est.delta_t,
    }
    base = dict(config=cfg, transitions_original=m.n_transitions, transforms=[], budget=budget)
    if m.initial in m.target:
        return RunResult(bounds=(1.0, 1.0), converged=True, paths=0, steps=0, cap_hits=0, batches=0,
                         transitions_transformed=0, tasks=0, **base)
    sizes, every = _schedule(cfg)
    history = []
    bounds = (0.0, 1.0)
    done = 0
    batches = 0
    learned = 0
    for i, size in enumerate(sizes):
        sampler.run(done, size, counts)
        done += size
        batches += 1
        if every or i == len(sizes) - 1:
            states, rows, fixed, lo, hi, zeros = est.build(counts)
            sampler.set_stop(zeros)
            learned = len(lo)
            b = SolverPlan(states, rows, fixed).solve(lo, hi, cfg.kappa, initial=m.initial)
            lo0, hi0 = b.at(m.initial)
            bounds = (max(0.0, lo0), min(1.0, hi0))
            history.append({"paths": done, "lo": bounds[0], "hi": bounds[1]})
            if every and bounds[1] - bounds[0] <= cfg.epsilon:
                break
    return RunResult(bounds=bounds, converged=bounds[1] - bounds[0] <= cfg.epsilon, paths=counts.paths,
                     steps=counts.steps, cap_hits=counts.cap_hits, batches=batches, history=history,
                     transitions_transformed=learned, tasks=len(est.keys) * est.k_max, **base)


# ------------------------------------------------------------------ experiments


def _run_cell(args: tuple[RunConfig, str]) -> tuple[str, dict]:
    cfg, label = args
    try:
        r = run_smc(cfg)
        return label, {"paths": r.paths, "converged": r.converged, "bounds": list(r.bounds)}
    except Exception as exc:  # reported per cell; other cells continue
        return label, {"error": f"{type(exc).__name__}: {exc}"}


def _map(fn, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def geomean(xs: Sequence[float]) -> float:
    return float(math.exp(sum(math.log(x) for x in xs) / len(xs))) if xs else float("nan")


def run_ablation(cfg: RunConfig, models: Sequence[str], seeds: Sequence[int],
                 axes: Sequence[str] = ABLATION_AXES, jobs: int = 1) -> dict:
    """Sample reduction factor of each improvement: paths without it / paths with everything.

    Per model the factor is the geometric mean over seeds; the aggregate row
    reports min, geometric mean and max over models.
    """
    for a in axes:
        if a not in ABLATION_AXES:
            raise ConfigError(f"unknown ablation axis {a!r}")
    cells = []
    for name in models:
        eps = bundled_models().get(name, {}).get("epsilon", cfg.epsilon)
        full = replace(cfg, model=name, epsilon=eps)
        for seed in seeds:
            cells.append((replace(full, seed=seed), f"{name}|full|{seed}"))
            cells.append((replace(full.baseline(), seed=seed), f"{name}|baseline|{seed}"))
            for a in axes:
                cells.append((replace(full.without(a), seed=seed), f"{name}|{a}|{seed}"))
    results = dict(_map(_run_cell, cells, jobs))
    per_model: dict[str, dict] = {}
    for name in models:
        row: dict[str, object] = {}
        for col in ("baseline", *axes):
            ratios = []
            errors = []
            for seed in seeds:
                f = results[f"{name}|full|{seed}"]
                o = results[f"{name}|{col}|{seed}"]
                if "error" in f or "error" in o or not (f["converged"] and o["converged"]):
                    errors.append(seed)
                    continue
                ratios.append(max(o["paths"], 1) / max(f["paths"], 1))
            row[col] = {"ratio": geomean(ratios) if ratios else None, "min": min(ratios, default=None),
                        "max": max(ratios, default=None), "failed_seeds": errors}
        per_model[name] = row
    summary = {}
    for col in ("baseline", *axes):
        vals = [per_model[n][col]["ratio"] for n in models if per_model[n][col]["ratio"] is not None]
        summary[col] = {"min": min(vals, default=None), "geomean": geomean(vals) if vals else None,
                        "max": max(vals, default=None)}
    return {"axes": list(axes), "seeds": list(seeds), "models": per_model, "summary": summary, "cells": results}


def coverage_experiment(cfg: RunConfig, trials: int, paths: int, jobs: int = 1) -> dict:
    """Fraction of seeded fixed-budget runs whose bounds contain the exact value."""
    m = resolve_model(cfg.model)
    exact = exact_reachability_value(m)[m.initial]
    cells = [(replace(cfg, seed=cfg.seed + i, fixed_paths=paths), str(i)) for i in range(trials)]
    results = _map(_run_cell, cells, jobs)
    hits = 0
    failed = 0
    widths = []
    for _, r in results:
        if "error" in r:
            failed += 1
            continue
        lo, hi = r["bounds"]
        widths.append(hi - lo)
        if lo - 1e-12 <= exact <= hi + 1e-12:
            hits += 1
    done = trials - failed
    return {
        "model": cfg.model,
        "method": cfg.method.value,
        "sound_method": cfg.method.sound,
        "delta": cfg.delta,
        "paths": paths,
        "trials": trials,
        "failed": failed,
        "exact": exact,
        "contained": hits,
        "coverage": hits / done if done else float("nan"),
        "mean_width": float(np.mean(widths)) if widths else float("nan"),
    }


FIG_EPSILONS = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5)
FIG_PHATS = tuple(round(x, 4) for x in np.concatenate([[0.001, 0.005], np.linspace(0.01, 0.99, 99), [0.995, 0.999]]))
GRID_DELTAS = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5)
GRID_EPSILONS = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5)


def emit_figures(out_dir: str, coverage_points: int = 1001) -> list[str]:
    """Write the sample-complexity and coverage tables as CSV files."""
    import csv

    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "ratio_eps.csv")
    write_ratio_grid(path, ratio_grid([0.01], FIG_EPSILONS))
    written.append(path)

    path = os.path.join(out_dir, "ratio_phat.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "epsilon", "phat", "n_hoeffding", "n_cp", "ratio"])
        for p in FIG_PHATS:
            nh = required_n_at_phat(CiMethod.HOEFFDING, 0.01, 0.01, p)
            nc = required_n_at_phat(CiMethod.CLOPPER_PEARSON, 0.01, 0.01, p)
            w.writerow([fmt(0.01), fmt(0.01), fmt(p), nh, nc, fmt(nh / nc)])
    written.append(path)

    path = os.path.join(out_dir, "ratio_grid.csv")
    write_ratio_grid(path, ratio_grid(GRID_DELTAS, GRID_EPSILONS))
    written.append(path)

    path = os.path.join(out_dir, "coverage_wilson.csv")
    ps = np.linspace(0.0, 1.0, coverage_points)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "delta", "p", "coverage"])
        for delta in (0.1, 0.01):
            cov = coverage_curve(CiMethod.WILSON_CC, 100, delta, ps)
            for p, c in zip(ps, cov):
                w.writerow([100, fmt(delta), fmt(p), fmt(c)])
    written.append(path)
    return written


def solve_exact(m: Mdp) -> dict:
    values = exact_reachability_value(m)
    return {"initial": m.initial, "value": values[m.initial], "values": values}


def transform_report(m: Mdp, transforms: Transforms, small_support: bool = True) -> dict:
    q = build_quotient(m, transforms)
    tasks = enumerate_tasks(q, small_support)
    return {
        "transitions_original": m.n_transitions,
        "transitions_transformed": q.n_transitions,
        "states_transformed": len(q.states),
        "tasks": sum(t.n_direct for t in tasks),
        "transforms": q.report,
        "distributions": [
            {"state": sl.state, "action": sl.action, "successors": list(sl.succ)} for sl in q.all_slots()
        ],
    }

