"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--paths N] [--repeat R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from smcmdp import _pykernels as py
from smcmdp import kernels
from smcmdp.model import IntervalMdp
from smcmdp.pipeline import resolve_model
from smcmdp.quotient import build_quotient
from smcmdp.sampler import Sampler, SamplerConfig
from smcmdp.solver import compile_interval_mdp


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def simulate_case(mod, n_paths: int):
    m = resolve_model("mec_grid")
    s = Sampler(m, build_quotient(m), SamplerConfig(seed=1))
    g = s.ground

    def go():
        counts = s.new_counts()
        mod.simulate_paths(g.row_start, g.trans_start, g.succ, g.cum, s.stop, s.absorbed, s.plain_slot, s.rep,
                           s.slot_succ_start, s.slot_succ, counts.n, counts.k, m.index[m.initial], 1, 0, n_paths,
                           10**6, [], np.zeros(n_paths, dtype=np.uint8))
    return go


def iterate_case(mod):
    m = resolve_model("ladder")
    imdp = IntervalMdp(m.states, m.initial, m.target, {
        s: {a: {t: (max(0.0, p - 0.01), min(1.0, p + 0.01)) for t, p in d.items()} for a, d in acts.items()}
        for s, acts in m.actions.items()})
    plan, lo, hi = compile_interval_mdp(imdp)
    llo, lhi, ulo, uhi = plan.condition(*plan.aggregate(lo, hi))

    def go():
        for _ in range(200):
            vlo, vhi = plan.init_lo.copy(), plan.init_hi.copy()
            mod.interval_iterate(plan.state_row_start, plan.row_start, plan.succ, llo, lhi, ulo, uhi,
                                 plan.node_fixed, plan.order, vlo, vhi, 1e-10, 10**6)
    return go


def inverse_beta_case(mod):
    qs = np.linspace(0.001, 0.999, 400)

    def go():
        for n in (50, 500, 5000):
            for q in qs:
                mod.betaincinv(float(q), float(n // 3 + 1), float(n - n // 3))
    return go


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    cy = kernels.compiled_backend()
    if cy is None:
        raise SystemExit("compiled kernels are not built; install with pip install -e . --no-build-isolation")
    cases = [
        (f"simulate_paths ({args.paths} paths)", lambda mod: simulate_case(mod, args.paths)),
        ("interval_iterate (200 solves)", iterate_case),
        ("betaincinv (1200 inversions)", inverse_beta_case),
    ]
    print(f"{'kernel':34s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}")
    for label, make in cases:
        tp = best_of(make(py), args.repeat)
        tc = best_of(make(cy), args.repeat)
        print(f"{label:34s} {tp:11.4f} {tc:11.4f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
