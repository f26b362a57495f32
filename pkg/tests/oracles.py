"""Independent reference implementations used by the tests.

Nothing here imports the package's numerics: binomial tails come from
mpmath or scipy, linear programs from scipy, and reachability values from
an LP formulation rather than the policy iteration used by the library.
"""

from __future__ import annotations

import random
from fractions import Fraction

import mpmath as mp
import numpy as np
from scipy.optimize import linprog
from scipy.stats import binom

# ---------------------------------------------------------------- coins


def cp_bisection(n: int, k: int, delta: float, tol: float = 1e-13) -> tuple[float, float]:
    """Clopper-Pearson bounds by bisecting the exact binomial tails."""
    half = delta / 2.0

    def bisect(f, lo=0.0, hi=1.0):
        # f increasing in p, find root
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) < 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < tol:
                break
        return 0.5 * (lo + hi)

    lo = 0.0 if k == 0 else bisect(lambda p: binom.sf(k - 1, n, p) - half)
    hi = 1.0 if k == n else bisect(lambda p: half - binom.cdf(k, n, p))
    return lo, hi


def hoeffding_mp(n: int, delta: float) -> float:
    with mp.workdps(40):
        return float(mp.sqrt(mp.log(2 / mp.mpf(delta)) / (2 * n)))


def coverage_mp(lo: list[float], hi: list[float], n: int, p: float) -> float:
    """Exact coverage of a table of intervals (index k) at parameter p, via scipy pmf."""
    k = np.arange(n + 1)
    pmf = binom.pmf(k, n, p)
    inside = (np.asarray(lo) <= p) & (p <= np.asarray(hi))
    return float(pmf[inside].sum())


# ---------------------------------------------------------------- robust step


def lp_extreme(lo, hi, values, maximize: bool) -> float:
    """max/min of sum p_i v_i subject to lo <= p <= hi, sum p = 1 (scipy linprog)."""
    c = -np.asarray(values, float) if maximize else np.asarray(values, float)
    res = linprog(c, A_eq=np.ones((1, len(lo))), b_eq=[1.0], bounds=list(zip(lo, hi)), method="highs")
    assert res.status == 0, res.message
    return float(-res.fun if maximize else res.fun)


# ---------------------------------------------------------------- MDPs


def lp_reachability(states, initial, target, actions) -> dict[str, float]:
    """Maximal reachability by the standard LP: min sum x s.t. x_s >= sum_t P(s,a,t) x_t.

    States that cannot reach the target are pinned to 0, which makes the LP
    solution unique.
    """
    target = set(target)
    # backward reachability on the support
    can = set(target)
    changed = True
    while changed:
        changed = False
        for s in states:
            if s in can:
                continue
            if any(t in can for d in actions[s].values() for t in d):
                can.add(s)
                changed = True
    idx = {s: i for i, s in enumerate(states)}
    n = len(states)
    a_ub, b_ub = [], []
    for s in states:
        if s in target or s not in can:
            continue
        for d in actions[s].values():
            row = np.zeros(n)
            row[idx[s]] -= 1.0
            for t, p in d.items():
                row[idx[t]] += p
            a_ub.append(row)
            b_ub.append(0.0)
    bounds = []
    for s in states:
        if s in target:
            bounds.append((1.0, 1.0))
        elif s not in can:
            bounds.append((0.0, 0.0))
        else:
            bounds.append((0.0, 1.0))
    res = linprog(np.ones(n), A_ub=np.array(a_ub) if a_ub else None, b_ub=b_ub or None, bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return {s: float(res.x[idx[s]]) for s in states}


def random_mdp_document(seed: int, max_states: int = 10, max_actions: int = 3) -> dict:
    """A random model with a goal and a sink; probabilities are short decimals summing to 1 exactly."""
    rng = random.Random(seed)
    n = rng.randint(3, max_states - 2)
    inner = [f"s{i}" for i in range(n)]
    states = inner + ["goal", "sink"]
    actions = {}
    for s in inner:
        acts = {}
        for a in range(rng.randint(1, max_actions)):
            k = rng.randint(1, min(4, len(states)))
            succ = rng.sample(states, k)
            # integer weights -> exact decimal probabilities in units of 1/20
            cuts = sorted(rng.sample(range(1, 20), k - 1))
            parts = [b - a for a, b in zip([0] + cuts, cuts + [20])]
            acts[f"a{a}"] = {t: float(Fraction(w, 20)) for t, w in zip(succ, parts)}
        actions[s] = acts
    actions["goal"] = {"loop": {"goal": 1.0}}
    actions["sink"] = {"loop": {"sink": 1.0}}
    return {"states": states, "initial": "s0", "target": ["goal"], "actions": actions}


def cp_bisection_table(n: int, delta: float, iters: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Clopper-Pearson bounds for all k = 0..n at once (vectorised bisection on scipy tails)."""
    half = delta / 2.0
    k = np.arange(n + 1)
    # lower: P[Bin(n, p) >= k] = half, increasing in p
    a = np.zeros(n + 1)
    b = np.ones(n + 1)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        low_side = binom.sf(k - 1, n, mid) < half
        a = np.where(low_side, mid, a)
        b = np.where(low_side, b, mid)
    lo = np.where(k == 0, 0.0, 0.5 * (a + b))
    # upper: P[Bin(n, p) <= k] = half, decreasing in p
    a = np.zeros(n + 1)
    b = np.ones(n + 1)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        above = binom.cdf(k, n, mid) > half
        a = np.where(above, mid, a)
        b = np.where(above, b, mid)
    hi = np.where(k == n, 1.0, 0.5 * (a + b))
    return lo, hi
