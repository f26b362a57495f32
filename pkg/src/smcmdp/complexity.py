"""Sample-size searches, exact coverage and the Hoeffding/CP ratio tables."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from smcmdp.intervals import CiMethod, confidence_interval
from smcmdp.special import log_choose

SEARCH_CAP = 1 << 40


def width(method: CiMethod | str, n: int, k: int, delta: float) -> float:
    ci = confidence_interval(method, n, k, delta)
    return ci.hi - ci.lo


def smallest_n(fits: Callable[[int], bool]) -> int:
    """Smallest n >= 1 with fits(n), assuming fits is monotone in n."""
    if fits(1):
        return 1
    lo, hi = 1, 2
    while not fits(hi):
        lo, hi = hi, hi * 2
        if hi > SEARCH_CAP:
            raise ArithmeticError("sample-size search exceeded its cap")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fits(mid):
            hi = mid
        else:
            lo = mid
    return hi


@lru_cache(maxsize=4096)
def worst_case_n(method: CiMethod | str, delta: float, epsilon: float) -> int:
    """Smallest n whose interval at k = floor(n/2) has width <= epsilon."""
    method = CiMethod.parse(method)
    if epsilon >= 1.0:
        return 1
    return smallest_n(lambda n: width(method, n, n // 2, delta) <= epsilon)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@lru_cache(maxsize=4096)
def required_n_at_phat(method: CiMethod | str, delta: float, epsilon: float, phat: float) -> int:
    """Smallest n whose interval at k = round(phat * n) has width <= epsilon."""
    method = CiMethod.parse(method)
    if not (0.0 <= phat <= 1.0):
        raise ValueError(f"phat must lie in [0, 1], got {phat}")
    if epsilon >= 1.0:
        return 1
    return smallest_n(lambda n: width(method, n, min(n, _round_half_up(phat * n)), delta) <= epsilon)


def interval_table(method: CiMethod | str, n: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds for every k = 0..n."""
    cis = [confidence_interval(method, n, k, delta) for k in range(n + 1)]
    return np.array([c.lo for c in cis]), np.array([c.hi for c in cis])


def coverage_curve(method: CiMethod | str, n: int, delta: float, ps: Sequence[float]) -> np.ndarray:
    """Exact coverage probability at every p in ``ps``."""
    if n > 10_000:
        raise ValueError("exact enumeration is limited to n <= 10^4")
    lo, hi = interval_table(method, n, delta)
    k = np.arange(n + 1)
    lc = log_choose(n, k)
    out = np.empty(len(ps))
    for i, p in enumerate(ps):
        inside = (lo <= p) & (p <= hi)
        if p <= 0.0:
            out[i] = 1.0 if inside[0] else 0.0
        elif p >= 1.0:
            out[i] = 1.0 if inside[n] else 0.0
        else:
            lp = lc + k * math.log(p) + (n - k) * math.log1p(-p)
            out[i] = min(1.0, float(np.exp(lp[inside]).sum()))
    return out


def exact_coverage(method: CiMethod | str, n: int, delta: float, p: float) -> float:
    return float(coverage_curve(method, n, delta, [p])[0])


def coverage_infimum(method: CiMethod | str, n: int, delta: float) -> tuple[float, float]:
    """Smallest coverage over all p in [0, 1], and a p attaining it (up to one ulp).

    Coverage is piecewise smooth and drops only where p leaves some interval,
    so its infimum is approached just outside an interval endpoint. Those
    points are checked together with the endpoints themselves; a regular grid
    can miss dips narrower than its spacing.
    """
    lo, hi = interval_table(method, n, delta)
    ends = np.concatenate([lo, hi])
    cand = np.concatenate([ends, np.nextafter(lo, -1.0), np.nextafter(hi, 2.0), [0.0, 1.0]])
    cand = np.unique(np.clip(cand, 0.0, 1.0))
    cov = coverage_curve(method, n, delta, cand)
    i = int(np.argmin(cov))
    return float(cov[i]), float(cand[i])


@dataclass(frozen=True)
class RatioCell:
    delta: float
    epsilon: float
    n_hoeffding: int
    n_cp: int

    @property
    def ratio(self) -> float:
        return self.n_hoeffding / self.n_cp


def ratio_grid(deltas: Iterable[float], epsilons: Iterable[float]) -> list[RatioCell]:
    eps = list(epsilons)
    cells = []
    for d in deltas:
        for e in eps:
            cells.append(RatioCell(d, e, worst_case_n(CiMethod.HOEFFDING, d, e), worst_case_n(CiMethod.CLOPPER_PEARSON, d, e)))
    return cells


def fmt(x: float) -> str:
    return f"{x:.12g}"


def write_ratio_grid(path, cells: Sequence[RatioCell]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "epsilon", "n_hoeffding", "n_cp", "ratio"])
        for c in cells:
            w.writerow([fmt(c.delta), fmt(c.epsilon), c.n_hoeffding, c.n_cp, fmt(c.ratio)])
