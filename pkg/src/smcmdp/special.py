"""Special functions: incomplete beta, normal quantile, binomial pmf/cdf."""

from __future__ import annotations

import math

import numpy as np

from smcmdp import kernels


def regularized_incomplete_beta(x: float, a: float, b: float) -> float:
    """I_x(a, b)."""
    return kernels.betainc(float(x), float(a), float(b))


def inverse_regularized_beta(q: float, a: float, b: float) -> float:
    """The x in [0, 1] with I_x(a, b) = q."""
    return kernels.betaincinv(float(q), float(a), float(b))


def normal_quantile(p: float) -> float:
    return kernels.ndtri(float(p))


def erfinv(y: float) -> float:
    """Inverse error function on (-1, 1), via the normal quantile."""
    if not (-1.0 < y < 1.0):
        raise ValueError(f"erfinv requires -1 < y < 1 (got {y})")
    return kernels.ndtri(0.5 * (1.0 + y)) / math.sqrt(2.0)


def log_choose(n: int, k: np.ndarray) -> np.ndarray:
    k = np.asarray(k)
    lg = np.array([math.lgamma(float(i) + 1.0) for i in range(n + 1)])
    return lg[n] - lg[k] - lg[n - k]


def binom_logpmf(n: int, p: float) -> np.ndarray:
    """log P[Bin(n, p) = k] for k = 0..n, with the p in {0, 1} edges exact."""
    k = np.arange(n + 1)
    out = np.full(n + 1, -np.inf)
    if p <= 0.0:
        out[0] = 0.0
        return out
    if p >= 1.0:
        out[n] = 0.0
        return out
    return log_choose(n, k) + k * math.log(p) + (n - k) * math.log1p(-p)


def binom_cdf(k: int, n: int, p: float) -> float:
    """P[Bin(n, p) <= k] by summing the pmf in log space."""
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    lp = binom_logpmf(n, p)[: k + 1]
    m = lp.max()
    if not np.isfinite(m):
        return 0.0
    return float(min(1.0, math.exp(m) * np.exp(lp - m).sum()))
