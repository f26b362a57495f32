"""Confidence intervals for a single Bernoulli parameter.

All constructors take ``(n, k, delta)``: ``n`` trials, ``k`` successes and a
failure budget ``delta``. With ``allow_empty=True`` an ``n == 0`` call returns
the trivial interval [0, 1] instead of raising.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from smcmdp.special import inverse_regularized_beta, normal_quantile


class CiMethod(str, enum.Enum):
    HOEFFDING = "hoeffding"
    CLOPPER_PEARSON = "cp"
    WILSON_CC = "wilson-cc"
    SCENARIO = "scenario"
    BENNETT = "bennett"

    @property
    def sound(self) -> bool:
        """Whether the method is recommended as a PAC estimator."""
        return self in (CiMethod.HOEFFDING, CiMethod.CLOPPER_PEARSON)

    @property
    def note(self) -> str:
        return {
            CiMethod.HOEFFDING: "sound",
            CiMethod.CLOPPER_PEARSON: "sound",
            CiMethod.WILSON_CC: "demonstration only: coverage can drop below 1 - delta",
            CiMethod.SCENARIO: "dominated by Clopper-Pearson",
            CiMethod.BENNETT: "comparison only: never narrower than Hoeffding",
        }[self]

    @classmethod
    def parse(cls, text: str | CiMethod) -> CiMethod:
        if isinstance(text, CiMethod):
            return text
        aliases = {"clopper-pearson": "cp", "wilson": "wilson-cc"}
        return cls(aliases.get(text.lower(), text.lower()))


@dataclass(frozen=True)
class SampleCounts:
    n: int
    k: int

    def __post_init__(self) -> None:
        if self.n < 0 or self.k < 0 or self.k > self.n:
            raise ValueError(f"invalid counts n={self.n}, k={self.k}")

    @property
    def phat(self) -> float:
        if self.n == 0:
            raise ValueError("empirical rate undefined for n = 0")
        return self.k / self.n


@dataclass(frozen=True)
class Ci:
    lo: float
    hi: float
    method: CiMethod
    delta: float

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, p: float) -> bool:
        return self.lo <= p <= self.hi


def _check(n: int, k: int, delta: float, allow_empty: bool) -> bool:
    """Validate arguments; True means the trivial interval applies."""
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if n < 0 or k < 0 or k > n:
        raise ValueError(f"invalid counts n={n}, k={k}")
    if n == 0:
        if allow_empty:
            return True
        raise ValueError("no samples (n = 0); pass allow_empty=True for the trivial interval")
    return False


def hoeffding_halfwidth(n: int, delta: float) -> float:
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def hoeffding_ci(n: int, k: int, delta: float, *, allow_empty: bool = False) -> Ci:
    if _check(n, k, delta, allow_empty):
        return Ci(0.0, 1.0, CiMethod.HOEFFDING, delta)
    p = k / n
    c = hoeffding_halfwidth(n, delta)
    return Ci(max(0.0, p - c), min(1.0, p + c), CiMethod.HOEFFDING, delta)


def clopper_pearson_ci(n: int, k: int, delta: float, *, allow_empty: bool = False) -> Ci:
    """Exact interval: lower solves P[Bin(n,p) >= k] = delta/2, upper P[Bin(n,p) <= k] = delta/2."""
    if _check(n, k, delta, allow_empty):
        return Ci(0.0, 1.0, CiMethod.CLOPPER_PEARSON, delta)
    half = 0.5 * delta
    lo = 0.0 if k == 0 else inverse_regularized_beta(half, k, n - k + 1)
    # upper bound through the complementary tail keeps both ends equally accurate
    hi = 1.0 if k == n else 1.0 - inverse_regularized_beta(half, n - k, k + 1)
    return Ci(lo, hi, CiMethod.CLOPPER_PEARSON, delta)


def wilson_cc_ci(n: int, k: int, delta: float, *, allow_empty: bool = False) -> Ci:
    """Wilson score interval with continuity correction (not sound for SMC)."""
    if _check(n, k, delta, allow_empty):
        return Ci(0.0, 1.0, CiMethod.WILSON_CC, delta)
    z = -normal_quantile(0.5 * delta)
    z2 = z * z
    p = k / n
    denom = 2.0 * (n + z2)
    spread = z2 - 1.0 / n + 4.0 * n * p * (1.0 - p)
    if k == 0:
        lo = 0.0
    else:
        lo = (2.0 * n * p + z2 - 1.0 - z * math.sqrt(max(0.0, spread + (4.0 * p - 2.0)))) / denom
    if k == n:
        hi = 1.0
    else:
        hi = (2.0 * n * p + z2 + 1.0 + z * math.sqrt(max(0.0, spread - (4.0 * p - 2.0)))) / denom
    return Ci(max(0.0, lo), min(1.0, hi), CiMethod.WILSON_CC, delta)


def scenario_ci(n: int, k: int, delta: float, *, allow_empty: bool = False) -> Ci:
    """The scenario-approach interval, which coincides with Clopper-Pearson at budget delta/n."""
    if _check(n, k, delta, allow_empty):
        return Ci(0.0, 1.0, CiMethod.SCENARIO, delta)
    cp = clopper_pearson_ci(n, k, delta / n)
    return Ci(cp.lo, cp.hi, CiMethod.SCENARIO, delta)


def bennett_ci(n: int, k: int, delta: float, *, allow_empty: bool = False) -> Ci:
    if _check(n, k, delta, allow_empty):
        return Ci(0.0, 1.0, CiMethod.BENNETT, delta)
    p = k / n
    c = bennett_trivial_variance_halfwidth(n, delta)
    return Ci(max(0.0, p - c), min(1.0, p + c), CiMethod.BENNETT, delta)


_DISPATCH = {
    CiMethod.HOEFFDING: hoeffding_ci,
    CiMethod.CLOPPER_PEARSON: clopper_pearson_ci,
    CiMethod.WILSON_CC: wilson_cc_ci,
    CiMethod.SCENARIO: scenario_ci,
    CiMethod.BENNETT: bennett_ci,
}


def confidence_interval(method: CiMethod | str, n: int, k: int, delta: float, *, allow_empty: bool = False) -> Ci:
    return _DISPATCH[CiMethod.parse(method)](n, k, delta, allow_empty=allow_empty)


def bennett_trivial_variance_halfwidth(n: int, delta: float) -> float:
    """Smallest x with 2 exp(-(n/4) h(4x)) <= delta, h(u) = (1+u) ln(1+u) - u.

    This is Bennett's inequality with the variance bounded by n/4.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    need = math.log(2.0 / delta)

    def enough(x: float) -> bool:
        u = 4.0 * x
        return 0.25 * n * ((1.0 + u) * math.log1p(u) - u) >= need

    lo, hi = 0.0, 1.0
    while not enough(hi):
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if enough(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi


def l1_ball_radius(k_successors: int, n: int, delta: float) -> float:
    """L1 radius around the empirical distribution of a k-successor distribution."""
    if k_successors < 2:
        raise ValueError("need at least two successors")
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(2.0 * (math.log(2.0**k_successors - 2.0) - math.log(delta)) / n)


def wilson_limit_ratio(delta: float) -> float:
    """Limit of Hoeffding/Wilson sample sizes at phat = 1/2 as epsilon -> 0."""
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    # erfinv(1 - delta) = z_{1 - delta/2} / sqrt(2), taken from the lower tail for accuracy
    e = -normal_quantile(0.5 * delta) / math.sqrt(2.0)
    return (math.log(2.0) - math.log(delta)) / (e * e)
