"""Pure-Python implementations of the hot kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature and bit-identical results on the same inputs. ``smcmdp.kernels``
picks one of the two at import time.
"""

from __future__ import annotations

import math

BACKEND = "python"

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TWO_M53 = 1.0 / 9007199254740992.0  # 2**-53

LOG_SQRT_2PI = 0.9189385332046727  # 0.5 * log(2*pi)
MACHEP = 2.220446049250313e-16
TINY = 1e-300

# Bernoulli-number terms of the Stirling series for log-gamma.
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
)


# --------------------------------------------------------------------------
# counter-based RNG (SplitMix64 finaliser applied to key + GOLDEN * counter)
# --------------------------------------------------------------------------


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int) -> int:
    return mix64(mix64(seed & MASK64) ^ ((stream * GOLDEN) & MASK64))


def draw_u64(key: int, counter: int) -> int:
    return mix64((key + GOLDEN * (counter + 1)) & MASK64)


def draw_uniform(key: int, counter: int) -> float:
    return (draw_u64(key, counter) >> 11) * TWO_M53


# --------------------------------------------------------------------------
# regularised incomplete beta function
# --------------------------------------------------------------------------


def _stirling_corr(z: float) -> float:
    # lgamma(z) - ((z - 0.5) log z - z + 0.5 log 2pi), valid for z >= 10
    zi = 1.0 / z
    z2 = zi * zi
    acc = 0.0
    for c in reversed(_STIRLING):
        acc = acc * z2 + c
    return acc * zi


def log_beta_power(x: float, a: float, b: float) -> float:
    """log( x**a * (1-x)**b / B(a, b) ), avoiding lgamma cancellation for large a or b."""
    s = a + b
    if a >= 10.0 and b >= 10.0:
        ua = (x * b - (1.0 - x) * a) / a
        ub = ((1.0 - x) * a - x * b) / b
        return (
            a * math.log1p(ua)
            + b * math.log1p(ub)
            + 0.5 * math.log(a * b / s)
            - LOG_SQRT_2PI
            - (_stirling_corr(a) + _stirling_corr(b) - _stirling_corr(s))
        )
    if a >= 10.0:
        ua = (x * b - (1.0 - x) * a) / a
        return (
            a * math.log1p(ua) + 0.5 * math.log(a / s) + b * math.log((1.0 - x) * s)
            - b - math.lgamma(b) - _stirling_corr(a) + _stirling_corr(s)
        )
    if b >= 10.0:
        ub = ((1.0 - x) * a - x * b) / b
        return (
            b * math.log1p(ub) + 0.5 * math.log(b / s) + a * math.log(x * s)
            - a - math.lgamma(a) - _stirling_corr(b) + _stirling_corr(s)
        )
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(s)
    return a * math.log(x) + b * math.log1p(-x) - lbeta


def _betacf(x: float, a: float, b: float) -> float:
    # modified Lentz evaluation of the continued fraction for I_x(a, b)
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    max_iter = 1000 + int(20.0 * math.sqrt(max(a, b)))
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= MACHEP:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


def betainc(x: float, a: float, b: float) -> float:
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"betainc requires a, b > 0 (got a={a}, b={b})")
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"betainc requires 0 <= x <= 1 (got {x})")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_beta_power(x, a, b)) * _betacf(x, a, b) / a
    return 1.0 - math.exp(log_beta_power(1.0 - x, b, a)) * _betacf(1.0 - x, b, a) / b


def _ndtri_guess(p: float) -> float:
    # Acklam's rational approximation, relative error ~1e-9
    a = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
         1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
    b = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
         6.680131188771972e01, -1.328068155288572e01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
         -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
         3.754408661907416e00)
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - plow:
        q = math.sqrt(-2.0 * math.log1p(-p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
        ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def ndtri(p: float) -> float:
    """Standard normal quantile; one Halley step on erfc refines the guess."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"ndtri requires 0 < p < 1 (got {p})")
    if p > 0.5:
        # 1 - p is exact here, and the lower tail keeps erfc away from cancellation
        return -ndtri(1.0 - p)
    x = _ndtri_guess(p)
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def betaincinv(q: float, a: float, b: float) -> float:
    """x in [0, 1] with betainc(x, a, b) == q (safeguarded Newton on a bracket)."""
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"betaincinv requires a, b > 0 (got a={a}, b={b})")
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"betaincinv requires 0 <= q <= 1 (got {q})")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    s = a + b
    # normal approximation as the starting point
    z = ndtri(q)
    x = a / s + z * math.sqrt(a * b / (s * s * (s + 1.0)))
    if not (0.0 < x < 1.0):
        x = a / s
    for _ in range(200):
        f = betainc(x, a, b) - q
        if f == 0.0:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        if hi - lo <= 4.0 * MACHEP * x:
            return x
        dens = math.exp(log_beta_power(x, a, b)) / (x * (1.0 - x))
        x_new = x - f / dens if dens > 0.0 else -1.0
        if not (lo < x_new < hi) or not math.isfinite(x_new):
            x_new = 0.5 * (lo + hi)
        # the forward function is only accurate to a few ulps, so a relative
        # step of 1e-13 means Newton has converged to within that noise
        if abs(x_new - x) <= 1e-13 * x:
            return x_new
        x = x_new
    raise ArithmeticError(f"betaincinv did not converge (q={q}, a={a}, b={b})")


# --------------------------------------------------------------------------
# ground-path simulation with quotient attribution
# --------------------------------------------------------------------------


def _find_col(slot_succ_start, slot_succ, slot: int, tstate: int) -> int:
    lo = slot_succ_start[slot]
    hi = slot_succ_start[slot + 1]
    while lo < hi:
        mid = (lo + hi) >> 1
        v = slot_succ[mid]
        if v < tstate:
            lo = mid + 1
        elif v > tstate:
            hi = mid
        else:
            return mid
    return -1


def simulate_paths(
    row_start, trans_start, succ, cum,
    stop, absorbed, plain_slot, rep,
    slot_succ_start, slot_succ,
    n_counts, k_counts,
    initial: int, seed: int, first_path: int, n_paths: int, step_cap: int,
    complex_out: list, status_out,
):
    """Simulate ``n_paths`` ground paths, updating counts in place.

    Decision points are non-absorbed states; from there the walk takes one
    uniformly drawn ground action and, while it sits in absorbed states,
    follows a memoised per-traversal choice (memoryless-deterministic inside
    fragments). Each finished traversal is one observation: plain ones are
    counted here, the rest are appended to ``complex_out`` as
    ``(path, row, exit, ((state, row), ...))`` for the caller to attribute.
    ``status_out[i]`` gets 0 if path i stopped, 1 if it hit the step cap.
    Returns the number of ground steps taken.
    """
    mem = {}
    total_steps = 0
    for i in range(n_paths):
        path = first_path + i
        key = stream_key(seed, path)
        ctr = 0
        s = initial
        steps = 0
        status = 0
        if stop[s]:
            status_out[i] = 0
            continue
        while True:
            na = row_start[s + 1] - row_start[s]
            u = (mix64((key + GOLDEN * (ctr + 1)) & MASK64) >> 11) * TWO_M53
            ctr += 1
            row = row_start[s] + int(u * na)
            seg_row = row
            # one ground step
            u = (mix64((key + GOLDEN * (ctr + 1)) & MASK64) >> 11) * TWO_M53
            ctr += 1
            j = trans_start[row]
            while cum[j] <= u:
                j += 1
            t = succ[j]
            steps += 1
            while absorbed[t] and steps < step_cap:
                r = mem.get(t, -1)
                if r < 0:
                    na = row_start[t + 1] - row_start[t]
                    u = (mix64((key + GOLDEN * (ctr + 1)) & MASK64) >> 11) * TWO_M53
                    ctr += 1
                    r = row_start[t] + int(u * na)
                    mem[t] = r
                u = (mix64((key + GOLDEN * (ctr + 1)) & MASK64) >> 11) * TWO_M53
                ctr += 1
                j = trans_start[r]
                while cum[j] <= u:
                    j += 1
                t = succ[j]
                steps += 1
            if absorbed[t]:
                mem.clear()
                status = 1
                break
            slot = plain_slot[seg_row]
            if slot >= 0 and not mem:
                # exits outside the slot's support (collapsed self-loops) carry no observation
                col = _find_col(slot_succ_start, slot_succ, slot, rep[t])
                if col >= 0:
                    n_counts[slot] += 1
                    k_counts[col] += 1
            elif slot != -1 or mem:
                complex_out.append((path, seg_row, t, tuple(sorted(mem.items()))))
            mem.clear()
            if stop[t]:
                break
            if steps >= step_cap:
                status = 1
                break
            s = t
        status_out[i] = status
        total_steps += steps
    return total_steps


# --------------------------------------------------------------------------
# interval iteration on a compiled interval MDP
# --------------------------------------------------------------------------


def robust_expectation(lo, hi, vals, idx, optimistic: bool) -> float:
    """Extremal expectation over {p : lo <= p <= hi, sum p = 1}.

    ``idx`` lists entry positions; successors are saturated in order of value
    (descending if optimistic), ties broken by position in ``idx``.
    """
    order = sorted(range(len(idx)), key=lambda i: (-vals[i] if optimistic else vals[i], i))
    rest = 1.0
    for i in range(len(idx)):
        rest -= lo[idx[i]]
    total = 0.0
    for i in order:
        e = idx[i]
        p = lo[e]
        if rest > 0.0:
            add = hi[e] - lo[e]
            if add > rest:
                add = rest
            p += add
            rest -= add
        total += p * vals[i]
    return total


def interval_iterate(
    state_row_start, row_start, succ, lo, hi, ulo, uhi,
    fixed, order, vlo, vhi, kappa: float, max_sweeps: int,
):
    """Gauss-Seidel interval iteration in place; returns (sweeps, converged).

    ``lo``/``hi`` feed the lower sequence and ``ulo``/``uhi`` the upper one.
    """
    thresh = 0.25 * kappa
    for sweep in range(1, max_sweeps + 1):
        dlo = 0.0
        dhi = 0.0
        for s in order:
            if fixed[s]:
                continue
            best_lo = 0.0
            best_hi = 0.0
            for r in range(state_row_start[s], state_row_start[s + 1]):
                idx = range(row_start[r], row_start[r + 1])
                ids = list(idx)
                v_l = robust_expectation(lo, hi, [vlo[succ[e]] for e in ids], ids, False)
                v_h = robust_expectation(ulo, uhi, [vhi[succ[e]] for e in ids], ids, True)
                if v_l > best_lo:
                    best_lo = v_l
                if v_h > best_hi:
                    best_hi = v_h
            if best_lo > vlo[s]:
                if best_lo - vlo[s] > dlo:
                    dlo = best_lo - vlo[s]
                vlo[s] = best_lo
            if best_hi < vhi[s]:
                if vhi[s] - best_hi > dhi:
                    dhi = vhi[s] - best_hi
                vhi[s] = best_hi
            if vlo[s] > vhi[s]:
                # rounding only; keep the pair ordered
                vhi[s] = vlo[s]
        if dlo < thresh and dhi < thresh:
            return sweep, True
    return max_sweeps, False
