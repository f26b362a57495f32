# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels.py``.

Same signatures, same arithmetic order, so results are bit-identical.
"""

from libc.math cimport exp, log, log1p, sqrt, fabs, isfinite, M_PI
from math import lgamma as py_lgamma, erfc as py_erfc
from libc.stdint cimport uint64_t, int64_t
import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double LOG_SQRT_2PI = 0.9189385332046727
cdef double MACHEP = 2.220446049250313e-16
cdef double TINY = 1e-300

cdef double[7] STIRLING
STIRLING[:] = [1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0,
               1.0 / 1188.0, -691.0 / 360360.0, 1.0 / 156.0]


# ----------------------------------------------------------------- RNG

cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _stream_key(uint64_t seed, uint64_t stream) nogil:
    return _mix64(_mix64(seed) ^ (stream * GOLDEN))


cdef inline double _uniform(uint64_t key, uint64_t counter) nogil:
    return (_mix64(key + GOLDEN * (counter + 1)) >> 11) * TWO_M53


def mix64(z):
    return int(_mix64(<uint64_t>(int(z) & 0xFFFFFFFFFFFFFFFF)))


def stream_key(seed, stream):
    return int(_stream_key(<uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF),
                           <uint64_t>(int(stream) & 0xFFFFFFFFFFFFFFFF)))


def draw_u64(key, counter):
    return int(_mix64(<uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF) + GOLDEN * (<uint64_t>counter + 1)))


def draw_uniform(key, counter):
    return _uniform(<uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF), <uint64_t>counter)


# ----------------------------------------------------- incomplete beta

cdef double _stirling_corr(double z) nogil:
    cdef double zi = 1.0 / z
    cdef double z2 = zi * zi
    cdef double acc = 0.0
    cdef int i
    for i in range(6, -1, -1):
        acc = acc * z2 + STIRLING[i]
    return acc * zi


cdef double _log_beta_power(double x, double a, double b):
    cdef double s = a + b
    cdef double ua, ub, lbeta
    if a >= 10.0 and b >= 10.0:
        ua = (x * b - (1.0 - x) * a) / a
        ub = ((1.0 - x) * a - x * b) / b
        return (a * log1p(ua) + b * log1p(ub) + 0.5 * log(a * b / s) - LOG_SQRT_2PI
                - (_stirling_corr(a) + _stirling_corr(b) - _stirling_corr(s)))
    if a >= 10.0:
        ua = (x * b - (1.0 - x) * a) / a
        return (a * log1p(ua) + 0.5 * log(a / s) + b * log((1.0 - x) * s)
                - b - <double>py_lgamma(b) - _stirling_corr(a) + _stirling_corr(s))
    if b >= 10.0:
        ub = ((1.0 - x) * a - x * b) / b
        return (b * log1p(ub) + 0.5 * log(b / s) + a * log(x * s)
                - a - <double>py_lgamma(a) - _stirling_corr(b) + _stirling_corr(s))
    lbeta = <double>py_lgamma(a) + <double>py_lgamma(b) - <double>py_lgamma(s)
    return a * log(x) + b * log1p(-x) - lbeta


def log_beta_power(double x, double a, double b):
    return _log_beta_power(x, a, b)


cdef double _betacf(double x, double a, double b) except? -1.0:
    cdef double qab = a + b
    cdef double qap = a + 1.0
    cdef double qam = a - 1.0
    cdef double c = 1.0
    cdef double d = 1.0 - qab * x / qap
    cdef double h, aa, delta
    cdef long m, m2, max_iter
    if fabs(d) < TINY:
        d = TINY
    d = 1.0 / d
    h = d
    max_iter = 1000 + <long>(20.0 * sqrt(a if a > b else b))
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < TINY:
            d = TINY
        c = 1.0 + aa / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) <= MACHEP:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})")


cdef double _betainc(double x, double a, double b) except? -1.0:
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x < (a + 1.0) / (a + b + 2.0):
        return exp(_log_beta_power(x, a, b)) * _betacf(x, a, b) / a
    return 1.0 - exp(_log_beta_power(1.0 - x, b, a)) * _betacf(1.0 - x, b, a) / b


def betainc(double x, double a, double b):
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"betainc requires a, b > 0 (got a={a}, b={b})")
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"betainc requires 0 <= x <= 1 (got {x})")
    return _betainc(x, a, b)


cdef double _ndtri_guess(double p):
    cdef double q, r
    if p < 0.02425:
        q = sqrt(-2.0 * log(p))
        return (((((-7.784894002430293e-03 * q + -3.223964580411365e-01) * q + -2.400758277161838e00) * q
                  + -2.549732539343734e00) * q + 4.374664141464968e00) * q + 2.938163982698783e00) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q + 2.445134137142996e00) * q
             + 3.754408661907416e00) * q + 1.0)
    if p > 1.0 - 0.02425:
        q = sqrt(-2.0 * log1p(-p))
        return -(((((-7.784894002430293e-03 * q + -3.223964580411365e-01) * q + -2.400758277161838e00) * q
                   + -2.549732539343734e00) * q + 4.374664141464968e00) * q + 2.938163982698783e00) / (
            (((7.784695709041462e-03 * q + 3.224671290700398e-01) * q + 2.445134137142996e00) * q
             + 3.754408661907416e00) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((-3.969683028665376e01 * r + 2.209460984245205e02) * r + -2.759285104469687e02) * r
              + 1.383577518672690e02) * r + -3.066479806614716e01) * r + 2.506628277459239e00) * q / (
        ((((-5.447609879822406e01 * r + 1.615858368580409e02) * r + -1.556989798598866e02) * r
          + 6.680131188771972e01) * r + -1.328068155288572e01) * r + 1.0)


cdef double _ndtri(double p):
    if p > 0.5:
        # 1 - p is exact here, and the lower tail keeps erfc away from cancellation
        return -_ndtri(1.0 - p)
    cdef double x = _ndtri_guess(p)
    # CPython's erfc/lgamma differ from libm in the last bits; share them for bit-identity
    cdef double e = 0.5 * <double>py_erfc(-x / sqrt(2.0)) - p
    cdef double u = e * sqrt(2.0 * M_PI) * exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def ndtri(double p):
    if not (0.0 < p < 1.0):
        raise ValueError(f"ndtri requires 0 < p < 1 (got {p})")
    return _ndtri(p)


def betaincinv(double q, double a, double b):
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"betaincinv requires a, b > 0 (got a={a}, b={b})")
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"betaincinv requires 0 <= q <= 1 (got {q})")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    cdef double lo = 0.0, hi = 1.0
    cdef double s = a + b
    cdef double z = _ndtri(q)
    cdef double x = a / s + z * sqrt(a * b / (s * s * (s + 1.0)))
    cdef double f, dens, x_new
    cdef int it
    if not (0.0 < x < 1.0):
        x = a / s
    for it in range(200):
        f = _betainc(x, a, b) - q
        if f == 0.0:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        if hi - lo <= 4.0 * MACHEP * x:
            return x
        dens = exp(_log_beta_power(x, a, b)) / (x * (1.0 - x))
        x_new = x - f / dens if dens > 0.0 else -1.0
        if not (lo < x_new < hi) or not isfinite(x_new):
            x_new = 0.5 * (lo + hi)
        # the forward function is only accurate to a few ulps, so a relative
        # step of 1e-13 means Newton has converged to within that noise
        if fabs(x_new - x) <= 1e-13 * x:
            return x_new
        x = x_new
    raise ArithmeticError(f"betaincinv did not converge (q={q}, a={a}, b={b})")


# ------------------------------------------------------------ simulation

cdef inline int64_t _find_col(const int64_t[:] slot_succ_start, const int64_t[:] slot_succ,
                              int64_t slot, int64_t tstate) nogil:
    cdef int64_t lo = slot_succ_start[slot]
    cdef int64_t hi = slot_succ_start[slot + 1]
    cdef int64_t mid, v
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
    const int64_t[:] row_start, const int64_t[:] trans_start, const int64_t[:] succ, const double[:] cum,
    const unsigned char[:] stop, const unsigned char[:] absorbed, const int64_t[:] plain_slot,
    const int64_t[:] rep, const int64_t[:] slot_succ_start, const int64_t[:] slot_succ,
    int64_t[:] n_counts, int64_t[:] k_counts,
    int64_t initial, seed, int64_t first_path, int64_t n_paths, int64_t step_cap,
    list complex_out, unsigned char[:] status_out,
):
    cdef Py_ssize_t n_states = row_start.shape[0] - 1
    cdef int64_t[:] mem = np.full(n_states, -1, dtype=np.int64)
    cdef int64_t[:] touched = np.empty(n_states + 1, dtype=np.int64)
    cdef int64_t n_touched = 0
    cdef uint64_t useed = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t key, ctr
    cdef int64_t i, path, s, t, steps, na, row, seg_row, j, r, slot, col, q
    cdef int64_t total_steps = 0
    cdef unsigned char status
    cdef double u
    for i in range(n_paths):
        path = first_path + i
        key = _stream_key(useed, <uint64_t>path)
        ctr = 0
        s = initial
        steps = 0
        status = 0
        if stop[s]:
            status_out[i] = 0
            continue
        while True:
            na = row_start[s + 1] - row_start[s]
            u = _uniform(key, ctr)
            ctr += 1
            row = row_start[s] + <int64_t>(u * na)
            seg_row = row
            u = _uniform(key, ctr)
            ctr += 1
            j = trans_start[row]
            while cum[j] <= u:
                j += 1
            t = succ[j]
            steps += 1
            while absorbed[t] and steps < step_cap:
                r = mem[t]
                if r < 0:
                    na = row_start[t + 1] - row_start[t]
                    u = _uniform(key, ctr)
                    ctr += 1
                    r = row_start[t] + <int64_t>(u * na)
                    mem[t] = r
                    touched[n_touched] = t
                    n_touched += 1
                u = _uniform(key, ctr)
                ctr += 1
                j = trans_start[r]
                while cum[j] <= u:
                    j += 1
                t = succ[j]
                steps += 1
            if absorbed[t]:
                for q in range(n_touched):
                    mem[touched[q]] = -1
                n_touched = 0
                status = 1
                break
            slot = plain_slot[seg_row]
            if slot >= 0 and n_touched == 0:
                col = _find_col(slot_succ_start, slot_succ, slot, rep[t])
                if col >= 0:
                    n_counts[slot] += 1
                    k_counts[col] += 1
            elif slot != -1 or n_touched > 0:
                complex_out.append((path, seg_row, t, _choices(mem, touched, n_touched)))
            for q in range(n_touched):
                mem[touched[q]] = -1
            n_touched = 0
            if stop[t]:
                break
            if steps >= step_cap:
                status = 1
                break
            s = t
        status_out[i] = status
        total_steps += steps
    return total_steps


cdef tuple _choices(int64_t[:] mem, int64_t[:] touched, int64_t n_touched):
    states = sorted([touched[q] for q in range(n_touched)])
    return tuple([(st, mem[st]) for st in states])


# ----------------------------------------------------- interval iteration

cdef double _robust(const double[:] lo, const double[:] hi, double* vals, int64_t* order,
                    int64_t start, int64_t n, bint optimistic) nogil:
    cdef int64_t i, j, key_i
    cdef double key_v, rest, total, p, add
    for i in range(n):
        order[i] = i
    # insertion sort by (value, position); descending value when optimistic
    for i in range(1, n):
        key_i = order[i]
        key_v = vals[key_i]
        j = i - 1
        if optimistic:
            while j >= 0 and (vals[order[j]] < key_v or (vals[order[j]] == key_v and order[j] > key_i)):
                order[j + 1] = order[j]
                j -= 1
        else:
            while j >= 0 and (vals[order[j]] > key_v or (vals[order[j]] == key_v and order[j] > key_i)):
                order[j + 1] = order[j]
                j -= 1
        order[j + 1] = key_i
    rest = 1.0
    for i in range(n):
        rest -= lo[start + i]
    total = 0.0
    for i in range(n):
        j = order[i]
        p = lo[start + j]
        if rest > 0.0:
            add = hi[start + j] - lo[start + j]
            if add > rest:
                add = rest
            p += add
            rest -= add
        total += p * vals[j]
    return total


def robust_expectation(lo, hi, vals, idx, bint optimistic):
    # convenience wrapper with the pure-Python signature
    from smcmdp._pykernels import robust_expectation as _py
    return _py(lo, hi, vals, idx, optimistic)


def interval_iterate(
    const int64_t[:] state_row_start, const int64_t[:] row_start, const int64_t[:] succ,
    const double[:] lo, const double[:] hi, const double[:] ulo, const double[:] uhi,
    const unsigned char[:] fixed, const int64_t[:] order,
    double[:] vlo, double[:] vhi, double kappa, int64_t max_sweeps,
):
    cdef double thresh = 0.25 * kappa
    cdef int64_t max_width = 1
    cdef int64_t r, e, n, s, oi, sweep
    cdef double dlo, dhi, best_lo, best_hi, v_l, v_h
    for r in range(row_start.shape[0] - 1):
        if row_start[r + 1] - row_start[r] > max_width:
            max_width = row_start[r + 1] - row_start[r]
    cdef double[:] vals = np.empty(max_width, dtype=np.float64)
    cdef int64_t[:] ordbuf = np.empty(max_width, dtype=np.int64)
    for sweep in range(1, max_sweeps + 1):
        dlo = 0.0
        dhi = 0.0
        for oi in range(order.shape[0]):
            s = order[oi]
            if fixed[s]:
                continue
            best_lo = 0.0
            best_hi = 0.0
            for r in range(state_row_start[s], state_row_start[s + 1]):
                n = row_start[r + 1] - row_start[r]
                for e in range(n):
                    vals[e] = vlo[succ[row_start[r] + e]]
                v_l = _robust(lo, hi, &vals[0], &ordbuf[0], row_start[r], n, False)
                for e in range(n):
                    vals[e] = vhi[succ[row_start[r] + e]]
                v_h = _robust(ulo, uhi, &vals[0], &ordbuf[0], row_start[r], n, True)
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
                vhi[s] = vlo[s]
        if dlo < thresh and dhi < thresh:
            return sweep, True
    return max_sweeps, False
