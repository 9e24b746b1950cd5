"""Compiled inner loops.

Everything here works on plain floats/arrays so the public modules can stay
thin wrappers. All loops evaluate the map through :func:`step` so the
branch convention (x = 1/2 belongs to the right branch) lives in one place.
"""

import numpy as np
from numba import njit

HALF = 0.5


@njit(cache=True)
def step(x, alpha, k):
    # k = 2**alpha, precomputed by callers
    if x < HALF:
        return x * (1.0 + k * x**alpha)
    return 2.0 * x - 1.0


@njit(cache=True)
def left_inverse(y, alpha):
    """Unique x in [0, 1/2] with x(1 + 2^a x^a) = y."""
    if y <= 0.0:
        return 0.0
    if y >= 1.0:
        return 0.5
    k = 2.0**alpha
    # bisection seed: the root lies in [y / 2, min(y, 1/2)] since f(x) <= 2x
    lo = 0.5 * y
    hi = min(y, 0.5)
    for _ in range(12):
        mid = 0.5 * (lo + hi)
        if mid * (1.0 + k * mid**alpha) < y:
            lo = mid
        else:
            hi = mid
    x = hi
    for _ in range(60):
        fx = x * (1.0 + k * x**alpha) - y
        dfx = 1.0 + k * (1.0 + alpha) * x**alpha
        dx = fx / dfx
        x_new = x - dx
        if x_new < lo:
            x_new = lo
        elif x_new > hi:
            x_new = hi
        if abs(x_new - x) <= 1e-16 * x or x_new == x:
            x = x_new
            break
        x = x_new
    return x


@njit(cache=True)
def left_inverse_array(ys, alpha):
    out = np.empty(ys.shape[0])
    for i in range(ys.shape[0]):
        out[i] = left_inverse(ys[i], alpha)
    return out


@njit(cache=True)
def evaluate_array(xs, alpha):
    k = 2.0**alpha
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = step(xs[i], alpha, k)
    return out


@njit(cache=True)
def orbit(x, alpha, n):
    k = 2.0**alpha
    out = np.empty(n)
    for i in range(n):
        out[i] = x
        x = step(x, alpha, k)
    return out


@njit(cache=True)
def iterate(x, alpha, n):
    """Return (f^n(x), hit_zero)."""
    k = 2.0**alpha
    for _ in range(n):
        x = step(x, alpha, k)
        if x == 0.0:
            return x, True
    return x, False


@njit(cache=True)
def burn_in_batch(x0s, alpha, n):
    out = np.empty(x0s.shape[0])
    bad = np.zeros(x0s.shape[0], dtype=np.bool_)
    for r in range(x0s.shape[0]):
        out[r], bad[r] = iterate(x0s[r], alpha, n)
    return out, bad


@njit(cache=True)
def ball_exceedances(x, alpha, zeta, eps, length):
    """Indices j < length with |f^j(x) - zeta| < eps, plus f^length(x)."""
    k = 2.0**alpha
    cap = 64
    idx = np.empty(cap, dtype=np.int64)
    m = 0
    for j in range(length):
        if abs(x - zeta) < eps:
            if m == cap:
                cap *= 2
                tmp = np.empty(cap, dtype=np.int64)
                tmp[:m] = idx[:m]
                idx = tmp
            idx[m] = j
            m += 1
        x = step(x, alpha, k)
    return idx[:m].copy(), x


@njit(cache=True)
def ball_exceedances_extended(x, alpha, zeta, eps, length, n_events, max_steps):
    """Like ball_exceedances but keeps going past `length` until at least
    `n_events` exceedances were seen or `max_steps` is reached."""
    k = 2.0**alpha
    cap = 64
    idx = np.empty(cap, dtype=np.int64)
    m = 0
    j = 0
    while j < max_steps and (j < length or m < n_events):
        if abs(x - zeta) < eps:
            if m == cap:
                cap *= 2
                tmp = np.empty(cap, dtype=np.int64)
                tmp[:m] = idx[:m]
                idx = tmp
            idx[m] = j
            m += 1
        x = step(x, alpha, k)
        j += 1
    return idx[:m].copy(), j


@njit(cache=True)
def first_exceedance(x, alpha, zeta, eps, length):
    """First j < length with |f^j(x) - zeta| < eps, or -1."""
    k = 2.0**alpha
    for j in range(length):
        if abs(x - zeta) < eps:
            return j
        x = step(x, alpha, k)
    return -1


@njit(cache=True)
def first_return(x, alpha, lo, hi, cap):
    """Smallest r >= 1 with f^r(x) in [lo, hi); r = -1 if cap exceeded
    or the orbit lands on the fixed point 0 outside the target."""
    k = 2.0**alpha
    for r in range(1, cap + 1):
        x = step(x, alpha, k)
        if lo <= x < hi:
            return x, r
        if x == 0.0:
            return x, -1
    return x, -1


@njit(cache=True)
def visit_times(x, alpha, lo, hi, length):
    """Indices j < length with f^j(x) in [lo, hi), plus f^length(x)."""
    k = 2.0**alpha
    cap = 1024
    idx = np.empty(cap, dtype=np.int64)
    m = 0
    for j in range(length):
        if lo <= x < hi:
            if m == cap:
                cap *= 2
                tmp = np.empty(cap, dtype=np.int64)
                tmp[:m] = idx[:m]
                idx = tmp
            idx[m] = j
            m += 1
        x = step(x, alpha, k)
    return idx[:m].copy(), x


@njit(cache=True)
def multi_visit_counts(x, alpha, los, his, length, max_lag):
    """For each target t=[los[t], his[t]): number of visits, and the number
    of visit pairs (i, i+j) with 1 <= j <= max_lag[t] both in the target,
    and the shortest gap between consecutive visits (-1 when < 2 visits).

    Also returns the count of consecutive-step pairs (lag exactly 1)."""
    k = 2.0**alpha
    nt = los.shape[0]
    L = 0
    for t in range(nt):
        if max_lag[t] > L:
            L = max_lag[t]
    # ring buffer of recent visit times per target
    ring = np.full((nt, L + 1), -1, dtype=np.int64)
    head = np.zeros(nt, dtype=np.int64)
    fill = np.zeros(nt, dtype=np.int64)
    visits = np.zeros(nt, dtype=np.int64)
    pairs = np.zeros(nt, dtype=np.int64)
    lag1 = np.zeros(nt, dtype=np.int64)
    last = np.full(nt, -1, dtype=np.int64)
    mingap = np.full(nt, -1, dtype=np.int64)
    for j in range(length):
        for t in range(nt):
            if los[t] <= x < his[t]:
                visits[t] += 1
                if last[t] >= 0:
                    g = j - last[t]
                    if mingap[t] < 0 or g < mingap[t]:
                        mingap[t] = g
                    if g == 1:
                        lag1[t] += 1
                last[t] = j
                # count earlier visits within max_lag
                cnt = 0
                size = fill[t]
                for s in range(size):
                    pos = (head[t] - 1 - s) % (L + 1)
                    if j - ring[t, pos] <= max_lag[t]:
                        cnt += 1
                    else:
                        break
                pairs[t] += cnt
                ring[t, head[t]] = j
                head[t] = (head[t] + 1) % (L + 1)
                if fill[t] < L + 1:
                    fill[t] += 1
        x = step(x, alpha, k)
    return visits, pairs, lag1, mingap, x


@njit(cache=True)
def hitting_times_from_orbit(x, alpha, lo, hi, n_samples, spacing, conditioned, cap):
    """Hitting/return times to [lo, hi) along one orbit starting at x.

    Unconditioned: starts at times 0, spacing, 2*spacing, ...
    Conditioned: starts at consecutive visits to the target.
    Returns (r, n_capped). Entries with r = -1 were capped.
    """
    k = 2.0**alpha
    r = np.full(n_samples, -1, dtype=np.int64)
    n_capped = 0
    if conditioned:
        # move to the first visit
        steps = 0
        while not (lo <= x < hi):
            x = step(x, alpha, k)
            steps += 1
            if steps > cap:
                return r, n_samples
        for s in range(n_samples):
            t = 0
            while True:
                x = step(x, alpha, k)
                t += 1
                if lo <= x < hi:
                    r[s] = t
                    break
                if t >= cap:
                    n_capped += 1
                    break
            if r[s] < 0:
                # remaining samples can't be defined from this orbit
                n_capped += n_samples - s - 1
                break
        return r, n_capped
    # unconditioned
    s = 0          # next start to assign a start time
    pending = 0    # first start without a resolved hit
    j = 0
    while pending < n_samples:
        if s < n_samples and j == s * spacing:
            s += 1
        x = step(x, alpha, k)
        j += 1
        if lo <= x < hi:
            for p in range(pending, s):
                r[p] = j - p * spacing
            pending = s
        elif pending < s and j - pending * spacing >= cap:
            r[pending] = -1
            n_capped += 1
            pending += 1
    return r, n_capped


@njit(cache=True)
def induced_run(y, alpha, ylo, yhi, zeta, eps, n_visits, record_returns):
    """Drive the first-return map on Y = [ylo, yhi) from y in Y.

    Returns induced indices k < n_visits with |y_k - zeta| < eps, the
    original-time index of each such exceedance, the final point, and
    (optionally) the return time of every induced step.
    """
    k = 2.0**alpha
    cap = 64
    kidx = np.empty(cap, dtype=np.int64)
    oidx = np.empty(cap, dtype=np.int64)
    rets = np.empty(n_visits if record_returns else 0, dtype=np.int64)
    m = 0
    t = 0
    for kk in range(n_visits):
        if abs(y - zeta) < eps:
            if m == cap:
                cap *= 2
                t1 = np.empty(cap, dtype=np.int64)
                t2 = np.empty(cap, dtype=np.int64)
                t1[:m] = kidx[:m]
                t2[:m] = oidx[:m]
                kidx = t1
                oidx = t2
            kidx[m] = kk
            oidx[m] = t
            m += 1
        r = 0
        while True:
            y = step(y, alpha, k)
            r += 1
            if ylo <= y < yhi:
                break
            if r > 100_000_000:
                break
        t += r
        if record_returns:
            rets[kk] = r
    return kidx[:m].copy(), oidx[:m].copy(), y, rets


@njit(cache=True)
def lagged_cross_moments(x, alpha, length, lags, n_batches):
    """Batch sums for correlations of phi(x) = x against psi = 1_[0, 1/2).

    For batch b and lag l, accumulates sum phi(x_i) psi(x_{i+l}), and per
    batch sums of phi and psi, over i in the batch (i + l stays inside the
    overall orbit).
    """
    k = 2.0**alpha
    nl = lags.shape[0]
    L = 0
    for l in range(nl):
        if lags[l] > L:
            L = lags[l]
    ring = np.empty(L + 1)
    cross = np.zeros((n_batches, nl))
    sphi = np.zeros(n_batches)
    spsi = np.zeros(n_batches)
    npairs = np.zeros((n_batches, nl))
    bl = length // n_batches
    for i in range(length + L):
        ring[i % (L + 1)] = x
        # pair phi at time i - l with psi at time i
        psi = 1.0 if x < HALF else 0.0
        for l in range(nl):
            src = i - lags[l]
            if src < 0:
                continue
            b = src // bl
            if b < n_batches:
                cross[b, l] += ring[src % (L + 1)] * psi
                npairs[b, l] += 1.0
        if i < length:
            b = i // bl
            if b < n_batches:
                sphi[b] += x
                spsi[b] += 1.0 if x < HALF else 0.0
        x = step(x, alpha, k)
    return cross, npairs, sphi, spsi, bl


@njit(cache=True)
def orbit_histogram(x, alpha, n_per_batch, edges, n_batches):
    """Visit counts per cell of `edges`, one row per consecutive batch.

    Returns (counts, x_final, hit_zero); stops early on an exact hit of 0.
    """
    k = 2.0**alpha
    n_cells = edges.shape[0] - 1
    counts = np.zeros((n_batches, n_cells), dtype=np.int64)
    for b in range(n_batches):
        for _ in range(n_per_batch):
            j = np.searchsorted(edges, x, side="right") - 1
            if j >= n_cells:
                j = n_cells - 1
            counts[b, j] += 1
            x = step(x, alpha, k)
            if x == 0.0:
                return counts, x, True
    return counts, x, False
