"""Compiled inner loops for long chains.

The running lower r-quantile is kept with two heaps: ``low`` holds the
``ceil(r k)`` smallest opinions as a max-heap (stored negated in a min-heap) and
``high`` holds the rest. The quantile is ``-low[0]``.

Integer state array layout: ``[k, n_low, n_high, rounds, stall, status]``.
Status codes: 0 running, 1 stalled, 2 zero conditioning mass.
"""

import numpy as np
from numba import njit

K, N_LOW, N_HIGH, ROUNDS, STALL, STATUS = range(6)
STATUS_OK, STATUS_STALL, STATUS_ZERO_MASS = 0, 1, 2

KIND_UNIFORM, KIND_EXPONENTIAL = 0, 1


def new_state(capacity):
    """Allocate heaps and state arrays for ``capacity`` admissions."""
    low = np.empty(capacity + 1)
    high = np.empty(capacity + 1)
    st = np.zeros(6, dtype=np.int64)
    fst = np.array([-np.inf])
    return low, high, st, fst


@njit(cache=True)
def _push(h, n, v):
    i = n
    h[i] = v
    while i > 0:
        p = (i - 1) >> 1
        if h[p] <= h[i]:
            break
        h[p], h[i] = h[i], h[p]
        i = p
    return n + 1


@njit(cache=True)
def _pop(h, n):
    top = h[0]
    n -= 1
    h[0] = h[n]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and h[c + 1] < h[c]:
            c += 1
        if h[i] <= h[c]:
            break
        h[i], h[c] = h[c], h[i]
        i = c
    return top, n


@njit(cache=True)
def _insert(v, low, high, st, num, den):
    nl = st[N_LOW]
    nu = st[N_HIGH]
    if nl > 0 and v <= -low[0]:
        nl = _push(low, nl, -v)
    else:
        nu = _push(high, nu, v)
    k = st[K] + 1
    target = (num * k + den - 1) // den
    while nl > target:
        top, nl = _pop(low, nl)
        nu = _push(high, nu, -top)
    while nl < target:
        top, nu = _pop(high, nu)
        nl = _push(low, nl, -top)
    st[K] = k
    st[N_LOW] = nl
    st[N_HIGH] = nu
    return -low[0]


@njit(cache=True)
def threshold_block(px, py, low, high, st, fst, xs, ms, ts, n_target, num, den, stall_limit):
    """Run the midpoint-threshold rule over a block of candidate pairs.

    Returns the number of pairs consumed; stops early on reaching ``n_target``
    admissions or ``stall_limit`` consecutive rejections.
    """
    for i in range(px.shape[0]):
        x = px[i]
        y = py[i]
        st[ROUNDS] += 1
        k = st[K]
        if k == 0 or (x + y) / 2.0 >= fst[0]:
            v = x if x <= y else y
            xs[k] = v
            ms[k] = fst[0]
            ts[k] = st[ROUNDS]
            fst[0] = _insert(v, low, high, st, num, den)
            st[STALL] = 0
            if st[K] == n_target:
                return i + 1
        else:
            st[STALL] += 1
            if st[STALL] >= stall_limit:
                st[STATUS] = STATUS_STALL
                return i + 1
    return px.shape[0]


@njit(cache=True)
def conditional_block(kind, p0, p1, u, low, high, st, fst, xs, ms, n_target, num, den):
    """Admit one member per row of ``u`` (three uniforms) without rejections.

    ``kind`` selects uniform on [p0, p0 + p1] or exponential with rate p0. The
    admitted value is min(X, Y) for (X, Y) drawn conditionally on X + Y >= 2 m_k.
    """
    for i in range(u.shape[0]):
        k = st[K]
        m = fst[0]
        u1 = u[i, 0]
        u2 = u[i, 1]
        u3 = u[i, 2]
        lo2 = u2 if u2 <= u3 else u3
        if kind == KIND_UNIFORM:
            mm = (m - p0) / p1
            if k == 0 or mm <= 0.0:
                v = p0 + p1 * lo2
            elif mm >= 1.0:
                st[STATUS] = STATUS_ZERO_MASS
                return i
            else:
                t = 1.0 - mm
                f = 1.0 - 2.0 * mm * mm if mm <= 0.5 else 2.0 * t * t
                if u1 * f < t * t:
                    v = p0 + p1 * (mm + t * lo2)
                else:
                    # partner below m has density proportional to x - (2m - 1)
                    c = 2.0 * mm - 1.0
                    w0 = -c if c < 0.0 else 0.0
                    v = p0 + p1 * (c + np.sqrt(w0 * w0 + u2 * (t * t - w0 * w0)))
        else:
            e2 = -np.log1p(-u2) / p0
            e3 = -np.log1p(-u3) / p0
            emin = e2 if e2 <= e3 else e3
            if k == 0 or m <= 0.0:
                v = emin
            else:
                s = p0 * m
                if u1 * (1.0 + 2.0 * s) < 1.0:
                    v = m + emin
                else:
                    v = m * u2
        xs[k] = v
        ms[k] = m
        fst[0] = _insert(v, low, high, st, num, den)
        if st[K] == n_target:
            return i + 1
    return u.shape[0]


@njit(cache=True)
def _first_at_or_above(locs, c):
    lo = 0
    hi = locs.shape[0]
    while lo < hi:
        mid = (lo + hi) >> 1
        if locs[mid] < c:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def atomic_conditional_block(locs, masses, suffix, u, low, high, st, fst, xs, ms, n_target, num, den):
    """Conditional engine for a finite atom list.

    ``suffix[i]`` is the mass of atoms with index >= i (``suffix[n] = 0``). Each
    row of ``u`` drives one admission: the first uniform picks X from weights
    mass_i * mu([2m - a_i, inf)), the second picks Y from mu restricted to
    [2m - X, inf), and min(X, Y) is admitted.
    """
    n = locs.shape[0]
    w = np.empty(n)
    for row in range(u.shape[0]):
        k = st[K]
        m = fst[0]
        total = 0.0
        for i in range(n):
            if k == 0:
                w[i] = masses[i]
            else:
                w[i] = masses[i] * suffix[_first_at_or_above(locs, 2.0 * m - locs[i])]
            total += w[i]
        if total <= 0.0:
            st[STATUS] = STATUS_ZERO_MASS
            return row
        target = u[row, 0] * total
        i = 0
        acc = w[0]
        while acc <= target and i < n - 1:
            i += 1
            acc += w[i]
        s = 0 if k == 0 else _first_at_or_above(locs, 2.0 * m - locs[i])
        q = (1.0 - u[row, 1]) * suffix[s]
        j = s
        while j < n - 1 and suffix[j + 1] >= q:
            j += 1
        v = locs[i] if locs[i] <= locs[j] else locs[j]
        xs[k] = v
        ms[k] = m
        fst[0] = _insert(v, low, high, st, num, den)
        if st[K] == n_target:
            return row + 1
    return u.shape[0]
