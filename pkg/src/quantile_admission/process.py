"""Simulation of the admission process.

Each round two candidates are drawn i.i.d.; the smaller one is admitted when at
least an r-fraction of the current members are at least as close to it as to
the larger one. Counting members at or below the candidates' midpoint shows
this is the same as comparing the midpoint with the running lower r-quantile
``m_k``, which is what the threshold and conditional engines do.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from sortedcontainers import SortedList

from . import _kernels
from .errors import ConfigError, DomainError, IntegrityError, StallError, ZeroMassError
from .measure import Exponential, Uniform, conditional_pair_sampler
from .streams import as_fraction, make_rng, rank

ENGINES = ("voting", "threshold", "conditional")
DEFAULT_BLOCK = 65536
DEFAULT_STALL_LIMIT = 10**9


# -- quantiles -----------------------------------------------------------------------------


def empirical_quantile(values, r):
    """Lower r-quantile: the order statistic of rank ``ceil(r k)`` among k values."""
    vals = np.sort(np.asarray(values, dtype=float))
    if vals.size == 0:
        raise DomainError("empirical quantile of an empty multiset is undefined")
    return float(vals[rank(vals.size, r) - 1])


def empirical_quantile_bruteforce(values, r):
    """Linear-scan reference: the smallest value x with #{x_j <= x} >= r k."""
    vals = [float(v) for v in values]
    if not vals:
        raise DomainError("empirical quantile of an empty multiset is undefined")
    frac = as_fraction(r)
    k = len(vals)
    best = math.inf
    for c in vals:
        count = sum(1 for v in vals if v <= c)
        if count * frac.denominator >= frac.numerator * k and c < best:
            best = c
    return best


class ClubState:
    """Admitted opinions as an ordered multiset with O(log k) rank selection."""

    def __init__(self, r, opinions=()):
        self.r = as_fraction(r)
        self.opinions = SortedList(float(v) for v in opinions)

    @property
    def k(self):
        return len(self.opinions)

    @property
    def m_current(self):
        """Running lower r-quantile; -inf for the empty club."""
        if not self.opinions:
            return -math.inf
        return self.opinions[rank(self.k, self.r) - 1]

    def count_at_most(self, x):
        return self.opinions.bisect_right(x)

    def insert(self, x):
        self.opinions.add(float(x))

    def __repr__(self):
        return f"ClubState(k={self.k}, r={self.r}, m_current={self.m_current})"


def admit_step_voting(state, pair):
    """Apply the voting rule to one candidate pair; return the admitted value or None.

    Members at or below the midpoint (ties included) vote for the smaller candidate.
    """
    x, y = float(pair[0]), float(pair[1])
    lo = x if x <= y else y
    k = state.k
    if k:
        votes = state.count_at_most((x + y) / 2.0)
        if votes * state.r.denominator < state.r.numerator * k:
            return None
    state.insert(lo)
    return lo


def admit_step_threshold(state, pair):
    """Admit min(pair) iff the midpoint is at least the running quantile."""
    x, y = float(pair[0]), float(pair[1])
    if state.k and (x + y) / 2.0 < state.m_current:
        return None
    lo = x if x <= y else y
    state.insert(lo)
    return lo


# -- walks ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class WalkState:
    """Quantile random walks ``y_k = r k - #{j<k: x_j <= m_j}`` and its strict-inequality twin.

    Values are exact rationals so that incremental and from-scratch evaluations agree.
    """

    y: Fraction = Fraction(0)
    y_plus: Fraction = Fraction(0)

    @property
    def delta(self):
        return self.y_plus - self.y


def update_walks(walk, x_k, m_k, r):
    """Advance both walks by one admission."""
    frac = as_fraction(r)
    return WalkState(
        y=walk.y + frac - (1 if x_k <= m_k else 0),
        y_plus=walk.y_plus + frac - (1 if x_k < m_k else 0),
    )


# -- traces --------------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRecord:
    k: int
    x_k: float
    m_k: float
    y_k: float
    y_plus_k: float
    t_k: int


@dataclass
class Trace:
    """Columnar record of one chain.

    ``m[k]`` is the quantile before ``x[k]`` was admitted (``-inf`` at k=0), and
    ``t[k]`` the cumulative number of candidate pairs consumed (-1 when the
    engine skips rejections).
    """

    x: np.ndarray
    m: np.ndarray
    t: np.ndarray
    r: Fraction
    engine: str = "threshold"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = as_fraction(self.r)
        le = (self.x <= self.m).astype(np.int64)
        lt = (self.x < self.m).astype(np.int64)
        self._c_le = np.concatenate([[0], np.cumsum(le)])
        self._c_lt = np.concatenate([[0], np.cumsum(lt)])

    def __len__(self):
        return self.x.size

    @property
    def k(self):
        return np.arange(self.x.size)

    def _walk(self, counts):
        num, den = self.r.numerator, self.r.denominator
        k = np.arange(counts.size, dtype=np.int64)
        return (num * k - den * counts).astype(float) / den

    @property
    def y(self):
        """y_k before each admission."""
        return self._walk(self._c_le)[:-1]

    @property
    def y_plus(self):
        return self._walk(self._c_lt)[:-1]

    @property
    def final_walk(self):
        """Exact walk values after the last admission."""
        n = self.x.size
        return WalkState(
            y=self.r * n - int(self._c_le[-1]), y_plus=self.r * n - int(self._c_lt[-1])
        )

    @property
    def final_m(self):
        """Quantile after the last admission."""
        return empirical_quantile(self.x, self.r)

    def __getitem__(self, i):
        i = range(self.x.size)[i]
        num, den = self.r.numerator, self.r.denominator
        return TraceRecord(
            k=i,
            x_k=float(self.x[i]),
            m_k=float(self.m[i]),
            y_k=(num * i - den * int(self._c_le[i])) / den,
            y_plus_k=(num * i - den * int(self._c_lt[i])) / den,
            t_k=int(self.t[i]),
        )

    def __iter__(self):
        for i in range(self.x.size):
            yield self[i]

    def records(self):
        return list(self)

    def to_csv(self, path, thin=1):
        """Write columns k, x_k, m_k, y_k, y_plus_k, t_k, keeping every ``thin``-th row."""
        if thin < 1:
            raise ConfigError("thinning stride must be >= 1")
        idx = np.arange(0, self.x.size, thin)
        y = self.y[idx]
        yp = self.y_plus[idx]
        with open(path, "w") as fh:
            fh.write("k,x_k,m_k,y_k,y_plus_k,t_k\n")
            for j, i in enumerate(idx):
                fh.write(
                    f"{i},{float(self.x[i])!r},{float(self.m[i])!r},"
                    f"{float(y[j])!r},{float(yp[j])!r},{int(self.t[i])}\n"
                )


def trace_from_opinions(opinions, r):
    """Trace of a given admission sequence (quantiles recomputed, no round counts)."""
    state = ClubState(r)
    xs = np.asarray(opinions, dtype=float)
    ms = np.empty(xs.size)
    for i, v in enumerate(xs):
        ms[i] = state.m_current
        state.insert(v)
    return Trace(xs, ms, np.full(xs.size, -1, dtype=np.int64), state.r, engine="given")


# -- candidate streams and chains ----------------------------------------------------------


class CandidateStream:
    """Candidate pairs drawn in fixed-size blocks so every engine consumes the same stream."""

    def __init__(self, measure, rng, block=DEFAULT_BLOCK):
        self.measure = measure
        self.rng = rng
        self.block = int(block)

    def next_block(self):
        x = np.asarray(self.measure.sample(self.rng, self.block), dtype=float)
        y = np.asarray(self.measure.sample(self.rng, self.block), dtype=float)
        return x, y

    def __iter__(self):
        while True:
            x, y = self.next_block()
            yield from zip(x.tolist(), y.tolist())


def run_chain(
    measure,
    r,
    n_admit,
    engine="threshold",
    seed=0,
    stream=0,
    max_rejections=DEFAULT_STALL_LIMIT,
    block=DEFAULT_BLOCK,
):
    """Simulate until ``n_admit`` members have been admitted.

    ``voting`` and ``threshold`` consume the same i.i.d. candidate pairs and give
    identical traces; ``conditional`` draws each admitted member directly from
    the conditional law and leaves ``t`` at -1.
    """
    if n_admit < 1:
        raise ConfigError("n_admit must be >= 1")
    if engine not in ENGINES:
        raise ConfigError(f"unknown engine {engine!r}; choose from {ENGINES}")
    frac = as_fraction(r)
    rng = make_rng(seed, stream)
    if engine == "voting":
        tr = _run_voting(measure, frac, n_admit, rng, max_rejections, block)
    elif engine == "threshold":
        tr = _run_threshold(measure, frac, n_admit, rng, max_rejections, block)
    else:
        tr = _run_conditional(measure, frac, n_admit, rng, block)
    tr.meta.update(seed=int(seed), stream=int(stream))
    return tr


def _run_voting(measure, frac, n_admit, rng, max_rejections, block):
    state = ClubState(frac)
    xs = np.empty(n_admit)
    ms = np.empty(n_admit)
    ts = np.empty(n_admit, dtype=np.int64)
    t = 0
    stall = 0
    k = 0
    for pair in CandidateStream(measure, rng, block):
        t += 1
        m_before = state.m_current
        v = admit_step_voting(state, pair)
        if v is None:
            stall += 1
            if stall >= max_rejections:
                raise StallError(
                    f"{stall} consecutive rejections at k={k}, m_k={m_before}", bound=stall
                )
            continue
        xs[k], ms[k], ts[k] = v, m_before, t
        stall = 0
        k += 1
        if k == n_admit:
            break
    return Trace(xs, ms, ts, frac, engine="voting")


def _run_threshold(measure, frac, n_admit, rng, max_rejections, block):
    low, high, st, fst = _kernels.new_state(n_admit)
    xs = np.empty(n_admit)
    ms = np.empty(n_admit)
    ts = np.empty(n_admit, dtype=np.int64)
    stream = CandidateStream(measure, rng, block)
    while st[_kernels.K] < n_admit:
        px, py = stream.next_block()
        _kernels.threshold_block(
            px, py, low, high, st, fst, xs, ms, ts, n_admit,
            frac.numerator, frac.denominator, max_rejections,
        )
        if st[_kernels.STATUS] == _kernels.STATUS_STALL:
            raise StallError(
                f"{st[_kernels.STALL]} consecutive rejections at k={st[_kernels.K]}, m_k={fst[0]}",
                bound=int(st[_kernels.STALL]),
            )
    return Trace(xs, ms, ts, frac, engine="threshold")


def _run_conditional(measure, frac, n_admit, rng, block):
    xs = np.empty(n_admit)
    ms = np.empty(n_admit)
    ts = np.full(n_admit, -1, dtype=np.int64)
    if type(measure) in (Uniform, Exponential):
        if isinstance(measure, Uniform):
            kind, p0, p1 = _kernels.KIND_UNIFORM, measure.a, measure.width
        else:
            kind, p0, p1 = _kernels.KIND_EXPONENTIAL, measure.rate, 0.0
        low, high, st, fst = _kernels.new_state(n_admit)
        while st[_kernels.K] < n_admit:
            u = rng.random((min(block, n_admit - int(st[_kernels.K])), 3))
            _kernels.conditional_block(
                kind, p0, p1, u, low, high, st, fst, xs, ms, n_admit,
                frac.numerator, frac.denominator,
            )
            if st[_kernels.STATUS] == _kernels.STATUS_ZERO_MASS:
                raise ZeroMassError(f"conditioning event has zero probability at m={fst[0]}")
        return Trace(xs, ms, ts, frac, engine="conditional")
    locs, masses = measure.atoms()
    if measure._cont_range() is None and 0 < locs.size <= 4096:
        suffix = np.concatenate([np.cumsum(masses[::-1])[::-1], [0.0]])
        low, high, st, fst = _kernels.new_state(n_admit)
        while st[_kernels.K] < n_admit:
            u = rng.random((min(block, n_admit - int(st[_kernels.K])), 2))
            _kernels.atomic_conditional_block(
                locs, masses, suffix, u, low, high, st, fst, xs, ms, n_admit,
                frac.numerator, frac.denominator,
            )
            if st[_kernels.STATUS] == _kernels.STATUS_ZERO_MASS:
                raise ZeroMassError(f"conditioning event has zero probability at m={fst[0]}")
        return Trace(xs, ms, ts, frac, engine="conditional")
    state = ClubState(frac)
    for k in range(n_admit):
        m = state.m_current
        if k == 0:
            x, y = measure.sample(rng, 2)
        else:
            x, y = conditional_pair_sampler(measure, m, rng=rng)
        v = min(float(x), float(y))
        xs[k], ms[k] = v, m
        state.insert(v)
    return Trace(xs, ms, ts, frac, engine="conditional")


# -- diagnostics ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsiRow:
    k: int
    x: float
    psi: int
    psi_plus: int
    identity_ok: bool


def psi_diagnostics(trace, probe_points):
    """Check ``m_k <= x <=> y_k <= psi+_k(x)`` and ``m_k >= x <=> y+_k > psi_k(x)``.

    ``psi_k(x) = #{j<k: x_j < x} - #{j<k: x_j < m_j}`` and ``psi+_k`` uses
    non-strict inequalities. Both sides are compared in exact integer
    arithmetic; any mismatch raises :class:`IntegrityError` naming the step.
    """
    num, den = trace.r.numerator, trace.r.denominator
    n = len(trace)
    k = np.arange(n, dtype=np.int64)
    c_le = trace._c_le[:-1]
    c_lt = trace._c_lt[:-1]
    rows = []
    for p in np.asarray(probe_points, dtype=float):
        below_eq = np.concatenate([[0], np.cumsum(trace.x <= p)])[:-1]
        below = np.concatenate([[0], np.cumsum(trace.x < p)])[:-1]
        psi_plus = below_eq - c_le
        psi = below - c_lt
        # den * y_k = num k - den c_le, compared against den * psi
        left1 = trace.m <= p
        right1 = num * k - den * c_le <= den * psi_plus
        left2 = trace.m >= p
        right2 = num * k - den * c_lt > den * psi
        ok = (left1 == right1) & (left2 == right2)
        if not np.all(ok):
            bad = int(np.argmin(ok))
            raise IntegrityError(
                f"quantile/walk identity violated at step k={bad}, probe x={p!r}"
            )
        rows.extend(
            PsiRow(int(i), float(p), int(a), int(b), True)
            for i, a, b in zip(k, psi, psi_plus)
        )
    return rows


def one_step_walk_increments(measure, m, r, n, rng, strategy="exact"):
    """Increments ``r - [x_k <= m]`` of y over n independent admissions from quantile m."""
    x, y = conditional_pair_sampler(measure, m, rng=rng, size=n, strategy=strategy)
    return float(as_fraction(r)) - (np.minimum(x, y) <= m).astype(float)
