"""Drift of the quantile walk as a function of the current quantile.

For a quantile value m the expected one-step change of the walk is

    rho(m)  = mu((m, inf))**2 / F_m - (1 - r),

with ``F_m = P(X + Y >= 2m)``. Its left limit ``rho_plus`` replaces the open
tail by the closed one, and its right limit replaces ``F_m`` by
``P(X + Y > 2m)``. ``rho`` is only lower semi-continuous: it jumps at atoms of
the measure and at atoms of the pair-average law, so sign analysis evaluates
both one-sided limits at every such point and refines continuous sign changes
by bisection.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import (
    ConfigError,
    NumericError,
    ResolutionError,
    UndefinedDriftError,
)
from .measure import CLOSED, OPEN, CompressedExp, Exponential, Normal, Uniform

ZERO_TOL = 1e-8
ROOT_WIDTH = 1e-10
MONOTONE_TOL = 1e-14
CONVEX_TOL = 1e-8
_LOG_SWITCH = 1e-280


def _r(r):
    r = float(r)
    if not 0 < r < 1:
        raise ConfigError(f"r must lie in (0, 1), got {r}")
    return r


def _tail_ratio(measure, m, tail_mode, sum_closed):
    """mu-tail(m)**2 / (pair-sum tail at m), falling back to log space on underflow."""
    f, fp = measure.sum_tail(m)
    denom = f if sum_closed else fp
    t = measure.tail(m, tail_mode)
    if denom > _LOG_SWITCH:
        return t * t / denom
    if t == 0.0 and denom == 0.0:
        log_f = measure.log_sum_tail(m, CLOSED if sum_closed else OPEN)
        if log_f == -math.inf:
            raise UndefinedDriftError(f"pair-sum tail vanishes at m={m}; drift undefined")
        log_t = measure.log_tail(m, tail_mode)
        return math.exp(2.0 * log_t - log_f)
    if denom == 0.0:
        raise UndefinedDriftError(f"pair-sum tail vanishes at m={m}; drift undefined")
    return t * t / denom


def support_scale(measure):
    """Length scale for numeric offsets: support width, or the interquartile range."""
    if math.isfinite(measure.mu_min) and math.isfinite(measure.mu_max):
        return max(measure.mu_max - measure.mu_min, 1e-12)
    iqr = measure.quantile(0.75) - measure.quantile(0.25)
    return max(iqr, 1e-3)


def rho(measure, r, m):
    """Expected walk increment from quantile m: mu((m, inf))**2 / F_m - (1 - r)."""
    return _tail_ratio(measure, float(m), OPEN, True) - (1.0 - _r(r))


def rho1(measure, m):
    """The r-free part of the drift, mu((m, inf))**2 / F_m."""
    return _tail_ratio(measure, float(m), OPEN, True)


def rho_plus(measure, r, m):
    """Left limit of rho at m: mu([m, inf))**2 / F_m - (1 - r).

    Where ``F_m`` vanishes (the top of a continuous support) the limit is
    taken numerically from the left.
    """
    r = _r(r)
    m = float(m)
    f, _ = measure.sum_tail(m)
    if f > 0 or measure.log_sum_tail(m) > -math.inf:
        return _tail_ratio(measure, m, CLOSED, True) - (1.0 - r)
    if m > measure.mu_max:
        raise UndefinedDriftError(f"drift undefined to the left of m={m} (beyond the support)")
    return offset_limit(lambda q: rho(measure, r, q), m, support_scale(measure), side=-1)


def rho_right_limit(measure, r, m, method="exact"):
    """Right limit of rho at m.

    ``method="exact"`` evaluates mu((m, inf))**2 / P(X + Y > 2m) - (1 - r);
    ``method="offset"`` extrapolates rho(m + h) over shrinking offsets and is
    kept as an independent check.
    """
    r = _r(r)
    m = float(m)
    if method == "exact":
        return _tail_ratio(measure, m, OPEN, False) - (1.0 - r)
    if method == "offset":
        return offset_limit(lambda q: rho(measure, r, q), m, support_scale(measure), side=+1)
    raise ValueError(f"unknown method {method!r}")


def offset_limit(fn, m, width, side=+1, j_min=10, j_max=40, tol=1e-8):
    """One-sided limit of ``fn`` at m from offsets 2**-j * width with Richardson stabilization.

    Estimates ``R_j = 2 fn(m + s h_{j+1}) - fn(m + s h_j)`` are accepted once
    three consecutive values agree within ``tol``. Raises :class:`NumericError`
    carrying the last two estimates otherwise.
    """
    vals = [fn(m + side * math.ldexp(width, -j)) for j in range(j_min, j_max + 1)]
    est = [2.0 * b - a for a, b in zip(vals[:-1], vals[1:])]
    for i in range(2, len(est)):
        window = est[i - 2:i + 1]
        if max(window) - min(window) <= tol:
            return est[i]
    raise NumericError(
        f"one-sided limit at m={m} did not stabilize", bound=(est[-2], est[-1])
    )


# -- sign analysis -------------------------------------------------------------------------


def _sign(v):
    if abs(v) <= ZERO_TOL:
        return 0
    return 1 if v > 0 else -1


@dataclass(frozen=True)
class SignInterval:
    lo: float
    hi: float
    sign: int


@dataclass(frozen=True)
class Root:
    """A point where rho changes sign or vanishes.

    ``direction`` is ``"down"`` for + to -, ``"up"`` for - to +, ``"flat"`` otherwise.
    """

    m: float
    kind: str
    direction: str
    rho: float
    rho_plus: float
    rho_right: float


@dataclass(frozen=True)
class DriftProfile:
    measure: object
    r: float
    bracket: tuple
    intervals: tuple
    roots: tuple
    zero_intervals: tuple = field(default=())

    def rho(self, m):
        return rho(self.measure, self.r, m)

    def rho_plus(self, m):
        return rho_plus(self.measure, self.r, m)

    def rho_right_limit(self, m):
        return rho_right_limit(self.measure, self.r, m)

    def report(self):
        """Plain-text summary of the sign decomposition."""
        sym = {1: "+", 0: "0", -1: "-"}
        lines = [
            f"measure: {self.measure!r}",
            f"r: {self.r!r}",
            f"bracket: [{self.bracket[0]!r}, {self.bracket[1]!r}]",
            "intervals:",
        ]
        lines += [f"  [{iv.lo:.12g}, {iv.hi:.12g}] {sym[iv.sign]}" for iv in self.intervals]
        lines.append("roots:")
        lines += [
            f"  m={rt.m:.12g} kind={rt.kind} direction={rt.direction} "
            f"rho={rt.rho:.6g} rho_plus={rt.rho_plus:.6g} rho_right={rt.rho_right:.6g}"
            for rt in self.roots
        ]
        if self.zero_intervals:
            lines.append("zero intervals:")
            lines += [f"  [{a:.12g}, {b:.12g}]" for a, b in self.zero_intervals]
        return "\n".join(lines) + "\n"


def search_bracket(measure, r):
    """Interval containing every sign change of rho.

    For unbounded support the upper end doubles until rho < -(1 - r)/2 at M,
    1.5 M and 2 M (measured from the lower end).
    """
    r = _r(r)
    lo = measure.mu_min if math.isfinite(measure.mu_min) else float(measure.quantile(1e-12))
    if math.isfinite(measure.mu_max):
        return lo, float(measure.mu_max)
    span = max(float(measure.quantile(1 - 1e-3)) - lo, 1e-3)
    target = -(1.0 - r) / 2.0
    for _ in range(64):
        pts = [lo + s * span for s in (1.0, 1.5, 2.0)]
        try:
            if all(rho(measure, r, p) < target for p in pts):
                return lo, pts[-1]
        except UndefinedDriftError:
            return lo, pts[0]
        span *= 2.0
    raise NumericError("could not bracket the sign changes of rho", bound=span)


def discontinuity_points(measure, lo, hi):
    """Atoms of mu and of the pair-average law inside [lo, hi]."""
    locs = measure.atoms()[0]
    if locs.size == 0:
        return np.empty(0)
    pairs = np.array([(a + b) / 2.0 for a, b in combinations_with_replacement(locs.tolist(), 2)])
    pts = np.unique(np.concatenate([locs, pairs]))
    return pts[(pts >= lo) & (pts <= hi)]


def sign_analysis(measure, r, grid_resolution=512):
    """Partition the search bracket into maximal sign intervals of rho and locate its roots."""
    r = _r(r)
    if grid_resolution < 64:
        raise ConfigError("grid_resolution must be at least 64")
    lo, hi = search_bracket(measure, r)
    locs = measure.atoms()[0]
    n_atoms = int(np.sum((locs >= lo) & (locs <= hi)))
    if n_atoms > grid_resolution:
        raise ResolutionError(
            f"grid of {grid_resolution} points cannot separate {n_atoms} atoms", bound=n_atoms
        )
    jumps = discontinuity_points(measure, lo, hi)
    width = hi - lo
    grid = np.linspace(lo, hi, grid_resolution)
    top_open = math.isfinite(measure.mu_max) and measure.tail(hi, CLOSED) == 0.0
    if top_open:
        # rho is undefined at the top of a continuous support; stop just short of it
        grid[-1] = hi - 1e-13 * width
        jumps = jumps[jumps < grid[-1]]
    pts = np.unique(np.concatenate([grid, jumps]))
    jump_set = set(jumps.tolist())

    # ordered samples (position, value, is_jump_side)
    samples = []
    for p in pts.tolist():
        if p in jump_set:
            samples.append((p, rho_plus(measure, r, p), True))
            samples.append((p, rho(measure, r, p), True))
            samples.append((p, rho_right_limit(measure, r, p), True))
        else:
            samples.append((p, rho(measure, r, p), False))

    # transitions between consecutive samples of different sign
    transitions = []  # (a, b, s_left, s_right, is_jump)
    for (p, v, _), (q, w, _) in zip(samples[:-1], samples[1:]):
        s, t = _sign(v), _sign(w)
        if s == t:
            continue
        if p == q:
            transitions.append((p, p, s, t, True))
            continue
        if s != 0 and t != 0:
            # a genuine crossing: locate it on the raw sign, not the zero band
            def same_side(v, s=s):
                return (v > 0) == (s > 0)
        else:
            def same_side(v, s=s):
                return _sign(v) == s
        a, b = p, q
        while b - a > ROOT_WIDTH:
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if same_side(rho(measure, r, mid)):
                a = mid
            else:
                b = mid
        transitions.append((a, b, s, t, False))

    # sign intervals
    intervals = []
    start = lo
    cur = _sign(samples[0][1])
    for a, b, s, t, _ in transitions:
        intervals.append(SignInterval(start, a, cur))
        start, cur = b, t
    intervals.append(SignInterval(start, hi, cur))
    intervals = _merge_intervals(intervals)

    roots = []
    zero_intervals = []
    for a, b, s, t, is_jump in transitions:
        if s != 0 and t != 0:
            m = a if is_jump else (a if s < 0 else b)
            roots.append(_make_root(measure, r, m, "jump" if is_jump else "crossing",
                                    "down" if s > t else "up"))
    # zero runs: between a transition into 0 and the next transition out of 0
    entry = None
    if _sign(samples[0][1]) == 0:
        entry = (lo, None, False)
    for a, b, s, t, is_jump in transitions:
        if t == 0:
            entry = (b, s, is_jump)
        elif s == 0 and entry is not None:
            z_lo, s_in, j_in = entry
            roots.extend(_zero_run_roots(measure, r, z_lo, a, s_in, t, j_in or is_jump, zero_intervals))
            entry = None
    if entry is not None:
        z_lo, s_in, j_in = entry
        z_hi = samples[-1][0]
        roots.extend(_zero_run_roots(measure, r, z_lo, z_hi, s_in, None, j_in, zero_intervals))
    roots.sort(key=lambda rt: rt.m)
    return DriftProfile(
        measure=measure,
        r=r,
        bracket=(float(lo), float(hi)),
        intervals=tuple(intervals),
        roots=tuple(roots),
        zero_intervals=tuple(zero_intervals),
    )


def _merge_intervals(intervals):
    out = []
    for iv in intervals:
        if out and out[-1].sign == iv.sign:
            out[-1] = SignInterval(out[-1].lo, iv.hi, iv.sign)
        else:
            out.append(iv)
    return out


def _make_root(measure, r, m, kind, direction):
    return Root(
        m=float(m),
        kind=kind,
        direction=direction,
        rho=_safe(rho, measure, r, m),
        rho_plus=_safe(rho_plus, measure, r, m),
        rho_right=_safe(rho_right_limit, measure, r, m),
    )


def _safe(fn, measure, r, m):
    try:
        return fn(measure, r, m)
    except NumericError:
        return math.nan


def _zero_run_roots(measure, r, z_lo, z_hi, s_in, s_out, is_jump, zero_intervals):
    if s_in is not None and s_out is not None and s_in == s_out:
        kind, direction = "touch", "flat"
    else:
        kind = "jump" if is_jump else "crossing"
        if s_in is None:
            direction = "down" if (s_out or 0) < 0 else "up"
        elif s_out is None:
            direction = "down" if s_in > 0 else "up"
        else:
            direction = "down" if s_in > s_out else "up"
    if z_hi - z_lo <= 10 * ROOT_WIDTH:
        return [_make_root(measure, r, 0.5 * (z_lo + z_hi), kind, direction)]
    zero_intervals.append((float(z_lo), float(z_hi)))
    return [
        _make_root(measure, r, z_lo, kind, direction),
        _make_root(measure, r, z_hi, kind, direction),
    ]


# -- determinism criteria ------------------------------------------------------------------


@dataclass(frozen=True)
class MonotonicityResult:
    strictly_decreasing: bool
    witness: tuple = None

    @property
    def verdict(self):
        return "strictly-decreasing" if self.strictly_decreasing else "not-monotone"


def support_points(measure, grid_resolution=512):
    """Grid over the support (continuous part) merged with the atoms."""
    lo = measure.mu_min if math.isfinite(measure.mu_min) else float(measure.quantile(1e-6))
    hi = measure.mu_max if math.isfinite(measure.mu_max) else float(measure.quantile(1 - 1e-6))
    locs = measure.atoms()[0]
    pts = [locs[(locs >= lo) & (locs <= hi)]]
    if measure._cont_range() is not None:
        g = np.linspace(lo, hi, grid_resolution)
        if math.isfinite(measure.mu_max) and measure.tail(hi, CLOSED) == 0.0:
            g = g[:-1]
        pts.append(g[measure.pdf(g) > 0])
    return np.unique(np.concatenate(pts))


def is_monotone_rho1(measure, grid_resolution=512):
    """Check that mu((m, inf))**2 / F_m strictly decreases over the support.

    Returns the first witness pair (m1 < m2 with rho1(m1) <= rho1(m2)) on failure.
    """
    pts = support_points(measure, grid_resolution)
    vals = np.array([rho1(measure, p) for p in pts])
    bad = np.nonzero(vals[1:] >= vals[:-1] - MONOTONE_TOL)[0]
    if bad.size:
        i = int(bad[0])
        return MonotonicityResult(False, (float(pts[i]), float(pts[i + 1])))
    return MonotonicityResult(True, None)


@dataclass(frozen=True)
class ConvexityResult:
    status: str
    x: float = None
    g2: float = None
    g3: float = None


def _log_tail_derivatives(measure, x):
    """Second and third derivatives of g = -log mu((x, inf)) where known in closed form."""
    if isinstance(measure, Exponential):
        return np.zeros_like(x), np.zeros_like(x)
    if isinstance(measure, CompressedExp):
        a = measure.alpha
        return a * (a - 1) * x ** (a - 2), a * (a - 1) * (a - 2) * x ** (a - 3)
    if isinstance(measure, Uniform):
        d = measure.b - x
        return 1.0 / d**2, 2.0 / d**3
    if isinstance(measure, Normal):
        s = measure.stddev
        z = (x - measure.mean) / s
        h = np.exp(-0.5 * z * z - np.log(np.sqrt(2 * np.pi)) - measure.log_tail(x))
        dh = h * (h - z)
        return dh / s**2, (dh * (h - z) + h * (dh - 1.0)) / s**3
    return None


def convexity_criterion(measure, grid_resolution=256):
    """Check g'' >= 0 and g''' <= 0 for g = -log mu((x, inf)) on a grid inside the support."""
    if measure.has_atoms:
        return ConvexityResult("inapplicable")
    lo = measure.mu_min if math.isfinite(measure.mu_min) else float(measure.quantile(1e-6))
    hi = measure.mu_max if math.isfinite(measure.mu_max) else float(measure.quantile(1 - 1e-6))
    span = hi - lo
    x = np.linspace(lo, hi, grid_resolution + 2)[1:-1]
    known = _log_tail_derivatives(measure, x)
    if known is not None:
        g2, g3 = known
    else:
        h = 0.25 * span / (grid_resolution + 1)
        x = x[(x - 2 * h > lo) & (x + 2 * h < hi)]

        def g(z):
            return -np.asarray(measure.log_tail(z, OPEN), dtype=float)

        gm2, gm1, g0, gp1, gp2 = (g(x + j * h) for j in (-2, -1, 0, 1, 2))
        g2 = (-gp2 + 16 * gp1 - 30 * g0 + 16 * gm1 - gm2) / (12 * h * h)
        g3 = (gp2 - 2 * gp1 + 2 * gm1 - gm2) / (2 * h**3)
    bad = np.nonzero((g2 < -CONVEX_TOL) | (g3 > CONVEX_TOL))[0]
    if bad.size:
        i = int(bad[0])
        return ConvexityResult("violated", float(x[i]), float(g2[i]), float(g3[i]))
    return ConvexityResult("satisfied")


@dataclass(frozen=True)
class RatioProbe:
    m: float
    ratio: float
    underflow: bool = False


def ff_ratio_probe(measure, m_list):
    """P(min(X, Y) > m) / P((X + Y)/2 >= m) at each m; flags points where F_m underflows."""
    out = []
    for m in m_list:
        m = float(m)
        try:
            out.append(RatioProbe(m, rho1(measure, m)))
        except UndefinedDriftError:
            out.append(RatioProbe(m, math.nan, True))
    return out


def drift_table(measure, r, grid_resolution):
    """Rows (m, rho, rho_plus) on a uniform grid over the search bracket."""
    lo, hi = search_bracket(measure, r)
    if math.isfinite(measure.mu_max) and measure.tail(hi, CLOSED) == 0.0:
        hi = hi - 1e-13 * (hi - lo)
    rows = []
    for m in np.linspace(lo, hi, grid_resolution):
        rows.append((float(m), _safe(rho, measure, r, m), _safe(rho_plus, measure, r, m)))
    return rows


__all__ = [
    "DriftProfile",
    "Root",
    "SignInterval",
    "convexity_criterion",
    "drift_table",
    "ff_ratio_probe",
    "is_monotone_rho1",
    "offset_limit",
    "rho",
    "rho1",
    "rho_plus",
    "rho_right_limit",
    "sign_analysis",
]
