"""Limiting opinion distributions.

A limit either conditions a pair on its average reaching a threshold m and
keeps the smaller member,

    nu((s, inf)) = P(X > s, Y > s | X + Y >= 2m)      (case I)
    nu((s, inf)) = P(X > s, Y > s | X + Y >  2m)      (case II)

or is a point mass at the top of the support (case III). Admissible thresholds
come from the sign structure of the drift; for continuous measures the limit has
density ``2 mu([max(x, 2m - x), inf)) f(x) / F_m``.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate, optimize, special

from . import drift
from .errors import (
    ConfigError,
    DomainError,
    InapplicableError,
    NonDeterministicError,
    NumericError,
    ZeroMassError,
)
from .measure import (
    CLOSED,
    OPEN,
    CompressedExp,
    Exponential,
    Normal,
    Uniform,
    conditional_pair_sampler,
)

CASE_TOL = 1e-8


class Case(Enum):
    CLOSED_THRESHOLD = "I"
    OPEN_THRESHOLD = "II"
    POINT_MASS = "III"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LimitSpec:
    """One candidate limit: a conditioning case and its threshold m.

    ``cases`` lists every case condition met at this m (both I and II when the
    closed and open conditionings coincide). ``stable`` is False for upward
    drift crossings, which meet the formal conditions but repel the quantile.
    """

    measure: object
    r: float
    case: Case
    m: float
    cases: tuple = ()
    stable: bool = True
    formula: object = field(default=None, compare=False, repr=False)

    @property
    def closed(self):
        return self.case is Case.CLOSED_THRESHOLD

    @property
    def normalizer(self):
        """P(X + Y >= 2m) (case I), P(X + Y > 2m) (case II) or 1 (case III)."""
        if self.case is Case.POINT_MASS:
            return 1.0
        f, fp = self.measure.sum_tail(self.m)
        return f if self.closed else fp

    def tail(self, s):
        return limit_tail(self, s)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = 1.0 - np.vectorize(lambda v: limit_tail(self, v))(x)
        return float(out) if out.ndim == 0 else out

    def density(self, x):
        """Normalized density (continuous measures, cases I/II)."""
        if self.case is Case.POINT_MASS:
            raise InapplicableError("a point mass has no density")
        if self.formula is not None:
            return self.formula(np.asarray(x, dtype=float))
        w = limit_density(self.measure, self.m, x)
        return w / (0.5 * self.normalizer)

    def sample(self, rng, size):
        """Draw from the limit: the smaller member of a conditioned pair."""
        if self.case is Case.POINT_MASS:
            return np.full(size, self.measure.mu_max)
        x, y = conditional_pair_sampler(
            self.measure, self.m, CLOSED if self.closed else OPEN, rng=rng, size=size
        )
        return np.minimum(x, y)

    def describe(self):
        tags = ",".join(str(c) for c in (self.cases or (self.case,)))
        note = "" if self.stable else " (unstable)"
        if self.case is Case.POINT_MASS:
            return f"case {tags}: point mass at {self.measure.mu_max!r}{note}"
        return f"case {tags}: m={self.m!r}{note}"


def _check_m(measure, r, m, closed):
    f, fp = measure.sum_tail(m)
    if (f if closed else fp) <= 0:
        raise ZeroMassError(f"conditioning event has zero probability at m={m}")


def limit_tail(spec, s):
    """nu((s, inf)) for the given spec."""
    s = float(s)
    mu = spec.measure
    if spec.case is Case.POINT_MASS:
        return 1.0 if s < mu.mu_max else 0.0
    m = spec.m
    closed = spec.closed
    denom = spec.normalizer
    if denom <= 0:
        raise ZeroMassError(f"conditioning event has zero probability at m={m}")
    if s >= m:
        t = mu.tail(s, OPEN)
        if denom > 1e-300 and t > 1e-150:
            return t * t / denom
        return math.exp(log_limit_tail(spec, s))
    num = mu.tail(m, CLOSED if closed else OPEN) ** 2 + 2.0 * mu.weighted_mass(
        s, m, m, closed=closed, hi_inclusive=not closed
    )
    return min(1.0, num / denom)


def log_limit_tail(spec, s):
    """log nu((s, inf)) computed in log space for s >= m."""
    if spec.case is Case.POINT_MASS or s < spec.m:
        v = limit_tail(spec, s)
        return math.log(v) if v > 0 else -math.inf
    lt = spec.measure.log_tail(s, OPEN)
    lf = spec.measure.log_sum_tail(spec.m, CLOSED if spec.closed else OPEN)
    return 2.0 * lt - lf


def tail_exponent(spec, s):
    """log nu((s, inf)) / log mu((s, inf)); tends to 2 for unbounded support."""
    if math.isfinite(spec.measure.mu_max):
        raise DomainError("tail exponent needs unbounded support")
    if spec.case is Case.POINT_MASS or not s > spec.m:
        raise DomainError("tail exponent needs a threshold spec and s > m")
    lt = spec.measure.log_tail(s, OPEN)
    if lt == 0.0:
        raise DomainError("mu((s, inf)) = 1; exponent undefined")
    return log_limit_tail(spec, s) / lt


def limit_density(measure, m, x):
    """Unnormalized limit density mu([max(x, 2m - x), inf)) f(x)."""
    if measure.has_atoms:
        raise InapplicableError("limit density requires a continuous measure")
    x = np.asarray(x, dtype=float)
    out = measure.tail(np.maximum(x, 2.0 * m - x), CLOSED) * measure.pdf(x)
    return float(out) if np.ndim(out) == 0 else out


def normalize(measure, m):
    """Integral of :func:`limit_density` over the line, by adaptive quadrature."""
    if measure.has_atoms:
        raise InapplicableError("limit density requires a continuous measure")
    lo, hi = measure._cont_range()
    lo = max(lo, 2.0 * m - measure.mu_max)
    cuts = [c for c in np.concatenate([measure._cont_breaks(), [m]]) if lo < c < hi]
    edges = [lo] + sorted(set(cuts)) + [hi]
    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(
            lambda t: limit_density(measure, m, t), a, b, epsabs=1e-13, epsrel=1e-11, limit=200
        )
        total += v
        err += e
    if err > 1e-9:
        raise NumericError("normalizing integral did not converge", bound=err)
    return total


# -- classification ------------------------------------------------------------------------


@dataclass(frozen=True)
class Classification:
    """Candidate limits for a measure and r.

    ``specs`` holds the stable candidates; a singleton with no continuum means the
    limit is predicted to be deterministic.
    """

    measure: object
    r: float
    specs: tuple
    unstable: tuple
    continuum: tuple
    rho1_monotone: object
    profile: object

    @property
    def deterministic(self):
        return len(self.specs) == 1 and not self.continuum

    def __iter__(self):
        return iter(self.specs)

    def __len__(self):
        return len(self.specs)

    def __getitem__(self, i):
        return self.specs[i]

    def report(self):
        lines = [
            f"measure: {self.measure!r}",
            f"r: {self.r!r}",
            f"verdict: {'deterministic' if self.deterministic else 'non-deterministic'}",
            f"rho_1 on support: {self.rho1_monotone.verdict}",
        ]
        if self.rho1_monotone.witness is not None:
            a, b = self.rho1_monotone.witness
            lines.append(f"  witness: {a!r} < {b!r}")
        lines.append(f"specs ({len(self.specs)}):")
        lines += [f"  {s.describe()}" for s in self.specs]
        if self.unstable:
            lines.append(f"unstable candidates ({len(self.unstable)}):")
            lines += [f"  {s.describe()}" for s in self.unstable]
        if self.continuum:
            lines.append("continuum of thresholds:")
            lines += [f"  [{a!r}, {b!r}]" for a, b in self.continuum]
        return "\n".join(lines) + "\n"


def _top_limit(measure, r):
    """lim (or liminf when it oscillates) of rho(q) as q increases to mu_max."""
    f, _ = measure.sum_tail(measure.mu_max)
    if f > 0:
        return drift.rho_plus(measure, r, measure.mu_max)
    width = drift.support_scale(measure)
    fn = lambda q: drift.rho(measure, r, q)  # noqa: E731
    try:
        return drift.offset_limit(fn, measure.mu_max, width, side=-1)
    except NumericError:
        vals = [fn(measure.mu_max - math.ldexp(width, -j)) for j in range(10, 41)]
        return min(vals[len(vals) // 2:])


def classify(measure, r, grid_resolution=512, tol=CASE_TOL):
    """All thresholds (and the point mass) meeting a limit-case condition."""
    r = float(r)
    if not 0 < r < 1:
        raise ConfigError("r must lie in (0, 1)")
    profile = drift.sign_analysis(measure, r, grid_resolution)
    specs, unstable = [], []
    seen = set()
    for root in profile.roots:
        m = root.m
        if m in seen or m >= measure.mu_max:
            continue
        seen.add(m)
        rho_m, rho_l, rho_r = root.rho, root.rho_plus, root.rho_right
        case_i = rho_m <= tol and rho_l >= -tol
        case_ii = rho_m <= tol and abs(rho_r) <= tol
        if not (case_i or case_ii):
            continue
        stable = root.direction != "up"
        f, fp = measure.sum_tail(m)
        found = []
        if case_i and case_ii and f == fp:
            found.append(LimitSpec(measure, r, Case.CLOSED_THRESHOLD, m,
                                   (Case.CLOSED_THRESHOLD, Case.OPEN_THRESHOLD), stable))
        else:
            if case_i:
                found.append(LimitSpec(measure, r, Case.CLOSED_THRESHOLD, m,
                                       (Case.CLOSED_THRESHOLD,), stable))
            if case_ii:
                found.append(LimitSpec(measure, r, Case.OPEN_THRESHOLD, m,
                                       (Case.OPEN_THRESHOLD,), stable))
        (specs if stable else unstable).extend(found)
    if math.isfinite(measure.mu_max) and _top_limit(measure, r) >= -tol:
        specs.append(LimitSpec(measure, r, Case.POINT_MASS, float(measure.mu_max),
                               (Case.POINT_MASS,), True))
    return Classification(
        measure=measure,
        r=r,
        specs=tuple(specs),
        unstable=tuple(unstable),
        continuum=profile.zero_intervals,
        rho1_monotone=drift.is_monotone_rho1(measure, grid_resolution),
        profile=profile,
    )


# -- closed-form catalog -------------------------------------------------------------------


def uniform_threshold(r):
    """Threshold on the unit interval for r < 1/2: root of (1-m)^2 = (1-r)(1-2m^2)."""
    return (1.0 - math.sqrt(1.0 - 3.0 * r + 2.0 * r * r)) / (3.0 - 2.0 * r)


def exponential_threshold(r, rate=1.0):
    return r / (2.0 * (1.0 - r)) / rate


def normal_threshold(r, mean=0.0, stddev=1.0):
    """Root of Q(z)^2 = (1-r) Q(sqrt(2) z) for the standard normal tail Q, rescaled."""
    target = math.log1p(-r)

    def f(z):
        return 2.0 * special.log_ndtr(-z) - special.log_ndtr(-math.sqrt(2.0) * z) - target

    lo, hi = -1.0, 1.0
    while f(lo) < 0:
        lo *= 2.0
    while f(hi) > 0:
        hi *= 2.0
    z = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)
    return mean + stddev * z


def compressed_exp_threshold(r, alpha):
    """Root of the rescaled pair-sum equation e^{2m^a} F_m = 1/(1-r) for tail exp(-x^a)."""
    target = 1.0 / (1.0 - r)

    def psi(m):
        tm = 2.0 * m**alpha

        def integrand(x):
            return alpha * x ** (alpha - 1.0) * math.exp(tm - x**alpha - (2.0 * m - x) ** alpha)

        val, _ = integrate.quad(integrand, 0.0, 2.0 * m, epsabs=1e-14, epsrel=1e-12, limit=200)
        return val + math.exp(tm - (2.0 * m) ** alpha) - target

    lo, hi = 1e-6, 10.0 / (1.0 - r)
    for _ in range(60):
        if psi(lo) < 0 < psi(hi):
            break
        hi *= 2.0
    else:
        raise NumericError("could not bracket the compressed-exponential threshold", bound=hi)
    return optimize.brentq(psi, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


def closed_form(measure, r):
    """Explicit limit for uniform, normal, exponential and compressed-exponential measures."""
    r = float(r)
    if isinstance(measure, Uniform):
        a, w = measure.a, measure.width
        if r == 0.5:
            raise NonDeterministicError("uniform with r = 1/2 has a random limit; use classify()")
        if r > 0.5:
            return LimitSpec(measure, r, Case.POINT_MASS, measure.b, (Case.POINT_MASS,))
        mm = uniform_threshold(r)
        z = 0.5 * (1.0 - 2.0 * mm * mm)

        def dens(x, a=a, w=w, mm=mm, z=z):
            u = (x - a) / w
            d = np.where(u <= mm, u - (2.0 * mm - 1.0), 1.0 - u)
            return np.where((u >= 0) & (u <= 1), d / (z * w), 0.0)

        m = a + w * mm
    elif isinstance(measure, Exponential):
        lam = measure.rate
        m = exponential_threshold(r, lam)

        def dens(x, m=m, lam=lam):
            d = np.where(x <= m, 1.0, np.exp(-2.0 * lam * (x - m)))
            return np.where(x >= 0, lam * d / (lam * m + 0.5), 0.0)

    elif isinstance(measure, Normal):
        m = normal_threshold(r, measure.mean, measure.stddev)
        dens = None
    elif isinstance(measure, CompressedExp):
        m = compressed_exp_threshold(r, measure.alpha)
        dens = None
    else:
        raise InapplicableError(f"no closed form for {type(measure).__name__}")
    both = (Case.CLOSED_THRESHOLD, Case.OPEN_THRESHOLD)
    return LimitSpec(measure, r, Case.CLOSED_THRESHOLD, float(m), both, True, dens)


def limit_table(spec, n=512):
    """Rows (x, density, tail) on a grid covering the bulk of the limit."""
    mu = spec.measure
    lo = mu.mu_min if math.isfinite(mu.mu_min) else float(mu.quantile(1e-6))
    if spec.case is Case.POINT_MASS:
        hi = mu.mu_max
    else:
        hi = mu.mu_max if math.isfinite(mu.mu_max) else max(spec.m, float(mu.quantile(1 - 1e-6)))
    rows = []
    for x in np.linspace(lo, hi, n):
        try:
            d = float(spec.density(x))
        except InapplicableError:
            d = math.nan
        rows.append((float(x), d, limit_tail(spec, x)))
    return rows


def cdf_table(spec, n=2049):
    """Grid and CDF values of the limit, for interpolation."""
    mu = spec.measure
    if spec.case is Case.POINT_MASS:
        return np.array([mu.mu_max]), np.array([1.0])
    lo = max(mu.mu_min if math.isfinite(mu.mu_min) else float(mu.quantile(1e-9)),
             2.0 * spec.m - mu.mu_max if math.isfinite(mu.mu_max) else -math.inf)
    hi = mu.mu_max if math.isfinite(mu.mu_max) else float(mu.quantile(1 - 1e-12))
    grid = np.linspace(lo, hi, n)
    cdf = np.array([1.0 - limit_tail(spec, x) for x in grid])
    return grid, np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
