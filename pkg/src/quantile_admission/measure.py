"""Probability measures on the real line.

A :class:`MeasureSpec` exposes the closed and open tails ``mu([x, inf))`` and
``mu((x, inf))``, generalized inverses, inverse-transform samplers, and the
pair-sum tails

    F_m  = P(X + Y >= 2m),    F_m+ = P(X + Y > 2m)

for ``X, Y`` i.i.d. from the measure. Known families use closed forms; the
generic path splits the event ``X + Y >= 2m`` symmetrically,

    F_m = mu([m, inf))**2 + 2 * P(X < m, Y >= 2m - X),

and evaluates the second term by adaptive quadrature over the continuous part
plus exact summation over atoms.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, DomainError, NumericError, ZeroMassError

CLOSED = "closed"
OPEN = "open"

QUAD_ABS_TOL = 1e-10
ATOM_RESIDUAL = 1e-12
MASS_TOL = 1e-12


def _closed(mode):
    if mode in (CLOSED, True):
        return True
    if mode in (OPEN, False):
        return False
    raise ValueError(f"mode must be 'closed' or 'open', got {mode!r}")


def _scalar_or_array(out):
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


class MeasureSpec:
    """Base class for probability measures on the real line.

    Subclasses implement ``_tail``, ``_ppf`` and ``_isf`` on float arrays and
    describe their continuous part (``_pdf``, ``_cont_range``, ``_cont_breaks``)
    and atoms (``atoms``).
    """

    family = "abstract"
    mu_min = -math.inf
    mu_max = math.inf

    def __init__(self):
        self._sum_tail_cache = {}

    # -- interface implemented by families -------------------------------------------------

    def _tail(self, x, closed):
        raise NotImplementedError

    def _ppf(self, u):
        raise NotImplementedError

    def _isf(self, q):
        """inf{x : mu((x, inf)) < q} for q in (0, 1]."""
        raise NotImplementedError

    def _pdf(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def _cont_range(self):
        """(lo, hi) of the continuous part, or None for purely atomic measures."""
        return None

    def _cont_breaks(self):
        """Points where the continuous density is not smooth."""
        return np.empty(0)

    def atoms(self):
        """Atom locations and masses (truncated where the residual mass is < 1e-12)."""
        return np.empty(0), np.empty(0)

    def to_dict(self):
        raise NotImplementedError

    # -- public evaluators ------------------------------------------------------------------

    @property
    def has_atoms(self):
        return self.atoms()[0].size > 0

    @property
    def is_continuous(self):
        return not self.has_atoms

    def tail(self, x, mode=CLOSED):
        """mu([x, inf)) in closed mode, mu((x, inf)) in open mode."""
        return _scalar_or_array(self._tail(np.asarray(x, dtype=float), _closed(mode)))

    def log_tail(self, x, mode=CLOSED):
        with np.errstate(divide="ignore"):
            return _scalar_or_array(np.log(self._tail(np.asarray(x, dtype=float), _closed(mode))))

    def cdf(self, x):
        """mu((-inf, x])."""
        return _scalar_or_array(1.0 - self._tail(np.asarray(x, dtype=float), False))

    def atom_mass(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(self._tail(x, True) - self._tail(x, False))

    def pdf(self, x):
        """Density of the continuous part (zero for atomic measures)."""
        return _scalar_or_array(self._pdf(np.asarray(x, dtype=float)))

    def quantile(self, u):
        """Generalized inverse ``inf{x : mu((-inf, x]) >= u}`` for u in (0, 1)."""
        u_arr = np.asarray(u, dtype=float)
        if np.any(~((u_arr > 0) & (u_arr < 1))):
            raise DomainError("quantile level must lie strictly inside (0, 1)")
        return _scalar_or_array(self._ppf(u_arr))

    def sample(self, rng, size=None):
        """Draw i.i.d. samples by inverse transform (families may override)."""
        n = 1 if size is None else size
        u = rng.random(n)
        out = self._ppf(u)
        return float(out[0]) if size is None else out

    def sum_tail(self, m):
        """(F_m, F_m+) = (P(X + Y >= 2m), P(X + Y > 2m))."""
        m = float(m)
        hit = self._sum_tail_cache.get(m)
        if hit is not None:
            return hit
        if m < self.mu_min:
            res = (1.0, 1.0)
        else:
            res = self._sum_tail(m)
            f, fp = (min(max(v, 0.0), 1.0) for v in res)
            res = (f, min(fp, f))
        if len(self._sum_tail_cache) > 100_000:
            self._sum_tail_cache.clear()
        self._sum_tail_cache[m] = res
        return res

    def log_sum_tail(self, m, mode=CLOSED):
        f, fp = self.sum_tail(m)
        with np.errstate(divide="ignore"):
            return float(np.log(f if _closed(mode) else fp))

    # -- generic pair-sum machinery ---------------------------------------------------------

    def _sum_tail(self, m):
        t_c = float(self._tail(np.asarray(m), True))
        t_o = float(self._tail(np.asarray(m), False))
        f = t_c * t_c + 2.0 * self.weighted_mass(-math.inf, m, m, closed=True, hi_inclusive=False)
        fp = t_o * t_o + 2.0 * self.weighted_mass(-math.inf, m, m, closed=False, hi_inclusive=True)
        return f, fp

    def weighted_mass(self, lo, hi, m, closed=True, hi_inclusive=False):
        """Integral of ``mu([2m - x, inf))`` (or the open tail) against ``dmu(x)`` over x in (lo, hi).

        ``hi_inclusive`` adds an atom sitting exactly at ``hi``. The continuous part
        uses adaptive quadrature split at density kinks and at the points where the
        integrand jumps; atoms are summed exactly.
        """
        total = 0.0
        err = 0.0
        cr = self._cont_range()
        if cr is not None:
            a = max(lo, cr[0], 2.0 * m - self.mu_max)
            b = min(hi, cr[1])
            if a < b:
                locs = self.atoms()[0]
                cuts = np.concatenate(
                    [
                        self._cont_breaks(),
                        2.0 * m - locs,
                        [2.0 * m - self.mu_min, 2.0 * m - self.mu_max],
                    ]
                )
                cuts = np.unique(cuts[np.isfinite(cuts) & (cuts > a) & (cuts < b)])
                edges = np.concatenate([[a], cuts, [b]])

                def integrand(x):
                    return float(self._pdf(np.asarray(x))) * float(
                        self._tail(np.asarray(2.0 * m - x), closed)
                    )

                for p, q in zip(edges[:-1], edges[1:]):
                    val, e = integrate.quad(integrand, p, q, epsabs=1e-14, epsrel=1e-11, limit=200)
                    total += val
                    err += e
                if err > QUAD_ABS_TOL and err > 1e-8 * abs(total):
                    raise NumericError(
                        f"quadrature did not converge on ({a}, {b}) for m={m}", bound=err
                    )
        locs, masses = self.atoms()
        if locs.size:
            sel = (locs > lo) & ((locs <= hi) if hi_inclusive else (locs < hi))
            if np.any(sel):
                total += float(np.sum(masses[sel] * self._tail(2.0 * m - locs[sel], closed)))
        return total

    # -- conditional sampling helpers --------------------------------------------------------

    def _sample_partner_branch(self, m, closed, n, rng):
        """X restricted to the lower half of the event, weighted by mu([2m - x, inf)).

        Exact bounded-weight rejection from mu restricted to [2m - mu_max, m).
        """
        sup_w = float(self._tail(np.asarray(m), False))
        lower = 2.0 * m - self.mu_max
        u_lo = 0.0 if not np.isfinite(lower) else 1.0 - float(self._tail(np.asarray(lower), True))
        u_hi = 1.0 - float(self._tail(np.asarray(m), closed))
        # weighted mass of the branch relative to the proposal's mass times the weight bound
        mass = u_hi - u_lo
        if mass <= 0 or sup_w <= 0:
            raise ZeroMassError(f"no mass below m={m} compatible with the conditioning event")
        h = self.weighted_mass(-math.inf, m, m, closed=closed, hi_inclusive=not closed)
        accept = h / (mass * sup_w)
        if accept < 1e-6:
            raise NumericError(
                f"partner-branch rejection acceptance {accept:.3g} below 1e-6 at m={m}",
                bound=accept,
            )
        out = np.empty(n)
        filled = 0
        while filled < n:
            need = n - filled
            batch = max(16, int(1.2 * need / accept) + 1)
            u = u_lo + mass * (1.0 - rng.random(batch))
            x = self._ppf(np.clip(u, 0.0, 1.0))
            x = np.clip(x, lower if np.isfinite(lower) else -np.inf, m)
            w = self._tail(2.0 * m - x, closed)
            ok = rng.random(batch) * sup_w < w
            got = x[ok][:need]
            out[filled:filled + got.size] = got
            filled += got.size
        return out


# -- continuous families -------------------------------------------------------------------


class Uniform(MeasureSpec):
    family = "uniform"

    def __init__(self, a=0.0, b=1.0):
        super().__init__()
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ConfigError("uniform requires finite a < b")
        self.a, self.b = float(a), float(b)
        self.mu_min, self.mu_max = self.a, self.b
        self.width = self.b - self.a

    def __repr__(self):
        return f"Uniform(a={self.a}, b={self.b})"

    def to_dict(self):
        return {"family": self.family, "a": self.a, "b": self.b}

    def _tail(self, x, closed):
        return np.clip((self.b - x) / self.width, 0.0, 1.0)

    def log_tail(self, x, mode=CLOSED):
        with np.errstate(divide="ignore"):
            return _scalar_or_array(np.log(self._tail(np.asarray(x, dtype=float), True)))

    def _pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / self.width, 0.0)

    def _cont_range(self):
        return (self.a, self.b)

    def _cont_breaks(self):
        return np.array([self.a, self.b])

    def _ppf(self, u):
        return self.a + np.asarray(u, dtype=float) * self.width

    def _isf(self, q):
        return self.b - np.asarray(q, dtype=float) * self.width

    def _sum_tail(self, m):
        s = 2.0 * (m - self.a) / self.width
        if s <= 0:
            f = 1.0
        elif s <= 1:
            f = 1.0 - 0.5 * s * s
        elif s < 2:
            f = 0.5 * (2.0 - s) ** 2
        else:
            f = 0.0
        return f, f

    def _sample_partner_branch(self, m, closed, n, rng):
        # standardized density proportional to x - (2m - 1) on [max(0, 2m - 1), m)
        mm = (m - self.a) / self.width
        c = 2.0 * mm - 1.0
        w0 = max(0.0, -c)
        w1 = 1.0 - mm
        u = rng.random(n)
        w = np.sqrt(w0 * w0 + u * (w1 * w1 - w0 * w0))
        return self.a + self.width * (c + w)


class Exponential(MeasureSpec):
    family = "exponential"
    mu_min = 0.0

    def __init__(self, rate=1.0):
        super().__init__()
        if not rate > 0:
            raise ConfigError("exponential requires rate > 0")
        self.rate = float(rate)

    def __repr__(self):
        return f"Exponential(rate={self.rate})"

    def to_dict(self):
        return {"family": self.family, "rate": self.rate}

    def _tail(self, x, closed):
        return np.exp(-self.rate * np.maximum(x, 0.0))

    def log_tail(self, x, mode=CLOSED):
        return _scalar_or_array(-self.rate * np.maximum(np.asarray(x, dtype=float), 0.0))

    def _pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def _cont_range(self):
        return (0.0, math.inf)

    def _cont_breaks(self):
        return np.array([0.0])

    def _ppf(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    def _isf(self, q):
        return -np.log(np.asarray(q, dtype=float)) / self.rate

    def sample(self, rng, size=None):
        out = rng.exponential(1.0 / self.rate, 1 if size is None else size)
        return float(out[0]) if size is None else out

    def _sum_tail(self, m):
        s = 2.0 * self.rate * m
        f = 1.0 if s <= 0 else (1.0 + s) * math.exp(-s)
        return f, f

    def log_sum_tail(self, m, mode=CLOSED):
        s = 2.0 * self.rate * float(m)
        return 0.0 if s <= 0 else math.log1p(s) - s

    def _sample_partner_branch(self, m, closed, n, rng):
        # weight exp(-(2m - x)) exp(-x) is constant on [0, m)
        return m * rng.random(n)


class Normal(MeasureSpec):
    family = "normal"

    def __init__(self, mean=0.0, stddev=1.0):
        super().__init__()
        if not stddev > 0:
            raise ConfigError("normal requires stddev > 0")
        self.mean, self.stddev = float(mean), float(stddev)

    def __repr__(self):
        return f"Normal(mean={self.mean}, stddev={self.stddev})"

    def to_dict(self):
        return {"family": self.family, "mean": self.mean, "stddev": self.stddev}

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.stddev

    def _tail(self, x, closed):
        return special.ndtr(-self._z(x))

    def log_tail(self, x, mode=CLOSED):
        return _scalar_or_array(special.log_ndtr(-self._z(x)))

    def _pdf(self, x):
        z = self._z(x)
        return np.exp(-0.5 * z * z) / (self.stddev * math.sqrt(2.0 * math.pi))

    def _cont_range(self):
        return (-math.inf, math.inf)

    def _ppf(self, u):
        return self.mean + self.stddev * special.ndtri(np.asarray(u, dtype=float))

    def _isf(self, q):
        return self.mean - self.stddev * special.ndtri(np.asarray(q, dtype=float))

    def sample(self, rng, size=None):
        out = self.mean + self.stddev * rng.standard_normal(1 if size is None else size)
        return float(out[0]) if size is None else out

    def _sum_tail(self, m):
        # (X + Y) / 2 ~ N(mean, stddev^2 / 2)
        f = float(special.ndtr(-math.sqrt(2.0) * (m - self.mean) / self.stddev))
        return f, f

    def log_sum_tail(self, m, mode=CLOSED):
        return float(special.log_ndtr(-math.sqrt(2.0) * (float(m) - self.mean) / self.stddev))


class CompressedExp(MeasureSpec):
    """mu([x, inf)) = exp(-x**alpha) on x >= 0."""

    family = "compressed_exp"
    mu_min = 0.0

    def __init__(self, alpha=2.0):
        super().__init__()
        if not alpha > 0:
            raise ConfigError("compressed exponential requires alpha > 0")
        self.alpha = float(alpha)

    def __repr__(self):
        return f"CompressedExp(alpha={self.alpha})"

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha}

    def _tail(self, x, closed):
        return np.exp(-np.maximum(x, 0.0) ** self.alpha)

    def log_tail(self, x, mode=CLOSED):
        return _scalar_or_array(-np.maximum(np.asarray(x, dtype=float), 0.0) ** self.alpha)

    def _pdf(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.alpha * xp ** (self.alpha - 1.0) * np.exp(-(xp**self.alpha))
        return np.where(x >= 0, d, 0.0)

    def _cont_range(self):
        return (0.0, math.inf)

    def _cont_breaks(self):
        return np.array([0.0])

    def _ppf(self, u):
        return (-np.log1p(-np.asarray(u, dtype=float))) ** (1.0 / self.alpha)

    def _isf(self, q):
        return (-np.log(np.asarray(q, dtype=float))) ** (1.0 / self.alpha)

    def _sum_tail(self, m):
        if self.alpha == 1.0:
            s = 2.0 * m
            f = 1.0 if s <= 0 else (1.0 + s) * math.exp(-s)
            return f, f
        if m <= 0:
            return 1.0, 1.0
        f = math.exp(-(m**self.alpha)) ** 2 + 2.0 * self.weighted_mass(-math.inf, m, m)
        return f, f


class TabulatedContinuous(MeasureSpec):
    """Continuous measure given by its tail on a grid, log-linear between nodes.

    ``tails`` must start at 1 and be strictly decreasing. If the last value is 0
    the final segment is linear and the support ends there; otherwise the tail
    continues exponentially with the last segment's rate.
    """

    family = "tabulated"

    def __init__(self, x, tails):
        super().__init__()
        x = np.asarray(x, dtype=float)
        t = np.asarray(tails, dtype=float)
        if x.ndim != 1 or x.shape != t.shape or x.size < 2:
            raise ConfigError("tabulated measure needs two equal-length columns with >= 2 rows")
        if not np.all(np.diff(x) > 0):
            raise ConfigError("tabulated x column must be strictly increasing")
        if not np.all(np.diff(t) < 0):
            raise ConfigError("tabulated tail column must be strictly decreasing")
        if abs(t[0] - 1.0) > MASS_TOL or t[-1] < 0:
            raise ConfigError("tabulated tail must start at 1 and stay non-negative")
        t = t.copy()
        t[0] = 1.0
        self.x, self.t = x, t
        self.mu_min = float(x[0])
        self.linear_end = t[-1] == 0.0
        n_log = x.size - 1 - (1 if self.linear_end else 0)
        self._rates = np.log(t[:n_log] / t[1:n_log + 1]) / np.diff(x)[:n_log]
        self._n_log = n_log
        if self.linear_end:
            self.mu_max = float(x[-1])
        else:
            self.mu_max = math.inf
            self._rates = np.append(self._rates, self._rates[-1])

    @classmethod
    def from_csv(cls, path):
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except ValueError:
                    if rows:
                        raise ConfigError(f"malformed row in {path}: {row}") from None
                    # header line
        if not rows:
            raise ConfigError(f"no data rows in {path}")
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1])

    def __repr__(self):
        return f"TabulatedContinuous(n={self.x.size}, support=[{self.mu_min}, {self.mu_max}])"

    def to_dict(self):
        return {"family": self.family, "x": self.x.tolist(), "tail": self.t.tolist()}

    def _segment(self, x):
        return np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, self.x.size - 1)

    def _tail(self, x, closed):
        x = np.asarray(x, dtype=float)
        i = self._segment(x)
        il = np.minimum(i, self._rates.size - 1)
        out = self.t[il] * np.exp(-self._rates[il] * (x - self.x[il]))
        if self.linear_end:
            j = self.x.size - 2
            lin = self.t[j] * (self.x[-1] - x) / (self.x[-1] - self.x[j])
            out = np.where(i >= j, lin, out)
            out = np.where(x >= self.x[-1], 0.0, out)
        return np.where(x <= self.x[0], 1.0, np.clip(out, 0.0, 1.0))

    def _pdf(self, x):
        x = np.asarray(x, dtype=float)
        i = self._segment(x)
        il = np.minimum(i, self._rates.size - 1)
        dens = self._rates[il] * self.t[il] * np.exp(-self._rates[il] * (x - self.x[il]))
        if self.linear_end:
            j = self.x.size - 2
            dens = np.where(i == j, self.t[j] / (self.x[-1] - self.x[j]), dens)
            dens = np.where(x >= self.x[-1], 0.0, dens)
        return np.where(x < self.x[0], 0.0, dens)

    def _cont_range(self):
        return (self.mu_min, self.mu_max)

    def _cont_breaks(self):
        return self.x.copy()

    def _isf(self, q):
        q = np.clip(np.asarray(q, dtype=float), 0.0, 1.0)
        # segment i with t[i+1] < q <= t[i]; t is decreasing
        i = np.clip(np.searchsorted(-self.t, -q, side="left") - 1, 0, self.x.size - 1)
        il = np.minimum(i, self._rates.size - 1)
        with np.errstate(divide="ignore"):
            out = self.x[il] + np.log(self.t[il] / q) / self._rates[il]
        if self.linear_end:
            j = self.x.size - 2
            lin = self.x[-1] - q * (self.x[-1] - self.x[j]) / self.t[j]
            out = np.where(i >= j, lin, out)
        return np.where(q >= 1.0, self.x[0], out)

    def _ppf(self, u):
        return self._isf(1.0 - np.asarray(u, dtype=float))


# -- atomic families -----------------------------------------------------------------------


class GeometricAtomic(MeasureSpec):
    """Atoms at 1 - 2**-l with masses (1 - p) p**l, l >= 0."""

    family = "geometric_atomic"
    mu_min = 0.0
    mu_max = 1.0

    def __init__(self, p=0.5):
        super().__init__()
        if not 0 < p < 1:
            raise ConfigError("geometric atomic measure requires p in (0, 1)")
        self.p = float(p)
        n = int(math.ceil(math.log(ATOM_RESIDUAL) / math.log(self.p)))
        self._n_atoms = min(n, 54)
        ell = np.arange(self._n_atoms)
        self._locs = 1.0 - np.ldexp(1.0, -ell)
        self._masses = (1.0 - self.p) * self.p**ell

    def __repr__(self):
        return f"GeometricAtomic(p={self.p})"

    def to_dict(self):
        return {"family": self.family, "p": self.p}

    @staticmethod
    def atom(ell):
        return 1.0 - math.ldexp(1.0, -int(ell))

    def _index_at_or_above(self, x):
        """Smallest l with 1 - 2**-l >= x (x < 1)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            ell = np.ceil(-np.log2(1.0 - x))
        ell = np.clip(np.nan_to_num(ell, nan=0.0, posinf=60.0), 0, 60)
        # correct rounding in log2
        down = (ell > 0) & (1.0 - np.ldexp(1.0, -(ell - 1).astype(int)) >= x)
        ell = np.where(down, ell - 1, ell)
        up = 1.0 - np.ldexp(1.0, -ell.astype(int)) < x
        return np.where(up, ell + 1, ell)

    def _tail(self, x, closed):
        x = np.asarray(x, dtype=float)
        xs = np.where(x < 1.0, x, 0.5)
        ell = self._index_at_or_above(xs)
        if not closed:
            at_atom = 1.0 - np.ldexp(1.0, -ell.astype(int)) == xs
            ell = np.where(at_atom, ell + 1, ell)
        out = self.p**ell
        out = np.where(x <= 0.0, 1.0, out)
        if not closed:
            out = np.where(x == 0.0, self.p, out)
        return np.where(x >= 1.0, 0.0, out)

    def atoms(self):
        return self._locs, self._masses

    def _ppf(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            ell = np.ceil(np.log1p(-u) / math.log(self.p)) - 1
        ell = np.clip(np.nan_to_num(ell, posinf=60.0, neginf=0.0), 0, 60)
        # cumulative mass through atom l is 1 - p**(l+1)
        down = (ell > 0) & (1.0 - self.p**ell >= u)
        ell = np.where(down, ell - 1, ell)
        up = 1.0 - self.p ** (ell + 1) < u
        ell = np.where(up, ell + 1, ell)
        return 1.0 - np.ldexp(1.0, -ell.astype(int))

    def _isf(self, q):
        q = np.asarray(q, dtype=float)
        with np.errstate(divide="ignore"):
            ell = np.floor(np.log(q) / math.log(self.p))
        ell = np.clip(np.nan_to_num(ell, posinf=60.0), 0, 60)
        # open tail at atom l is p**(l+1); need the smallest l with p**(l+1) < q
        down = (ell > 0) & (self.p**ell < q)
        ell = np.where(down, ell - 1, ell)
        up = self.p ** (ell + 1) >= q
        ell = np.where(up, ell + 1, ell)
        return 1.0 - np.ldexp(1.0, -ell.astype(int))

    def sample(self, rng, size=None):
        ell = rng.geometric(1.0 - self.p, 1 if size is None else size) - 1
        out = 1.0 - np.ldexp(1.0, -np.minimum(ell, 60))
        return float(out[0]) if size is None else out


class AtomList(MeasureSpec):
    family = "atoms"

    def __init__(self, locations, masses):
        super().__init__()
        locs = np.asarray(locations, dtype=float)
        w = np.asarray(masses, dtype=float)
        if locs.ndim != 1 or locs.shape != w.shape or locs.size == 0:
            raise ConfigError("atom list needs equal-length location and mass lists")
        if np.any(w < 0) or abs(w.sum() - 1.0) > MASS_TOL:
            raise ConfigError(f"atom masses must be non-negative and sum to 1 (got {w.sum()!r})")
        keep = w > 0
        locs, w = locs[keep], w[keep]
        order = np.argsort(locs, kind="stable")
        locs, w = locs[order], w[order]
        uniq, inv = np.unique(locs, return_inverse=True)
        self._locs = uniq
        self._masses = np.bincount(inv, weights=w) / w.sum()
        # mass strictly above each atom, accumulated from the right
        self._above = np.concatenate([np.cumsum(self._masses[::-1])[::-1][1:], [0.0]])
        self._cum = np.cumsum(self._masses)
        self._cum[-1] = 1.0
        self.mu_min, self.mu_max = float(uniq[0]), float(uniq[-1])

    def __repr__(self):
        return f"AtomList(n={self._locs.size})"

    def to_dict(self):
        return {"family": self.family, "locations": self._locs.tolist(), "masses": self._masses.tolist()}

    def atoms(self):
        return self._locs, self._masses

    def _tail(self, x, closed):
        x = np.asarray(x, dtype=float)
        side = "left" if closed else "right"
        i = np.searchsorted(self._locs, x, side=side)
        full = np.concatenate([[1.0], self._above])
        # full[i] is the mass of atoms with index >= i
        return full[i]

    def _ppf(self, u):
        i = np.searchsorted(self._cum, np.asarray(u, dtype=float), side="left")
        return self._locs[np.clip(i, 0, self._locs.size - 1)]

    def _isf(self, q):
        i = np.searchsorted(-self._above, -np.asarray(q, dtype=float), side="right")
        return self._locs[np.clip(i, 0, self._locs.size - 1)]


# -- mixtures ------------------------------------------------------------------------------


class Mixture(MeasureSpec):
    family = "mixture"

    def __init__(self, components):
        super().__init__()
        comps = [(float(w), c) for w, c in components]
        if not comps:
            raise ConfigError("mixture needs at least one component")
        weights = np.array([w for w, _ in comps])
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > MASS_TOL:
            raise ConfigError("mixture weights must be non-negative and sum to 1")
        self.weights = weights / weights.sum()
        self.components = [c for _, c in comps]
        self.mu_min = min(c.mu_min for c in self.components)
        self.mu_max = max(c.mu_max for c in self.components)
        locs, masses = [], []
        for w, c in zip(self.weights, self.components):
            cl, cm = c.atoms()
            locs.append(cl)
            masses.append(w * cm)
        locs = np.concatenate(locs) if locs else np.empty(0)
        masses = np.concatenate(masses) if masses else np.empty(0)
        if locs.size:
            uniq, inv = np.unique(locs, return_inverse=True)
            self._locs, self._masses = uniq, np.bincount(inv, weights=masses)
        else:
            self._locs, self._masses = locs, masses

    def __repr__(self):
        inner = ", ".join(f"{w:g}*{c!r}" for w, c in zip(self.weights, self.components))
        return f"Mixture({inner})"

    def to_dict(self):
        return {
            "family": self.family,
            "components": [
                {"weight": float(w), "measure": c.to_dict()} for w, c in zip(self.weights, self.components)
            ],
        }

    def atoms(self):
        return self._locs, self._masses

    def _tail(self, x, closed):
        x = np.asarray(x, dtype=float)
        return sum(w * c._tail(x, closed) for w, c in zip(self.weights, self.components))

    def _pdf(self, x):
        x = np.asarray(x, dtype=float)
        return sum(w * c._pdf(x) for w, c in zip(self.weights, self.components))

    def _cont_range(self):
        ranges = [c._cont_range() for c in self.components]
        ranges = [r for r in ranges if r is not None]
        if not ranges:
            return None
        return (min(r[0] for r in ranges), max(r[1] for r in ranges))

    def _cont_breaks(self):
        parts = [c._cont_breaks() for c in self.components]
        for c in self.components:
            cr = c._cont_range()
            if cr is not None:
                parts.append(np.array(cr))
        out = np.concatenate(parts) if parts else np.empty(0)
        return np.unique(out[np.isfinite(out)])

    def _bisect(self, target, pred, lo, hi):
        lo = np.array(lo, dtype=float)
        hi = np.array(hi, dtype=float)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            ok = pred(mid, target)
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
            if np.all((hi - lo) <= 4 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))):
                break
        return hi

    def _ppf(self, u):
        u = np.asarray(u, dtype=float)
        qs = np.array([c._ppf(u) for c in self.components])
        lo = qs.min(axis=0)
        hi = qs.max(axis=0)
        return np.where(
            lo == hi, lo, self._bisect(u, lambda x, t: 1.0 - self._tail(x, False) >= t, lo - 1e-300, hi)
        )

    def _isf(self, q):
        q = np.asarray(q, dtype=float)
        qs = np.array([c._isf(q) for c in self.components])
        lo = qs.min(axis=0)
        hi = qs.max(axis=0)
        return np.where(lo == hi, lo, self._bisect(q, lambda x, t: self._tail(x, False) < t, lo, hi))

    def sample(self, rng, size=None):
        n = 1 if size is None else size
        which = np.searchsorted(np.cumsum(self.weights)[:-1], rng.random(n), side="right")
        out = np.empty(n)
        for i, c in enumerate(self.components):
            sel = which == i
            cnt = int(sel.sum())
            if cnt:
                out[sel] = c.sample(rng, cnt)
        return float(out[0]) if size is None else out


# -- module-level operations ---------------------------------------------------------------


@dataclass(frozen=True)
class PairSumTail:
    """Closed and open tails of the pair average, m -> (F_m, F_m+)."""

    measure: MeasureSpec

    @property
    def method(self):
        if type(self.measure)._sum_tail is not MeasureSpec._sum_tail and not (
            isinstance(self.measure, CompressedExp) and self.measure.alpha != 1.0
        ):
            return "closed-form"
        if self.measure._cont_range() is None:
            return "atom-enumeration"
        return "quadrature"

    def closed(self, m):
        return self.measure.sum_tail(m)[0]

    def open(self, m):
        return self.measure.sum_tail(m)[1]

    def __call__(self, m):
        return self.measure.sum_tail(m)


def tail(measure, x, mode=CLOSED):
    """mu([x, inf)) (closed) or mu((x, inf)) (open)."""
    return measure.tail(x, mode)


def quantile(measure, u):
    return measure.quantile(u)


def sample(measure, rng, size=None):
    return measure.sample(rng, size)


def sum_tail(measure, m):
    """(F_m, F_m+) for the pair average of two i.i.d. draws."""
    return measure.sum_tail(m)


def conditional_pair_sampler(measure, m, mode=CLOSED, rng=None, size=None, strategy="exact"):
    """Draw (X, Y) i.i.d. from ``measure`` conditioned on X + Y >= 2m (closed) or > 2m (open).

    ``strategy="rejection"`` filters unconditioned pairs. ``strategy="exact"``
    splits the event into {X >= m, Y >= m} and the two mirror-image halves
    {X < m, Y >= 2m - X}; both upper draws come from the inverse tail, and the
    lower partner X is drawn from its reweighted marginal (closed form for
    uniform and exponential families, bounded-weight rejection otherwise).
    Returns a pair of floats, or a pair of arrays when ``size`` is given.
    """
    if rng is None:
        raise ValueError("an explicit random generator is required")
    closed = _closed(mode)
    m = float(m)
    n = 1 if size is None else int(size)
    f, fp = measure.sum_tail(m)
    mass = f if closed else fp
    if mass <= 0:
        raise ZeroMassError(f"conditioning event has zero probability at m={m}")
    if strategy == "rejection":
        x, y = _rejection_pairs(measure, m, closed, n, rng, mass)
    elif strategy == "exact":
        x, y = _exact_pairs(measure, m, closed, n, rng, mass)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if size is None:
        return float(x[0]), float(y[0])
    return x, y


def _rejection_pairs(measure, m, closed, n, rng, mass):
    if mass < 1e-6:
        raise NumericError(
            f"rejection sampling acceptance {mass:.3g} below 1e-6 at m={m}; use strategy='exact'",
            bound=mass,
        )
    xs, ys = [], []
    got = 0
    while got < n:
        batch = max(64, int(1.1 * (n - got) / mass) + 16)
        x = measure.sample(rng, batch)
        y = measure.sample(rng, batch)
        s = x + y
        ok = s >= 2.0 * m if closed else s > 2.0 * m
        xs.append(x[ok])
        ys.append(y[ok])
        got += int(ok.sum())
    return np.concatenate(xs)[:n], np.concatenate(ys)[:n]


def _upper_draw(measure, threshold, closed, n, rng):
    t = float(measure._tail(np.asarray(threshold), closed))
    q = (1.0 - rng.random(n)) * t
    out = measure._isf(q)
    return np.maximum(out, threshold)


def _exact_pairs(measure, m, closed, n, rng, mass):
    t = float(measure._tail(np.asarray(m), closed))
    p_both = min(1.0, t * t / mass)
    branch = rng.random(n) >= p_both
    x = np.empty(n)
    y = np.empty(n)
    nb = n - int(branch.sum())
    if nb:
        x[~branch] = _upper_draw(measure, m, closed, nb, rng)
        y[~branch] = _upper_draw(measure, m, closed, nb, rng)
    n1 = int(branch.sum())
    if n1:
        lo = measure._sample_partner_branch(m, closed, n1, rng)
        c = 2.0 * m - lo
        tails = measure._tail(c, closed)
        hi = measure._isf((1.0 - rng.random(n1)) * tails)
        hi = np.maximum(hi, c) if closed else np.where(hi > c, hi, np.nextafter(c, np.inf))
        swap = rng.random(n1) < 0.5
        x[branch] = np.where(swap, hi, lo)
        y[branch] = np.where(swap, lo, hi)
    return x, y
