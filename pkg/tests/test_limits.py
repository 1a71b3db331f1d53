import math

import numpy as np
import pytest
from scipy import integrate, special

from quantile_admission import limits
from quantile_admission import measure as msr
from quantile_admission.errors import DomainError, InapplicableError, NonDeterministicError
from quantile_admission.limits import Case
from quantile_admission.measure import CLOSED
from quantile_admission.streams import make_rng

G = msr.GeometricAtomic(0.5)
U_QUARTER = 0.15505102572168222  # (1 - sqrt(1 - 3r + 2r^2)) / (3 - 2r) at r = 1/4


def direct_limit_tail(mu, m, s):
    """P(X > s, Y > s, X + Y >= 2m) / F_m by two-dimensional quadrature."""
    lo, hi = mu._cont_range()
    hi = min(hi, 60.0)

    def inner(x):
        c = max(s, 2 * m - x)
        return mu.tail(c, CLOSED) * mu.pdf(x)

    pts = [p for p in (m, 2 * m - s) if lo < p < hi]
    num = integrate.quad(inner, max(lo, s), hi, points=pts or None, epsabs=1e-13, limit=200)[0]
    return num / mu.sum_tail(m)[0]


# -- classify ------------------------------------------------------------------------------


def test_classify_uniform_three_quarters():
    cls = limits.classify(msr.Uniform(), 0.75)
    assert [s.case for s in cls] == [Case.POINT_MASS]
    assert cls[0].m == 1.0 and cls.deterministic


def test_classify_uniform_half_continuum():
    cls = limits.classify(msr.Uniform(), 0.5)
    assert not cls.deterministic
    (a, b), = cls.continuum
    assert abs(a - 0.5) < 1e-3 and b >= 1 - 1e-9


def test_classify_geometric_one_spec_per_atom():
    cls = limits.classify(G, 0.6)
    assert not cls.deterministic
    locs = G.atoms()[0]
    ms = sorted(s.m for s in cls if s.case is Case.CLOSED_THRESHOLD)
    assert len(ms) == locs.size
    np.testing.assert_allclose(ms, locs, atol=1e-12)
    assert cls.rho1_monotone.verdict == "not-monotone"


@pytest.mark.parametrize(
    "mu, r",
    [(msr.Uniform(), 0.1), (msr.Uniform(), 0.25), (msr.Uniform(), 0.4), (msr.Uniform(), 0.8),
     (msr.Exponential(1.0), 0.2), (msr.Exponential(2.0), 0.5), (msr.Exponential(1.0), 0.9),
     (msr.Normal(), 0.3), (msr.Normal(), 0.5), (msr.Normal(1.0, 2.0), 0.75),
     (msr.CompressedExp(1.5), 0.3), (msr.CompressedExp(2.0), 0.5)],
)
def test_classify_closed_form_round_trip(mu, r):
    cls = limits.classify(mu, r)
    cf = limits.closed_form(mu, r)
    assert cls.deterministic
    assert cls[0].case is cf.case
    assert cls[0].m == pytest.approx(cf.m, abs=1e-8)


@pytest.mark.parametrize("mu", [msr.Normal(), msr.Exponential(1.0), msr.CompressedExp(1.5)])
def test_monotone_implies_singleton(mu):
    cls = limits.classify(mu, 0.5)
    assert cls.rho1_monotone.strictly_decreasing
    for r in (0.1, 0.3, 0.5, 0.7, 0.9):
        assert limits.classify(mu, r).deterministic


def test_classification_report():
    text = limits.classify(G, 0.6).report()
    assert "non-deterministic" in text and "case I" in text and "witness" in text


# -- closed forms --------------------------------------------------------------------------


def test_closed_form_examples():
    assert limits.closed_form(msr.Exponential(1.0), 0.5).m == pytest.approx(0.5, abs=1e-15)
    assert limits.closed_form(msr.Uniform(), 0.25).m == pytest.approx(U_QUARTER, abs=1e-12)
    assert limits.closed_form(msr.Normal(), 0.5).m == pytest.approx(0.0, abs=1e-12)


def test_closed_form_normal_stated_equation():
    # threshold solving mu((m, inf)) = 1 - r
    assert limits.closed_form(msr.Normal(), 0.75).m == pytest.approx(float(special.ndtri(0.75)), abs=1e-6)


def test_closed_form_normal_solves_drift_equation():
    m = limits.closed_form(msr.Normal(), 0.75).m
    q = special.ndtr(-m)
    assert q * q / special.ndtr(-math.sqrt(2) * m) == pytest.approx(0.25, abs=1e-12)
    assert m == pytest.approx(1.6435561, abs=1e-6)


def test_closed_form_uniform_half_is_random():
    with pytest.raises(NonDeterministicError):
        limits.closed_form(msr.Uniform(), 0.5)


def test_closed_form_uniform_high_r_point_mass():
    spec = limits.closed_form(msr.Uniform(), 0.6)
    assert spec.case is Case.POINT_MASS and spec.m == 1.0


def test_closed_form_inapplicable():
    with pytest.raises(InapplicableError):
        limits.closed_form(G, 0.5)


def test_compressed_exp_threshold_scale():
    # threshold grows like 1/(1 - r)
    ms = [limits.compressed_exp_threshold(r, 2.0) for r in (0.9, 0.99)]
    assert 0.2 < ms[0] * 0.1 < 2 and ms[1] > ms[0]


def test_compressed_exp_alpha_one_is_exponential():
    for r in (0.2, 0.5, 0.8):
        assert limits.compressed_exp_threshold(r, 1.0) == pytest.approx(r / (2 * (1 - r)), abs=1e-10)


# -- limit tail ----------------------------------------------------------------------------


def test_limit_tail_trivial_ends():
    spec = limits.closed_form(msr.Uniform(), 0.25)
    assert limits.limit_tail(spec, 1.0) == 0.0
    assert limits.limit_tail(spec, 2.0) == 0.0
    assert limits.limit_tail(spec, -0.5) == pytest.approx(1.0, abs=1e-12)


def test_limit_tail_exponential_example():
    spec = limits.closed_form(msr.Exponential(1.0), 0.5)
    want = math.exp(-3.0) / 2.0  # integral of exp(-2(x - 1/2)) from 2, over m + 1/2
    assert limits.limit_tail(spec, 2.0) == pytest.approx(want, rel=1e-10)
    assert limits.limit_tail(spec, 2.0) == pytest.approx(0.024894, abs=1e-6)


@pytest.mark.slow
def test_limit_tail_exponential_monte_carlo():
    spec = limits.closed_form(msr.Exponential(1.0), 0.5)
    x, y = msr.conditional_pair_sampler(msr.Exponential(1.0), 0.5, CLOSED, make_rng(77), 10**7)
    p = np.mean(np.minimum(x, y) > 2.0)
    se = math.sqrt(p * (1 - p) / 1e7)
    assert abs(p - limits.limit_tail(spec, 2.0)) <= 3 * se


@pytest.mark.parametrize(
    "mu, r", [(msr.Uniform(), 0.25), (msr.Exponential(1.0), 0.5), (msr.Normal(), 0.5),
              (msr.CompressedExp(2.0), 0.4)],
)
def test_normalization_and_tail_consistency(mu, r):
    spec = limits.classify(mu, r)[0]
    lo, hi = mu._cont_range()
    lo = max(lo, -12.0)
    hi = min(hi, 40.0)
    pts = [spec.m]
    total = integrate.quad(lambda t: float(spec.density(t)), lo, hi, points=pts, limit=400,
                           epsabs=1e-12)[0]
    assert total == pytest.approx(1.0, abs=1e-6)
    for s in np.linspace(max(lo, float(mu.quantile(0.01))), float(mu.quantile(0.99)), 16):
        by_density = integrate.quad(lambda t: float(spec.density(t)), s, hi,
                                    points=[p for p in pts if s < p < hi] or None,
                                    limit=400, epsabs=1e-12)[0]
        assert limits.limit_tail(spec, s) == pytest.approx(by_density, abs=1e-6)
        assert limits.limit_tail(spec, s) == pytest.approx(direct_limit_tail(mu, spec.m, s), abs=1e-6)


def test_limit_tail_monotone_geometric():
    spec = limits.classify(G, 0.6)[1]
    grid = np.linspace(-0.1, 1.1, 300)
    vals = [limits.limit_tail(spec, s) for s in grid]
    assert vals[0] == pytest.approx(1.0) and vals[-1] == 0.0
    assert np.all(np.diff(vals) <= 1e-15)


def test_point_mass_spec():
    spec = limits.closed_form(msr.Uniform(), 0.75)
    assert limits.limit_tail(spec, 0.999) == 1.0 and limits.limit_tail(spec, 1.0) == 0.0
    with pytest.raises(InapplicableError):
        spec.density(0.5)
    assert np.all(spec.sample(make_rng(0), 5) == 1.0)


def test_spec_sample_matches_tail():
    spec = limits.closed_form(msr.Exponential(1.0), 0.5)
    v = spec.sample(make_rng(3), 10**5)
    for s in (0.2, 0.5, 1.0, 1.5):
        p = np.mean(v > s)
        assert abs(p - spec.tail(s)) <= 3 * math.sqrt(p * (1 - p) / 1e5) + 1e-4


# -- density -------------------------------------------------------------------------------


def test_uniform_density_shape():
    m = U_QUARTER
    u = msr.Uniform()
    assert limits.limit_density(u, m, m) == pytest.approx(1 - m, abs=1e-14)
    for x in np.linspace(2 * m - 1 + 1e-3, m, 7):
        if x >= 0:
            assert limits.limit_density(u, m, x) == pytest.approx(x - (2 * m - 1), abs=1e-14)
    for x in np.linspace(m, 1, 7):
        assert limits.limit_density(u, m, x) == pytest.approx(1 - x, abs=1e-14)
    assert limits.limit_density(u, m, 1.0) == 0.0 and limits.limit_density(u, m, 1.5) == 0.0


def test_normal_density_weight():
    m = 0.3
    for x in (-1.0, 0.0, 0.3, 0.9, 2.0):
        want = math.exp(-x * x / 2) / math.sqrt(2 * math.pi) * special.ndtr(-max(x, 2 * m - x))
        assert limits.limit_density(msr.Normal(), m, x) == pytest.approx(want, rel=1e-12)


def test_density_closed_form_matches_generic():
    for mu, r in ((msr.Uniform(), 0.25), (msr.Exponential(1.0), 0.5)):
        spec = limits.closed_form(mu, r)
        xs = np.linspace(0.01, 0.99, 23)
        generic = limits.limit_density(mu, spec.m, xs) / (0.5 * spec.normalizer)
        np.testing.assert_allclose(spec.density(xs), generic, atol=1e-12)


def test_normalize_is_half_pair_tail():
    for mu, m in ((msr.Uniform(), 0.3), (msr.Exponential(1.0), 0.8), (msr.Normal(), -0.4)):
        assert limits.normalize(mu, m) == pytest.approx(0.5 * mu.sum_tail(m)[0], abs=1e-9)


def test_density_atomic_inapplicable():
    with pytest.raises(InapplicableError):
        limits.limit_density(G, 0.5, 0.5)


# -- tail exponent -------------------------------------------------------------------------


def test_tail_exponent_exponential():
    spec = limits.closed_form(msr.Exponential(1.0), 0.5)
    a = limits.tail_exponent(spec, 20.0)
    b = limits.tail_exponent(spec, 100.0)
    assert 1.85 <= a <= 2.0 and 1.85 <= b <= 2.0
    assert abs(2 - b) < abs(2 - a)


def test_tail_exponent_normal():
    spec = limits.classify(msr.Normal(), 0.5)[0]
    assert 1.7 <= limits.tail_exponent(spec, 6.0) <= 2.0


def test_tail_exponent_deep_tail_log_space():
    spec = limits.closed_form(msr.Exponential(1.0), 0.5)
    v = limits.tail_exponent(spec, 1000.0)
    assert 1.99 < v < 2.0


def test_tail_exponent_domain():
    with pytest.raises(DomainError):
        limits.tail_exponent(limits.closed_form(msr.Uniform(), 0.25), 0.5)
    with pytest.raises(DomainError):
        limits.tail_exponent(limits.closed_form(msr.Exponential(1.0), 0.5), 0.1)


# -- tables --------------------------------------------------------------------------------


def test_limit_and_cdf_tables():
    spec = limits.closed_form(msr.Exponential(1.0), 0.5)
    rows = limits.limit_table(spec, 64)
    assert len(rows) == 64 and rows[0][2] == pytest.approx(1.0)
    grid, cdf = limits.cdf_table(spec, 257)
    assert np.all(np.diff(cdf) >= 0) and cdf[-1] == pytest.approx(1.0, abs=1e-9)
