"""Desk-scale acceptance checks for the whole library.

Each check returns a :class:`CriterionResult`. Long chains use the threshold
engine where rejections are cheap and the conditional engine where the
acceptance probability collapses (uniform near its top, long ensembles).
"""

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import drift, measure as msr
from .config import ExperimentConfig
from .errors import IntegrityError
from .harness import (
    detect_nonuniqueness,
    estimate_limit_quantile,
    ks_distance,
    last_window,
    mass_below_threshold,
    run_ensemble,
)
from .limits import classify, closed_form, tail_exponent
from .process import (
    empirical_quantile,
    empirical_quantile_bruteforce,
    one_step_walk_increments,
    psi_diagnostics,
    run_chain,
)
from .streams import make_rng

SEED = 20240601
LONG_CHAIN = 10**6


@dataclass(frozen=True)
class CriterionResult:
    id: int
    passed: bool
    detail: str
    elapsed: float = 0.0

    def line(self):
        return f"criterion {self.id:2d}: {'PASS' if self.passed else 'FAIL'}  {self.detail}  [{self.elapsed:.1f}s]"


def families():
    """The catalog used by the per-family checks."""
    return {
        "uniform": msr.Uniform(0.0, 1.0),
        "exponential": msr.Exponential(1.0),
        "normal": msr.Normal(0.0, 1.0),
        "compressed_exp": msr.CompressedExp(2.0),
        "geometric_atomic": msr.GeometricAtomic(0.5),
    }


def uniform_radical(r):
    return (1.0 - math.sqrt(1.0 - 3.0 * r + 2.0 * r * r)) / (3.0 - 2.0 * r)


def exponential_piecewise_cdf(m, rate=1.0):
    """CDF of the density proportional to 1 below m and exp(-2 rate (x - m)) above."""
    z = rate * m + 0.5

    def cdf(x):
        x = np.asarray(x, dtype=float)
        below = rate * np.clip(x, 0.0, None) / z
        above = (rate * m + 0.5 * (1.0 - np.exp(-2.0 * rate * (x - m)))) / z
        return np.where(x <= m, below, above)

    return cdf


def criterion_1():
    r = 0.25
    oracle = uniform_radical(r)
    m = closed_form(msr.Uniform(), r).m
    t0 = time.perf_counter()
    tr = run_chain(msr.Uniform(), r, LONG_CHAIN, "threshold", seed=SEED, stream=1)
    chain_s = time.perf_counter() - t0
    m_hat, _ = estimate_limit_quantile(tr)
    ok = abs(m - oracle) <= 1e-10 and abs(m_hat - oracle) <= 0.01 and chain_s <= 60
    return ok, f"closed={m:.10f} radical={oracle:.10f} m_hat={m_hat:.5f} chain={chain_s:.1f}s"


def criterion_2():
    tr = run_chain(msr.Uniform(), 0.75, LONG_CHAIN, "conditional", seed=SEED, stream=2)
    m_hat, _ = estimate_limit_quantile(tr)
    below = mass_below_threshold(last_window(tr), 1.0, eps=0.01)
    return m_hat >= 0.9 and below <= 0.2, f"m_hat={m_hat:.5f} mass_below_0.99={below:.4f}"


def criterion_3():
    r = 0.5
    target = r / (2 * (1 - r))
    tr = run_chain(msr.Exponential(1.0), r, LONG_CHAIN, "threshold", seed=SEED, stream=3)
    m_hat, _ = estimate_limit_quantile(tr)
    ks = ks_distance(last_window(tr), exponential_piecewise_cdf(target))
    return abs(m_hat - target) <= 0.01 and ks <= 0.01, f"m_hat={m_hat:.5f} ks={ks:.5f}"


def criterion_4():
    ok = True
    parts = []
    for i, r in enumerate((0.5, 0.75)):
        q = float(special.ndtri(r))
        cls = classify(msr.Normal(), r)
        m = cls.specs[0].m if cls.specs else math.nan
        single = cls.deterministic
        tr = run_chain(msr.Normal(), r, LONG_CHAIN, "threshold", seed=SEED, stream=40 + i)
        m_hat, _ = estimate_limit_quantile(tr)
        good = single and abs(m - q) <= 1e-6 and abs(m_hat - q) <= 0.02
        ok &= good
        parts.append(f"r={r}: quantile={q:.6f} classify={m:.6f} m_hat={m_hat:.5f} {'ok' if good else 'MISMATCH'}")
    return ok, "; ".join(parts)


def criterion_5():
    mu = msr.GeometricAtomic(0.5)
    cfg = ExperimentConfig(mu, 0.6, 10**5, n_replicas=200, seed=SEED + 5,
                           engine="conditional", gap=0.05)
    summary = run_ensemble(cfg)
    verdict = detect_nonuniqueness(summary, gap=0.05)
    atoms = mu.atoms()[0]
    good = [c for c in verdict.clusters
            if np.min(np.abs(atoms - c.center)) <= 0.01 and c.frequency >= 0.02]
    ok = verdict.verdict == "multiple" and len(good) >= 3 and not summary.failed
    desc = ", ".join(f"{c.center:.4f}({c.frequency:.3f})" for c in verdict.clusters)
    return ok, f"verdict={verdict.verdict} atom_clusters={len(good)} clusters=[{desc}]"


def criterion_6():
    cfg = ExperimentConfig(msr.Uniform(), 0.5, LONG_CHAIN, n_replicas=100, seed=SEED + 6,
                           engine="conditional", gap=0.05)
    summary = run_ensemble(cfg, predict=False)
    v = summary.m_hat_values()
    bins = np.histogram(v, bins=5, range=(0.5, 1.0))[0]
    hit = int(np.count_nonzero(bins))
    return hit >= 3 and not summary.failed, f"fifths hit={hit} counts={bins.tolist()}"


def criterion_7():
    spec = closed_form(msr.Exponential(1.0), 0.5)
    a, b = tail_exponent(spec, 20.0), tail_exponent(spec, 100.0)
    ok = 1.8 <= a <= 2.0 and 1.8 <= b <= 2.0 and b > a
    return ok, f"s=20: {a:.5f} s=100: {b:.5f}"


def probe_states():
    return {
        "uniform": np.linspace(0.05, 0.8, 8),
        "exponential": np.linspace(0.1, 3.0, 8),
        "normal": np.linspace(-1.5, 1.5, 8),
        "compressed_exp": np.linspace(0.1, 1.5, 8),
        "geometric_atomic": [msr.GeometricAtomic.atom(i) for i in range(8)],
    }


def criterion_8(r=0.3, n=10**5):
    worst = 0.0
    fails = 0
    probes = probe_states()
    for s, (name, mu) in enumerate(families().items()):
        rng = make_rng(SEED + 8, s)
        for m in probes[name]:
            inc = one_step_walk_increments(mu, float(m), r, n, rng)
            se = inc.std(ddof=1) / math.sqrt(n)
            z = abs(inc.mean() - drift.rho(mu, r, float(m))) / se
            worst = max(worst, z)
            fails += z > 3
    return fails == 0, f"40 probes, worst |z|={worst:.2f}, beyond 3 SE: {fails}"


def criterion_9(n=10**4, r=1 / 3):
    mismatches = 0
    fams = families()
    names = ("uniform", "exponential", "normal", "geometric_atomic")
    for name in names:
        for seed in range(8):
            a = run_chain(fams[name], r, n, "voting", seed=SEED + seed, stream=9)
            b = run_chain(fams[name], r, n, "threshold", seed=SEED + seed, stream=9)
            same = (np.array_equal(a.x, b.x) and np.array_equal(a.m, b.m)
                    and np.array_equal(a.t, b.t))
            mismatches += not same
    return mismatches == 0, f"{len(names) * 8} trace pairs, mismatches: {mismatches}"


def criterion_10(n=10**3, r=0.4):
    violations = 0
    checked = 0
    for s, mu in enumerate(families().values()):
        tr = run_chain(mu, r, n, "threshold", seed=SEED + 10, stream=s)
        probes = np.concatenate([
            mu.quantile(np.linspace(0.05, 0.95, 8)),
            np.random.default_rng(s).choice(tr.x, 8, replace=False),
        ])
        try:
            checked += len(psi_diagnostics(tr, probes))
        except IntegrityError:
            violations += 1
    return violations == 0, f"{checked} (step, probe) pairs checked, violating traces: {violations}"


def criterion_11(rs=(0.1, 0.3, 0.5, 0.7, 0.9)):
    ok = True
    parts = []
    for alpha in (1.0, 1.5, 2.0):
        mu = msr.CompressedExp(alpha)
        conv = drift.convexity_criterion(mu).status
        mono = drift.is_monotone_rho1(mu).strictly_decreasing
        singles = sum(classify(mu, r).deterministic for r in rs)
        good = conv == "satisfied" and mono and singles == len(rs)
        ok &= good
        parts.append(f"alpha={alpha}: {conv}/{'decreasing' if mono else 'not'}/{singles} singletons")
    return ok, "; ".join(parts)


def criterion_12(n_sets=1000, n_mc=10**5):
    rng = np.random.default_rng(SEED + 12)
    q_bad = 0
    for _ in range(n_sets):
        k = int(rng.integers(1, 60))
        vals = rng.integers(0, 10, k).astype(float) if rng.random() < 0.5 else rng.normal(size=k)
        r = float(rng.uniform(0.01, 0.99))
        q_bad += empirical_quantile(vals, r) != empirical_quantile_bruteforce(vals, r)
    points = {
        "uniform": (0.1, 0.3, 0.5, 0.7, 0.9),
        "exponential": (0.1, 0.5, 1.0, 2.0, 3.0),
        "normal": (-1.0, -0.3, 0.0, 0.4, 1.0),
        "compressed_exp": (0.1, 0.4, 0.8, 1.2, 1.6),
        "geometric_atomic": (0.0, 0.25, 0.5, 0.625, 0.8),
    }
    worst = 0.0
    s_bad = 0
    for s, (name, mu) in enumerate(families().items()):
        g = make_rng(SEED + 12, s)
        x = mu.sample(g, n_mc)
        y = mu.sample(g, n_mc)
        tot = x + y
        for m in points[name]:
            f, fp = mu.sum_tail(m)
            for est, hit in ((f, tot >= 2 * m), (fp, tot > 2 * m)):
                p = hit.mean()
                se = max(math.sqrt(p * (1 - p) / n_mc), 1.0 / n_mc)
                z = abs(p - est) / se
                worst = max(worst, z)
                s_bad += z > 3
    ok = q_bad == 0 and s_bad == 0
    return ok, f"quantile mismatches={q_bad}/{n_sets}; sum_tail worst |z|={worst:.2f}, beyond 3 SE: {s_bad}"


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
    5: criterion_5, 6: criterion_6, 7: criterion_7, 8: criterion_8,
    9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
}


def run_criterion(cid):
    t0 = time.perf_counter()
    try:
        ok, detail = CRITERIA[cid]()
    except Exception as exc:  # a crash is a failure, reported rather than raised
        ok, detail = False, f"error {type(exc).__name__}: {exc}"
    return CriterionResult(cid, bool(ok), detail, time.perf_counter() - t0)


def run_all(ids=None, echo=print):
    results = []
    for cid in ids or sorted(CRITERIA):
        res = run_criterion(cid)
        if echo:
            echo(res.line())
        results.append(res)
    return results
