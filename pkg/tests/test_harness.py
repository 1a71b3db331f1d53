import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quantile_admission import harness
from quantile_admission import measure as msr
from quantile_admission.config import ExperimentConfig
from quantile_admission.errors import ConfigError, InapplicableError
from quantile_admission.limits import classify, closed_form
from quantile_admission.process import run_chain
from quantile_admission.streams import make_rng

U_QUARTER = 0.15505102572168222


# -- estimate_limit_quantile ---------------------------------------------------------------


def test_estimate_constant_trace():
    m_hat, se = harness.estimate_limit_quantile(np.full(100, 0.37))
    assert m_hat == 0.37 and se == 0.0


def test_estimate_uses_post_admission_quantiles():
    tr = run_chain(msr.Uniform(), 0.25, 64, "threshold", seed=0)
    ms = np.append(tr.m[1:], tr.final_m)
    m_hat, _ = harness.estimate_limit_quantile(tr, 1.0)
    assert m_hat == pytest.approx(ms.mean(), abs=1e-15)


def test_estimate_short_window():
    with pytest.raises(ConfigError):
        harness.estimate_limit_quantile(np.ones(10), 0.5)
    with pytest.raises(ConfigError):
        harness.estimate_limit_quantile(np.ones(100), 0.0)


def test_batch_means_stderr_for_iid_noise():
    v = make_rng(1).normal(size=80000)
    _, se = harness.estimate_limit_quantile(v, 1.0)
    assert 0.3 / math.sqrt(80000) < se < 3 / math.sqrt(80000)


@pytest.mark.slow
def test_estimate_normal_three_quarters():
    tr = run_chain(msr.Normal(), 0.75, 10**6, "threshold", seed=31)
    m_hat, _ = harness.estimate_limit_quantile(tr, 0.5)
    assert abs(m_hat - 0.67449) <= 0.02


@pytest.mark.slow
def test_estimate_exponential_nine_tenths():
    tr = run_chain(msr.Exponential(1.0), 0.9, 10**6, "threshold", seed=32)
    m_hat, _ = harness.estimate_limit_quantile(tr, 0.5)
    assert abs(m_hat - 4.5) <= 0.1


# -- ks_distance ---------------------------------------------------------------------------


def test_ks_self_consistency():
    spec = closed_form(msr.Exponential(1.0), 0.5)
    sample = spec.sample(make_rng(2), 10**5)
    assert harness.ks_distance(sample, spec) <= 0.01


def test_ks_against_exact_cdf():
    x = np.array([0.1, 0.4, 0.4, 0.9])
    d = harness.ks_distance(x, lambda t: np.clip(t, 0, 1))
    # empirical steps 0.25, 0.75, 1.0 against a uniform CDF
    assert d == pytest.approx(0.35, abs=1e-12)


def test_ks_atomic_prediction():
    spec = classify(msr.GeometricAtomic(0.5), 0.6)[0]
    sample = spec.sample(make_rng(4), 10**5)
    assert harness.ks_distance(sample, spec) <= 0.01
    assert harness.ks_distance(np.zeros(100), spec) > 0.1


@pytest.mark.slow
def test_ks_exponential_chain():
    tr = run_chain(msr.Exponential(1.0), 0.5, 10**6, "threshold", seed=33)
    spec = closed_form(msr.Exponential(1.0), 0.5)
    assert harness.ks_distance(harness.last_window(tr), spec) <= 0.01


def test_point_mass_uses_mass_below():
    spec = closed_form(msr.Uniform(), 0.75)
    with pytest.raises(InapplicableError):
        harness.ks_distance([0.9, 1.0], spec)
    tr = run_chain(msr.Uniform(), 0.75, 10**5, "conditional", seed=5)
    assert harness.mass_below_threshold(harness.last_window(tr), 1.0) <= 0.2


def test_cdf_table_interpolant():
    spec = closed_form(msr.Uniform(), 0.25)
    tab = harness.CdfTable.from_spec(spec)
    xs = np.linspace(-0.1, 1.1, 50)
    np.testing.assert_allclose(tab(xs), 1 - np.array([spec.tail(x) for x in xs]), atol=1e-6)


# -- detect_nonuniqueness ------------------------------------------------------------------


def test_single_cluster():
    v = 0.3 + 0.001 * make_rng(6).random(25)
    res = harness.detect_nonuniqueness(v, gap=0.05)
    assert res.verdict == "single" and res.n_clusters == 1


def test_needs_twenty_replicas():
    with pytest.raises(ConfigError):
        harness.detect_nonuniqueness(np.zeros(19), gap=0.05)


def test_singletons_do_not_count():
    v = np.concatenate([np.zeros(20), [0.5]])
    assert harness.detect_nonuniqueness(v, gap=0.05).verdict == "single"
    v = np.concatenate([np.zeros(20), [0.5, 0.51]])
    assert harness.detect_nonuniqueness(v, gap=0.05).verdict == "multiple"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=20, max_size=60), st.randoms())
def test_verdict_permutation_invariant(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a = harness.detect_nonuniqueness(values, gap=0.05)
    b = harness.detect_nonuniqueness(shuffled, gap=0.05)
    assert a == b
    assert sum(c.size for c in a.clusters) == len(values)
    assert sum(c.frequency for c in a.clusters) == pytest.approx(1.0)


def test_geometric_ensemble_clusters_at_atoms():
    mu = msr.GeometricAtomic(0.5)
    cfg = ExperimentConfig(mu, 0.6, 10**5, n_replicas=60, seed=41, engine="conditional", gap=0.05)
    res = harness.detect_nonuniqueness(harness.run_ensemble(cfg, workers=1), gap=0.05)
    assert res.verdict == "multiple"
    big = [c for c in res.clusters if c.size >= 2]
    for c in big[:3]:
        assert np.min(np.abs(mu.atoms()[0] - c.center)) <= 0.01
    assert abs(big[0].center) <= 0.01 and abs(big[1].center - 0.5) <= 0.01


# -- run_ensemble --------------------------------------------------------------------------


def test_single_replica_is_run_chain():
    cfg = ExperimentConfig(msr.Uniform(), 0.25, 5000, seed=9)
    s = harness.run_ensemble(cfg, workers=1)
    tr = run_chain(msr.Uniform(), 0.25, 5000, "threshold", seed=9, stream=0)
    (rep,) = s.replicas
    assert rep.m_hat == harness.estimate_limit_quantile(tr)[0]
    assert rep.final_m == tr.final_m
    assert rep.ks == pytest.approx(harness.ks_distance(harness.last_window(tr),
                                                       closed_form(msr.Uniform(), 0.25)), abs=1e-5)


def test_uniform_quarter_ensemble():
    cfg = ExperimentConfig(msr.Uniform(), 0.25, 10**5, n_replicas=32, seed=10)
    s = harness.run_ensemble(cfg, workers=1)
    v = s.m_hat_values()
    assert v.size == 32 and np.all(np.abs(v - U_QUARTER) <= 0.03)
    assert s.verdict == "single"


def test_failed_replicas_marked():
    cfg = ExperimentConfig(msr.Uniform(), 0.9, 10**4, n_replicas=3, seed=1, max_rejections=20)
    s = harness.run_ensemble(cfg, workers=1)
    assert len(s.failed) == 3
    assert all("StallError" in r.error for r in s.failed)


def test_partial_failure_keeps_siblings():
    cfg = ExperimentConfig(msr.Uniform(), 0.6, 3000, n_replicas=8, seed=3, max_rejections=400)
    s = harness.run_ensemble(cfg, workers=1)
    ok = [r for r in s.replicas if r.error is None]
    assert len(ok) + len(s.failed) == 8
    assert all(math.isfinite(r.m_hat) for r in ok)


def test_reproducible_across_parallelism(tmp_path):
    def run(workers, sub):
        cfg = ExperimentConfig(msr.Exponential(1.0), 0.5, 4000, n_replicas=4, seed=5,
                               out_dir=str(tmp_path / sub), trace_prefix="chain", thin=50)
        harness.run_ensemble(cfg, workers=workers)
        return {p.name: p.read_bytes() for p in (tmp_path / sub).iterdir()}

    a = run(1, "a")
    b = run(2, "b")
    assert a == b and len(a) == 5
    doc = json.loads(a["summary.json"])
    assert doc["config"]["seed"] == 5 and "version" in doc
    assert set(doc) == {"clusters", "config", "dispersion", "prediction", "replicas", "verdict", "version"}


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("QC_THREADS", "1")
    assert harness.worker_count(10) == 1
    monkeypatch.setenv("QC_THREADS", "x")
    with pytest.raises(ConfigError):
        harness.worker_count(10)


# -- stream independence -------------------------------------------------------------------


def test_replica_streams_distinct():
    draws = [make_rng(0, i).random(4) for i in range(64)]
    assert len({tuple(d) for d in draws}) == 64
    assert not np.array_equal(make_rng(0, 0).random(4), make_rng(1, 0).random(4))


def test_stream_correlation_below_hundredth():
    c = harness.stream_correlations(0, 8, 10**4)
    assert np.all(np.abs(c) < 0.01)


def test_stream_correlation_consistent_with_independence():
    n = 10**4
    c = harness.stream_correlations(0, 16, n)
    # under independence sqrt(n) * corr is approximately standard normal
    z = c * math.sqrt(n)
    assert np.all(np.abs(z) < 4.5)
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert 0.7 < z.std() < 1.3
