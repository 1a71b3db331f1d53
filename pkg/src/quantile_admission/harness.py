"""Ensembles of independent chains and their comparison with predicted limits."""

import json
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import __version__
from .errors import ConfigError, InapplicableError, QuantileAdmissionError
from .limits import Case, LimitSpec, cdf_table, classify, limit_tail
from .process import run_chain
from .streams import make_rng

N_BATCHES = 8
POINT_MASS_EPS = 0.01


# -- statistics ----------------------------------------------------------------------------


def estimate_limit_quantile(trace, window_fraction=0.5):
    """Mean of m_k over the final window, with an 8-batch-means standard error.

    Accepts a :class:`~quantile_admission.process.Trace` (using m_1..m_n) or a
    plain array of quantile values.
    """
    if not 0 < window_fraction <= 1:
        raise ConfigError("window_fraction must lie in (0, 1]")
    if hasattr(trace, "final_m"):
        ms = np.append(trace.m[1:], trace.final_m)
    else:
        ms = np.asarray(trace, dtype=float)
    w = int(math.ceil(window_fraction * ms.size))
    if w < N_BATCHES:
        raise ConfigError(f"window of {w} steps is shorter than {N_BATCHES} batches")
    window = ms[-w:]
    b = w // N_BATCHES
    batches = window[w - b * N_BATCHES:].reshape(N_BATCHES, b).mean(axis=1)
    # centring on the first value keeps a constant window exact
    m_hat = float(window[0] + (window - window[0]).mean())
    stderr = float(batches.std(ddof=1) / math.sqrt(N_BATCHES))
    return m_hat, stderr


def last_window(trace, window_fraction=0.5):
    """Admitted opinions in the final window."""
    n = len(trace.x)
    return trace.x[n - int(math.ceil(window_fraction * n)):]


class CdfTable:
    """Monotone interpolant of a predicted CDF, built once and shared across replicas."""

    def __init__(self, grid, cdf):
        self.grid = np.asarray(grid, dtype=float)
        self.cdf = np.asarray(cdf, dtype=float)
        self._interp = PchipInterpolator(self.grid, self.cdf, extrapolate=False)

    @classmethod
    def from_spec(cls, spec, n=4097):
        return cls(*cdf_table(spec, n))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self._interp(x)
        out = np.where(x < self.grid[0], 0.0, out)
        out = np.where(x >= self.grid[-1], 1.0, out)
        return np.clip(out, 0.0, 1.0)


def _predicted_cdf(predicted):
    if isinstance(predicted, LimitSpec):
        if predicted.case is Case.POINT_MASS:
            raise InapplicableError("KS against a point mass is degenerate; use mass_below_threshold")
        if predicted.measure.has_atoms:
            def left(x, spec=predicted):
                return np.array([1.0 - limit_tail(spec, np.nextafter(v, -np.inf)) for v in np.atleast_1d(x)])

            def right(x, spec=predicted):
                return np.array([1.0 - limit_tail(spec, v) for v in np.atleast_1d(x)])

            return right, left, predicted.measure.atoms()[0]
        predicted = CdfTable.from_spec(predicted)
    return predicted, predicted, np.empty(0)


def ks_distance(sample, predicted):
    """Sup-distance between the empirical CDF of ``sample`` and a predicted CDF.

    ``predicted`` is a :class:`LimitSpec` or a callable CDF (e.g. :class:`CdfTable`).
    Both one-sided limits are compared at every distinct sample value and at the
    atoms of an atomic prediction.
    """
    xs = np.sort(np.asarray(sample, dtype=float))
    n = xs.size
    if n == 0:
        raise ConfigError("empty sample")
    right, left, atoms = _predicted_cdf(predicted)
    pts = np.unique(np.concatenate([xs, atoms]))
    e_right = np.searchsorted(xs, pts, side="right") / n
    e_left = np.searchsorted(xs, pts, side="left") / n
    d = max(np.max(np.abs(e_right - right(pts))), np.max(np.abs(e_left - left(pts))))
    return float(d)


def mass_below_threshold(sample, mu_max, eps=POINT_MASS_EPS):
    """Fraction of the sample below mu_max - eps."""
    sample = np.asarray(sample, dtype=float)
    return float(np.mean(sample < mu_max - eps))


# -- non-uniqueness ------------------------------------------------------------------------


@dataclass(frozen=True)
class Cluster:
    center: float
    size: int
    frequency: float
    lo: float
    hi: float


@dataclass(frozen=True)
class NonuniquenessVerdict:
    verdict: str
    clusters: tuple
    gap: float

    @property
    def n_clusters(self):
        return len(self.clusters)


def default_gap(measure):
    width = measure.mu_max - measure.mu_min
    return 0.05 * min(width, 1.0) if math.isfinite(width) else 0.05


def cluster_values(values, gap):
    """Single-linkage clusters of 1-D values: split wherever consecutive sorted values differ by > gap."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return ()
    cuts = np.nonzero(np.diff(v) > gap)[0] + 1
    groups = np.split(v, cuts)
    return tuple(
        Cluster(float(g.mean()), int(g.size), g.size / v.size, float(g[0]), float(g[-1]))
        for g in groups
    )


def detect_nonuniqueness(summary, gap=None):
    """``multiple`` iff at least two clusters of terminal m_hat hold two or more replicas each."""
    if isinstance(summary, EnsembleSummary):
        values = summary.m_hat_values()
        if gap is None:
            gap = default_gap(summary.config.measure)
    else:
        values = np.asarray(summary, dtype=float)
    if gap is None:
        gap = 0.05
    if values.size < 20:
        raise ConfigError("non-uniqueness detection needs at least 20 replicas")
    clusters = cluster_values(values, gap)
    big = sum(1 for c in clusters if c.size >= 2)
    return NonuniquenessVerdict("multiple" if big >= 2 else "single", clusters, float(gap))


# -- ensembles -----------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicaResult:
    index: int
    m_hat: float
    stderr: float
    final_m: float
    ks: float = None
    mass_below: float = None
    rounds: int = None
    error: str = None


@dataclass
class EnsembleSummary:
    config: object
    replicas: list
    prediction: str
    clusters: tuple
    verdict: str

    def m_hat_values(self):
        return np.array([r.m_hat for r in self.replicas if r.error is None])

    @property
    def frequencies(self):
        return [c.frequency for c in self.clusters]

    @property
    def centers(self):
        return [c.center for c in self.clusters]

    @property
    def dispersion(self):
        v = self.m_hat_values()
        return float(v.std(ddof=1)) if v.size > 1 else 0.0

    @property
    def failed(self):
        return [r for r in self.replicas if r.error is not None]

    def to_dict(self):
        return {
            "version": software_version(),
            "config": self.config.echo(),
            "prediction": self.prediction,
            "verdict": self.verdict,
            "dispersion": self.dispersion,
            "clusters": [asdict(c) for c in self.clusters],
            "replicas": [asdict(r) for r in self.replicas],
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def software_version():
    """``git describe`` of the source tree when available, else the package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--tags", "--dirty"],
            cwd=here, capture_output=True, text=True, timeout=10, check=True,
        )
        return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        return __version__


@dataclass(frozen=True)
class _Prediction:
    kind: str  # "table", "point-mass" or "none"
    table: object = None
    mu_max: float = None


def _prediction_for(measure, r):
    try:
        cls = classify(measure, r)
    except QuantileAdmissionError as exc:
        return _Prediction("none"), f"unavailable ({exc})"
    if not cls.deterministic:
        return _Prediction("none"), f"non-deterministic ({len(cls.specs)} candidate specs)"
    spec = cls.specs[0]
    if spec.case is Case.POINT_MASS:
        return _Prediction("point-mass", mu_max=spec.m), spec.describe()
    if measure.has_atoms:
        return _Prediction("none"), spec.describe()
    return _Prediction("table", table=CdfTable.from_spec(spec)), spec.describe()


def _run_replica(args):
    cfg, index, prediction = args
    try:
        tr = run_chain(
            cfg.measure, cfg.r, cfg.n_admit, cfg.engine,
            seed=cfg.seed, stream=index, max_rejections=cfg.max_rejections,
        )
        m_hat, se = estimate_limit_quantile(tr, cfg.window)
        sample = last_window(tr, cfg.window)
        ks = mb = None
        if prediction.kind == "table":
            ks = ks_distance(sample, prediction.table)
        elif prediction.kind == "point-mass":
            mb = mass_below_threshold(sample, prediction.mu_max)
        if cfg.out_dir and cfg.trace_prefix:
            tr.to_csv(os.path.join(cfg.out_dir, f"{cfg.trace_prefix}_{index:04d}.csv"), cfg.thin)
        rounds = int(tr.t[-1]) if tr.t[-1] >= 0 else None
        return ReplicaResult(index, m_hat, se, float(tr.final_m), ks, mb, rounds)
    except QuantileAdmissionError as exc:
        return ReplicaResult(index, math.nan, math.nan, math.nan, error=f"{type(exc).__name__}: {exc}")


def worker_count(n_tasks):
    cap = os.environ.get("QC_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigError(f"QC_THREADS must be an integer, got {cap!r}") from exc
    return max(1, min(n, n_tasks))


def run_ensemble(config, workers=None, predict=True):
    """Run ``n_replicas`` independent chains; replica i uses stream i of the master seed."""
    if config.out_dir:
        os.makedirs(config.out_dir, exist_ok=True)
    if predict:
        prediction, described = _prediction_for(config.measure, config.r)
    else:
        prediction, described = _Prediction("none"), "not requested"
    tasks = [(config, i, prediction) for i in range(config.n_replicas)]
    workers = worker_count(len(tasks)) if workers is None else max(1, int(workers))
    if workers == 1:
        results = [_run_replica(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replica, tasks))
    ok = np.array([r.m_hat for r in results if r.error is None])
    gap = config.gap if config.gap is not None else default_gap(config.measure)
    clusters = cluster_values(ok, gap)
    big = sum(1 for c in clusters if c.size >= 2)
    summary = EnsembleSummary(
        config=config,
        replicas=results,
        prediction=described,
        clusters=clusters,
        verdict="multiple" if big >= 2 else "single",
    )
    if config.out_dir:
        summary.to_json(os.path.join(config.out_dir, config.summary_name))
    return summary


def stream_correlations(seed, n_streams, n_draws=10**4):
    """Pairwise Pearson correlations of the first ``n_draws`` uniforms of each replica stream."""
    draws = np.array([make_rng(seed, i).random(n_draws) for i in range(n_streams)])
    c = np.corrcoef(draws)
    iu = np.triu_indices(n_streams, 1)
    return c[iu]
