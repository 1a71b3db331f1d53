"""INI-style experiment configuration.

Example::

    [measure]
    family = mixture
    components = low, high

    [measure.low]
    weight = 0.5
    family = uniform
    a = 0
    b = 1

    [measure.high]
    weight = 0.5
    family = exponential
    rate = 2

    [process]
    r = 0.25
    n_admit = 100000
    engine = threshold
    seed = 1

    [ensemble]
    n_replicas = 32
    window = 0.5

    [output]
    dir = out
    thin = 100

Tabulated measures use ``family = tabulated`` with ``csv = path`` (relative to
the config file); atom lists use ``locations`` and ``masses`` as comma lists.
"""

import configparser
import math
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .measure import (
    AtomList,
    CompressedExp,
    Exponential,
    GeometricAtomic,
    Mixture,
    Normal,
    TabulatedContinuous,
    Uniform,
)
from .process import DEFAULT_STALL_LIMIT, ENGINES
from .streams import as_fraction

_FAMILIES = {
    "uniform": (Uniform, {"a": 0.0, "b": 1.0}),
    "exponential": (Exponential, {"rate": 1.0}),
    "normal": (Normal, {"mean": 0.0, "stddev": 1.0}),
    "compressed_exp": (CompressedExp, {"alpha": 2.0}),
    "geometric_atomic": (GeometricAtomic, {"p": 0.5}),
}


def _floats(text, what):
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list for {what}: {text!r}") from exc


def _float(sec, key, default):
    if key not in sec:
        return default
    try:
        return float(sec[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {sec[key]!r}") from exc


def measure_from_section(parser, name, base_dir="."):
    """Build a measure from section ``name`` (and its ``name.child`` sections)."""
    if not parser.has_section(name):
        raise ConfigError(f"missing section [{name}]")
    sec = parser[name]
    family = sec.get("family", "").strip().lower()
    if family in _FAMILIES:
        cls, defaults = _FAMILIES[family]
        known = set(defaults) | {"family", "weight"}
        extra = set(sec) - known - set(parser.defaults())
        if extra:
            raise ConfigError(f"unknown keys for {family}: {sorted(extra)}")
        return cls(**{k: _float(sec, k, v) for k, v in defaults.items()})
    if family == "tabulated":
        if "csv" not in sec:
            raise ConfigError("tabulated measure needs csv = <path>")
        path = sec["csv"]
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        if not os.path.exists(path):
            raise ConfigError(f"tabulated csv not found: {path}")
        return TabulatedContinuous.from_csv(path)
    if family == "atoms":
        return AtomList(_floats(sec.get("locations", ""), "locations"),
                        _floats(sec.get("masses", ""), "masses"))
    if family == "mixture":
        names = [c.strip() for c in sec.get("components", "").split(",") if c.strip()]
        if not names:
            raise ConfigError("mixture needs components = name1, name2, ...")
        comps = []
        for child in names:
            full = f"{name}.{child}"
            if not parser.has_section(full):
                raise ConfigError(f"missing section [{full}]")
            comps.append((_float(parser[full], "weight", math.nan),
                          measure_from_section(parser, full, base_dir)))
        if any(math.isnan(w) for w, _ in comps):
            raise ConfigError("every mixture component needs a weight")
        return Mixture(comps)
    raise ConfigError(f"unknown measure family {family!r}")


def parse_measure_arg(text):
    """Measure from a config path or an inline ``family:key=value,...`` string."""
    if os.path.exists(text):
        parser = read_config(text)
        return measure_from_section(parser, "measure", os.path.dirname(os.path.abspath(text)))
    family, _, rest = text.partition(":")
    parser = configparser.ConfigParser()
    parser.add_section("measure")
    parser["measure"]["family"] = family
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"inline measure parameter {item!r} must be key=value")
        parser["measure"][key.strip()] = val.strip()
    return measure_from_section(parser, "measure")


def read_config(path):
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parser


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an ensemble run."""

    measure: object
    r: float
    n_admit: int
    n_replicas: int = 1
    seed: int = 0
    engine: str = "threshold"
    thin: int = 1
    window: float = 0.5
    gap: float = None
    max_rejections: int = DEFAULT_STALL_LIMIT
    out_dir: str = None
    trace_prefix: str = None
    summary_name: str = "summary.json"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = float(self.r)
        if not 0 < self.r < 1:
            raise ConfigError("r must lie in (0, 1)")
        if self.n_admit < 1 or self.n_replicas < 1:
            raise ConfigError("n_admit and n_replicas must be positive")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}")
        if not 0 < self.window <= 1:
            raise ConfigError("window must lie in (0, 1]")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @classmethod
    def from_file(cls, path):
        parser = read_config(path)
        base = os.path.dirname(os.path.abspath(path))
        measure = measure_from_section(parser, "measure", base)
        proc = parser["process"] if parser.has_section("process") else {}
        ens = parser["ensemble"] if parser.has_section("ensemble") else {}
        out = parser["output"] if parser.has_section("output") else {}
        try:
            cfg = cls(
                measure=measure,
                r=float(as_fraction(proc["r"].strip())),
                n_admit=int(proc.get("n_admit", 1000)),
                n_replicas=int(ens.get("n_replicas", 1)),
                seed=int(proc.get("seed", 0)),
                engine=proc.get("engine", "threshold").strip(),
                thin=int(out.get("thin", 1)),
                window=float(ens.get("window", 0.5)),
                gap=float(ens["gap"]) if "gap" in ens else None,
                max_rejections=int(float(proc.get("max_rejections", DEFAULT_STALL_LIMIT))),
                out_dir=os.path.join(base, out["dir"]) if "dir" in out else None,
                trace_prefix=out.get("trace_prefix"),
                summary_name=out.get("summary", "summary.json"),
            )
        except KeyError as exc:
            raise ConfigError(f"missing key {exc} in config") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    def echo(self):
        """JSON-friendly description (no paths or timestamps that vary between runs)."""
        return {
            "measure": self.measure.to_dict(),
            "r": self.r,
            "n_admit": self.n_admit,
            "n_replicas": self.n_replicas,
            "seed": self.seed,
            "engine": self.engine,
            "thin": self.thin,
            "window": self.window,
            "gap": self.gap,
            "max_rejections": self.max_rejections,
        }
