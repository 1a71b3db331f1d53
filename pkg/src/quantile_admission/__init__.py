"""Quantile admission process with veto: measures, drift, simulation and limits."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DomainError,
    InapplicableError,
    IntegrityError,
    NonDeterministicError,
    NumericError,
    QuantileAdmissionError,
    ResolutionError,
    StallError,
    UndefinedDriftError,
    ZeroMassError,
)
from .measure import (
    CLOSED,
    OPEN,
    AtomList,
    CompressedExp,
    Exponential,
    GeometricAtomic,
    Mixture,
    Normal,
    TabulatedContinuous,
    Uniform,
    conditional_pair_sampler,
    quantile,
    sample,
    sum_tail,
    tail,
)
from .drift import (
    convexity_criterion,
    drift_table,
    ff_ratio_probe,
    is_monotone_rho1,
    rho,
    rho1,
    rho_plus,
    rho_right_limit,
    sign_analysis,
)
from .process import (
    ClubState,
    Trace,
    admit_step_threshold,
    admit_step_voting,
    empirical_quantile,
    psi_diagnostics,
    run_chain,
    trace_from_opinions,
    update_walks,
)
from .limits import (
    Case,
    LimitSpec,
    classify,
    closed_form,
    limit_density,
    limit_tail,
    normalize,
    tail_exponent,
)
from .config import ExperimentConfig, parse_measure_arg
from .harness import (
    detect_nonuniqueness,
    estimate_limit_quantile,
    ks_distance,
    mass_below_threshold,
    run_ensemble,
)
