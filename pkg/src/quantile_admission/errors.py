"""Exception hierarchy shared by all modules."""


class QuantileAdmissionError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(QuantileAdmissionError, ValueError):
    """Invalid configuration, parameters or input files."""


class DomainError(QuantileAdmissionError, ValueError):
    """Argument outside the domain of a function (e.g. a quantile level outside (0, 1))."""


class NumericError(QuantileAdmissionError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    ``bound`` carries the achieved error bound (or the last iterates) when available.
    """

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class UndefinedDriftError(NumericError):
    """The drift is undefined because the conditioning mass F_m vanishes."""


class ZeroMassError(NumericError):
    """A conditional distribution was requested on an event of probability zero."""


class ResolutionError(NumericError):
    """An evaluation grid is too coarse for the atoms of the measure."""


class StallError(NumericError):
    """A chain exceeded its budget of consecutive rejected candidate pairs."""


class InapplicableError(QuantileAdmissionError):
    """The requested construction does not apply to this measure (e.g. it has atoms)."""


class NonDeterministicError(QuantileAdmissionError):
    """The limit is random; use :func:`quantile_admission.limits.classify` instead."""


class IntegrityError(QuantileAdmissionError, AssertionError):
    """An identity that holds by construction was violated; indicates a bug."""
