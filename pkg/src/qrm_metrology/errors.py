"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so every numerical failure derives from
:class:`NumericalFailure` and every input-validation failure from
:class:`ConfigError`.
"""


class QRMError(Exception):
    """Base class for package errors."""


class ConfigError(QRMError, ValueError):
    """Invalid parameters or configuration."""

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class DimensionMismatch(QRMError, ValueError):
    pass


class GapTooSmall(QRMError, ValueError):
    """Energy gap too close to zero for a closed-form expression."""


class ClosureViolation(QRMError, ValueError):
    """Second-order moment equations requested for two-photon relaxation."""


class NonpositiveData(QRMError, ValueError):
    pass


class DegenerateAbscissa(QRMError, ValueError):
    pass


class NumericalFailure(QRMError):
    """Base class for failures of a numerical run."""


class TruncationOverflow(NumericalFailure):
    """Population in the top decile of the truncated basis exceeded the limit."""


class StepFailure(NumericalFailure):
    """The adaptive step controller could not make progress."""


class DiagnosticFailure(NumericalFailure):
    """Trace, Hermiticity or positivity drifted beyond tolerance."""


class NonpositiveVariance(NumericalFailure):
    pass


class PeakAtBoundary(QRMError):
    """The maximum of F_g lies at the end of the horizon."""
