"""Exception hierarchy.

Each error carries an ``exit_code`` used by the command-line front end:
2 for guard violations, 3 for numerical breakdown.
"""


class ThetaSumError(Exception):
    exit_code = 1


class GuardViolation(ThetaSumError):
    """An input exceeds a documented desk-scale guard."""

    exit_code = 2


class NumericalError(ThetaSumError):
    exit_code = 3


class DimensionMismatch(ThetaSumError, ValueError):
    exit_code = 2


class OddDimension(DimensionMismatch):
    pass


class NotPositiveDefinite(NumericalError, ValueError):
    pass


class NumericalBreakdown(NumericalError):
    pass


class ChartSingular(NumericalError):
    pass


class NotUnitary(NumericalError, ValueError):
    pass


class DegenerateSpectrum(NumericalError):
    pass


class NotIntegral(ThetaSumError, ValueError):
    exit_code = 2


class NotSymplectic(ThetaSumError, ValueError):
    exit_code = 2


class IterationLimit(NumericalError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class NotInDomain(ThetaSumError, ValueError):
    exit_code = 2


class TooLarge(GuardViolation):
    pass


class IntegerOverflowGuard(GuardViolation):
    pass


class InsufficientSamples(GuardViolation):
    pass
