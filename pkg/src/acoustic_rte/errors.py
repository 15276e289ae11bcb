"""Exception hierarchy shared by all modules."""


class AcousticRTEError(Exception):
    """Base class for every error raised by the package."""


class OutOfDomain(AcousticRTEError):
    pass


class NonPhysical(AcousticRTEError):
    pass


class ZeroWavevector(AcousticRTEError):
    pass


class TabulationOutOfRange(AcousticRTEError):
    pass


class FrozenSpectrumRequiresShellPath(AcousticRTEError):
    pass


class CorrelatedSpectraUnsupported(AcousticRTEError):
    pass


class QuadratureUnresolved(AcousticRTEError):
    pass


class NotFrozen(AcousticRTEError):
    pass


class MovingMedium(AcousticRTEError):
    pass


class OnShellDriftExceeded(AcousticRTEError):
    def __init__(self, max_drift, tol):
        super().__init__(f"relative |H| drift {max_drift:.3e} exceeds tolerance {tol:.3e}")
        self.max_drift = max_drift
        self.tol = tol


class StepLimitExceeded(AcousticRTEError):
    pass


class MajorantViolated(AcousticRTEError):
    def __init__(self, rate, majorant):
        super().__init__(f"collision rate {rate:.6e} exceeds majorant {majorant:.6e}")
        self.rate = rate
        self.majorant = majorant


class RejectionBudgetExceeded(AcousticRTEError):
    pass


class GridTooCoarse(AcousticRTEError):
    pass


class ConfigError(AcousticRTEError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line, column):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ValidationError(ConfigError):
    def __init__(self, key, constraint):
        super().__init__(f"{key}: {constraint}")
        self.key = key
        self.constraint = constraint
