"""Exception hierarchy shared by every module of the package."""


class CYError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CYError, ValueError):
    pass


class NotAlmostComplex(CYError, ValueError):
    pass


class NotCompatible(CYError, ValueError):
    pass


class NotSPD(CYError, ValueError):
    pass


class NotPositiveDefinite(CYError, ValueError):
    pass


class ParameterOutOfRange(CYError, ValueError):
    pass


class DegreeOverflow(CYError, ValueError):
    pass


class IndexOutOfRange(CYError, IndexError):
    pass


class NotElliptic(CYError):
    """Raised when the linearization is requested outside the taming cone."""


class RhsNotMeanZero(CYError, ValueError):
    pass


class NoConvergence(CYError):
    """Krylov iteration hit its budget; ``u`` and ``report`` hold the best iterate."""

    def __init__(self, message, u=None, report=None):
        super().__init__(message)
        self.u = u
        self.report = report


class NewtonDiverged(CYError):
    def __init__(self, message, phi=None, report=None):
        super().__init__(message)
        self.phi = phi
        self.report = report


class TamingLost(CYError):
    def __init__(self, message, phi=None, report=None):
        super().__init__(message)
        self.phi = phi
        self.report = report


class StepUnderflow(CYError):
    """Continuation step fell below ``s_step_min``; carries the partial trace."""

    def __init__(self, message, phi=None, trace=None):
        super().__init__(message)
        self.phi = phi
        self.trace = trace


class NotASolution(CYError, ValueError):
    pass


class NotPositive(CYError, ValueError):
    pass


class NotExact(CYError, ValueError):
    pass


class CoverGap(CYError, ValueError):
    pass


class SliceRequired(CYError, ValueError):
    pass


class FieldFileError(CYError, ValueError):
    """Unreadable, truncated or corrupted field file."""


class ConfigError(CYError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
