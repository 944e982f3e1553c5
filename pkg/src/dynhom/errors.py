"""Exception and warning types raised by dynhom."""


class DynhomError(Exception):
    """Base class for all dynhom failures."""


class InvalidCellError(DynhomError, ValueError):
    """Unit-cell description violates a geometric or material invariant."""


class ResonantReference(DynhomError):
    """A reference-medium denominator omega^2 - c^2 |zeta|^2 vanished.

    Choose a different reference medium or detune (q, omega).
    """

    def __init__(self, message, n=None, zeta=None):
        super().__init__(message)
        self.n = n
        self.zeta = zeta


class ZeroFrequency(DynhomError, ValueError):
    """omega == 0 was requested; the kernels carry 1/omega factors."""


class DegenerateContrast(DynhomError):
    """Stiffness or density contrast of a listed subregion is singular."""


class SingularSystem(DynhomError):
    """The assembled eigenfield operator could not be factorized reliably."""

    def __init__(self, message, operator=None, rcond=None):
        super().__init__(message)
        self.operator = operator
        self.rcond = rcond


class SingularEffectiveCompliance(DynhomError):
    """Effective compliance is not invertible; Willis form unavailable."""


class ConfigError(DynhomError, ValueError):
    """Run configuration could not be parsed or validated."""

    def __init__(self, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.field = field
        self.line = line


class IllConditioningWarning(UserWarning):
    """A matrix inversion is numerically ill-conditioned."""
