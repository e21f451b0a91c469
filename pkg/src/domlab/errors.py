"""Exception hierarchy shared by every module.

Numerical failures (``NumericalError`` subclasses) map to CLI exit code 3,
validation failures (``ValidationError`` subclasses) to exit code 2.
"""


class DomlabError(Exception):
    pass


class ValidationError(DomlabError, ValueError):
    pass


class NumericalError(DomlabError, ArithmeticError):
    pass


class UnknownIdentifier(ValidationError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown identifier"


class OrbitLengthExceeded(ValidationError):
    pass


class UnsupportedDimension(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class NoConvergence(NumericalError):
    """Power iteration did not settle below the requested Grassmannian tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularRestriction(NumericalError):
    pass


class MeshBlowup(NumericalError):
    pass
