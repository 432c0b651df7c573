"""
Exception hierarchy shared by the solver apps and the command-line front-end
"""


class DunesError(Exception):
    """
    Base class for every failure raised by the solvers
    """


class ParameterError(DunesError, ValueError):
    """
    A numerical parameter is outside its admissible range
    """


class AliasingError(ParameterError):
    """
    An evaluation or quadrature grid is too coarse for the truncation order
    """


class DimensionError(DunesError, ValueError):
    """
    Operands disagree in truncation order or dimension
    """


class InvalidFieldError(DunesError, ValueError):
    """
    A spectral field holds non-finite coefficients or breaks a declared symmetry
    """


class InvalidSampleError(DunesError, ValueError):
    """
    A sampler returned a non-finite value
    """
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SingularSystemError(DunesError, ArithmeticError):
    """
    LU factorization met a zero pivot
    """
    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


class IntegrationFailure(DunesError, RuntimeError):
    """
    The time integrator exhausted its step budget
    """
    def __init__(self, message, state=None, statistics=None):
        super().__init__(message)
        self.state = state
        self.statistics = statistics


class DivergenceError(IntegrationFailure):
    """
    The integrated state became non-finite
    """


class NonConvergenceError(DunesError, RuntimeError):
    """
    A fixed-point iteration did not contract within its budget
    """


class ConfigError(DunesError):
    """
    A run configuration failed to parse or validate
    """
    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = errors or {}


class SnapshotFormatError(DunesError, ValueError):
    """
    A coefficient snapshot file is malformed
    """
