"""Exception and warning classes used across the package.

Every error carries a short ``code`` string; the harness writes it into the
``status`` column of a sweep table instead of aborting the sweep.
"""


class OKDMDError(Exception):
    code = "error"


class InvalidInputError(OKDMDError, ValueError):
    code = "invalid_input"


class DomainError(InvalidInputError):
    """A kernel was evaluated outside of its domain (e.g. log kernel, x <= -1)."""

    code = "domain_error"

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class CapabilityError(OKDMDError, NotImplementedError):
    code = "unsupported"


class CapacityError(OKDMDError, MemoryError):
    code = "capacity"


class NumericalFailureError(OKDMDError, ArithmeticError):
    code = "numerical_failure"

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DegenerateEigenpairError(NumericalFailureError):
    code = "degenerate_eigenpair"

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class HorizonOverflowError(NumericalFailureError):
    code = "horizon_overflow"

    def __init__(self, message, index=None, t=None):
        super().__init__(message)
        self.index = index
        self.t = t


class GenerationError(OKDMDError, RuntimeError):
    code = "generation_failure"


class ConjugacyWarning(UserWarning):
    """Imaginary part of a reconstruction did not cancel."""


class RankDeficiencyWarning(UserWarning):
    """Input Gram matrix is numerically rank deficient."""
