"""Exception hierarchy shared by the problem, selection, solver and analysis modules."""


class RGFBKError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(RGFBKError, ValueError):
    """An argument is outside its admissible range."""


class EvaluationError(RGFBKError, ArithmeticError):
    """A residual or Jacobian evaluation produced a non-finite value."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DomainError(EvaluationError):
    """The evaluation point lies outside the domain of the problem."""


class DegenerateError(RGFBKError, ArithmeticError):
    """Base for zero rows, zero directions and zero matrices."""


class DegenerateRowError(DegenerateError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateDirectionError(DegenerateError):
    pass


class DegenerateMatrixError(DegenerateError):
    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class NumericError(RGFBKError, ArithmeticError):
    """A dense factorization failed."""


class AlreadyConverged(RGFBKError):
    """Raised by selection rules when the residual is exactly zero.

    Distinct from ParameterError: nothing is wrong with the input, there is
    simply nothing left to select.
    """


class StagnationError(RGFBKError, RuntimeError):
    """Every resampling attempt within one iteration produced a degenerate step."""

    def __init__(self, message, k=None, x=None):
        super().__init__(message)
        self.k = k
        self.x = x


class SolveAbortedError(RGFBKError, RuntimeError):
    """An evaluator failed in the middle of a solve; carries the iteration and iterate."""

    def __init__(self, message, k=None, x=None):
        super().__init__(message)
        self.k = k
        self.x = x


class HypothesisViolation(RGFBKError, ValueError):
    """Convergence-bound inputs fall outside the window where the bound is meaningful."""


class InsufficientDataError(RGFBKError, ValueError):
    pass


class NoReferenceError(RGFBKError, RuntimeError):
    """A reference solution could not be computed; error tracking should be disabled."""
