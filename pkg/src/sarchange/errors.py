"""Exception hierarchy shared by every sarchange module."""


class SarChangeError(Exception):
    """Base class for all data-level errors raised by the library."""


class ParameterError(SarChangeError, ValueError):
    """A numeric parameter (looks, tau, alpha, window...) is out of range."""


class InputError(SarChangeError, ValueError):
    """Malformed input data: empty stacks, mismatched shapes, bad regions."""


class DomainError(SarChangeError, ValueError):
    """Reflectivities outside the domain of a formula (negative or zero)."""


class EstimationError(SarChangeError, ValueError):
    """A statistical estimator could not produce a value."""


class ConvergenceError(SarChangeError, RuntimeError):
    """An iterative solver did not converge."""


class FormatError(SarChangeError, ValueError):
    """A file does not follow the raster or manifest format."""


class EvaluationError(SarChangeError, ValueError):
    """Evaluation is undefined for the given inputs (e.g. single-class truth)."""
