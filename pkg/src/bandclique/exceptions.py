"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 2 (argparse),
:class:`InputError` and :class:`DimacsParseError` exit 3, and the numeric
failures (:class:`ConvergenceError`, :class:`SolverError`,
:class:`BudgetExceededError`) exit 4.
"""


class BandCliqueError(Exception):
    """Base class for all package errors."""


class ParameterError(BandCliqueError, ValueError):
    """A caller-supplied parameter is outside its documented domain."""


class InputError(BandCliqueError, ValueError):
    """Input data (arrays, files) violates a documented precondition."""


class ConvergenceError(BandCliqueError, RuntimeError):
    """An iterative routine failed to reach its tolerance.

    Attributes
    ----------
    bracket : tuple or None
        Best bracket found by a root finder, when applicable.
    residual : float or None
        Best residual achieved.
    """

    def __init__(self, message, bracket=None, residual=None):
        super().__init__(message)
        self.bracket = bracket
        self.residual = residual


class SolverError(BandCliqueError, RuntimeError):
    """A linear-algebra or QP solve failed or violated its optimality checks.

    Carries the offending diagnostics (e.g. KKT residuals) in ``details``.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details) if details else {}


class BudgetExceededError(BandCliqueError, RuntimeError):
    """An exact search exhausted its node budget before proving optimality."""


class DegenerateSolutionError(BandCliqueError, RuntimeError):
    """A per-pixel solution cannot be normalized onto the simplex."""


class DimacsParseError(BandCliqueError, ValueError):
    """Malformed DIMACS text; ``line`` is the 1-based offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
