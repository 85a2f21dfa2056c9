"""Exception types raised across the package."""


class SSCError(Exception):
    """Base class; ``kind`` is the machine-readable tag the CLI reports."""

    kind = "error"


class InvalidConfigError(SSCError, ValueError):
    kind = "invalid_config"


class DegenerateInputError(SSCError, ValueError):
    kind = "degenerate_input"

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InvalidBasisError(SSCError, ValueError):
    kind = "invalid_basis"


class IterationLimitError(SSCError, RuntimeError):
    """Solver hit its iteration cap; the last iterate is kept for inspection."""

    kind = "iteration_limit"

    def __init__(self, message, beta=None, kkt_residual=None):
        super().__init__(message)
        self.beta = beta
        self.kkt_residual = kkt_residual


class InfeasibleError(SSCError, ValueError):
    kind = "infeasible"

    def __init__(self, message, min_residual=None):
        super().__init__(message)
        self.min_residual = min_residual


class DegenerateStepError(SSCError, ValueError):
    """First step of the two-step procedure returned the zero vector."""

    kind = "degenerate_step1"


class NoSolutionError(SSCError, ValueError):
    kind = "no_solution"


class ParseError(SSCError, ValueError):
    kind = "parse_error"

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ColumnErrors(SSCError):
    """Collects per-column failures from a batch solve.

    ``partial`` holds the coefficient matrix with the failed columns left at
    zero, ``failures`` maps column index to the exception raised there.
    """

    kind = "column_failures"

    def __init__(self, failures, partial=None):
        cols = ", ".join(str(i) for i in sorted(failures))
        super().__init__(f"{len(failures)} column(s) failed: {cols}")
        self.failures = failures
        self.partial = partial
