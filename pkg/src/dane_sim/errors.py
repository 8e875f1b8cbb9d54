"""Exception types raised across the package."""


class ContractViolation(ValueError):
    """Input shapes or values break an operation's contract."""


class NumericError(ArithmeticError):
    """A numerical routine broke down (stagnation, loss of precision)."""


class NumericOverflow(NumericError):
    """A computed quantity came out non-finite."""


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EstimationError(RuntimeError):
    """An iterative estimate (power iteration etc.) did not converge.

    ``best`` holds the last iterate so callers can still inspect it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SolverNonConvergence(RuntimeError):
    def __init__(self, message, best_iterate=None, grad_norm=None, ifo_used=0):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.grad_norm = grad_norm
        self.ifo_used = ifo_used


class LineSearchFailure(RuntimeError):
    def __init__(self, message, eta=None):
        super().__init__(message)
        self.eta = eta


class PreconditionError(ValueError):
    """A lemma's premise does not hold for the supplied instance."""
