"""Exception hierarchy shared across the package."""


class PseudoPoissonError(Exception):
    """Base class for all package errors."""


class DataError(PseudoPoissonError, ValueError):
    """Malformed or unusable input data (bad CSV, too few pairs, ...)."""


class InsufficientDataError(DataError):
    pass


class UndefinedStatisticError(DataError):
    """A descriptive statistic is undefined for the sample (zero mean or variance)."""


class AdmissibilityError(PseudoPoissonError, ValueError):
    """Parameters violate the model's admissibility constraints."""


class DomainError(PseudoPoissonError, ValueError):
    """Argument outside a special function's domain."""


class SeriesError(PseudoPoissonError, ArithmeticError):
    """A series failed to converge within the allowed number of terms."""


class EstimationError(PseudoPoissonError):
    """Base class for estimator failures."""


class ExistenceError(EstimationError):
    """Moment estimator does not exist for this sample.

    ``side`` names the violated condition.
    """

    def __init__(self, message, side=None):
        super().__init__(message)
        self.side = side


class ExistenceUnknownError(EstimationError):
    """No root found by the search, but no analytic window rules one out."""


class DegenerateDispersionError(EstimationError):
    pass


class SolverError(EstimationError):
    pass


class NonConvergenceError(EstimationError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class OracleInfeasibleError(PseudoPoissonError):
    """Brute-force grid would be too large for the requested tolerance."""


class UsageError(PseudoPoissonError, ValueError):
    """Inconsistent request, e.g. non-nested models passed to an LRT."""
