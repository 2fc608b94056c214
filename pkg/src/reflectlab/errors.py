"""Exception types shared across the package.

The CLI maps ``DomainError`` to exit status 1 and ``SolverError`` to 2.
"""


class DomainError(ValueError):
    """Input outside the physical or geometric domain of an operation."""


class VacuumError(DomainError):
    """The Bernoulli relation gives a nonpositive enthalpy (vacuum)."""


class DegenerateShockError(DomainError):
    """Zero velocity jump; the shock normal is undefined."""


class RegimeError(DomainError):
    """A construction left the regime it is valid in (e.g. lost ellipticity)."""


class SolverError(RuntimeError):
    """An iterative or linear-algebra solve failed.

    ``history`` carries whatever diagnostic trace the solver collected.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class TransformError(DomainError):
    """The shock-fitting map broke down (non-monotone potential along a ray)."""
