"""Exception types raised by the coverage package."""


class CoverageError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(CoverageError, ValueError):
    """Non-finite or malformed numeric input."""


class DomainError(CoverageError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConditioningError(DomainError):
    """Matrix too close to singular for an inverse square root."""

    def __init__(self, message, smallest_eigenvalue):
        super().__init__(f"{message} (smallest eigenvalue {smallest_eigenvalue:.3e})")
        self.smallest_eigenvalue = smallest_eigenvalue


class DegenerateGeneratorsError(CoverageError, ValueError):
    """Two Voronoi generators coincide."""


class AgentInObstacleError(CoverageError, ValueError):
    """An agent sits inside or on an obstacle disk."""


class DegeneratePolygonError(CoverageError, ValueError):
    """Polygon with fewer than three vertices or zero area."""


class UnderflowError(CoverageError, ArithmeticError):
    """Density integral over a cell is numerically zero."""


class InsufficientDataError(CoverageError, ValueError):
    """Fewer data points than mixture components."""


class InfeasibleScenarioError(CoverageError, RuntimeError):
    """Initial placement could not be generated."""


class InvariantViolation(CoverageError, RuntimeError):
    """A safety invariant failed during simulation; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
        self.partial_output = None


class ScenarioError(CoverageError, ValueError):
    """Scenario validation failure naming the offending field."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
