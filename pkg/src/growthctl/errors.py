"""Exception hierarchy shared by all modules."""


class GrowthCtlError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(GrowthCtlError, ValueError):
    pass


class NutrientDepletionError(GrowthCtlError, ValueError):
    """An arc was evaluated past the time at which the nutrient runs out."""

    def __init__(self, message, x_N):
        super().__init__(message)
        self.x_N = x_N


class InfeasiblePlanError(GrowthCtlError, ValueError):
    """A phase plan asks an arc to run longer than the nutrient allows."""

    def __init__(self, message, arc_index, shortfall):
        super().__init__(message)
        self.arc_index = arc_index
        self.shortfall = shortfall


class HorizonError(GrowthCtlError, ValueError):
    pass


class DomainError(GrowthCtlError, ValueError):
    pass


class NoSolutionError(GrowthCtlError):
    """A switching-time system has no admissible root."""


class StructuralError(GrowthCtlError, ValueError):
    pass


class SolverError(GrowthCtlError, RuntimeError):
    pass


class ScenarioError(GrowthCtlError, ValueError):
    """Malformed scenario file; ``where`` names the line or field."""

    def __init__(self, message, where=None):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
