"""Exception types raised across the package."""


class ModelError(ValueError):
    """Base class for invalid model input."""


class ZeroPopulationError(ModelError):
    """Total population is zero where it is used as a denominator."""


class DegenerateParametersError(ModelError):
    """Parameters make a derived quantity undefined (e.g. mu = 0)."""


class InfeasibleEquilibriumError(ModelError):
    """A candidate equilibrium has a negative component or N* <= 0."""


class CoefficientRecoveryError(RuntimeError):
    """Recovered polynomial coefficients fail the closed-form cross-check."""


class IntegrationError(RuntimeError):
    """Base class for time-stepping failures."""

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t={t:.17g})")
        self.t = t


class StepSizeUnderflowError(IntegrationError):
    pass


class NegativityError(IntegrationError):
    pass


class LinearSolverError(IntegrationError):
    pass


class GeometryError(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class PeakOutsideMaskError(GeometryError):
    """A requested initial peak lies outside the active cells."""


class UnknownRegionError(GeometryError):
    """A named sub-region is not present in the boundary document."""
