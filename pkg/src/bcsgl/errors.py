"""Exception types shared across the package."""


class BcsglError(Exception):
    """Base class for all package errors."""


class ConfigError(BcsglError):
    """Config file missing keys or failing schema validation."""


class DomainError(BcsglError):
    """Input outside the mathematical domain of an operation."""


class ResolutionError(BcsglError):
    """Grid too coarse for the requested scale (aliasing, microscale)."""


class AssemblyError(BcsglError):
    """Operator assembly impossible with the retained mode set."""


class SolverError(BcsglError):
    """Eigensolver failed or did not converge."""


class NoCriticalTemperature(BcsglError):
    """No sign change of the lowest eigenvalue below the temperature cap."""


class DegenerateGroundState(BcsglError):
    """Zero eigenvalue of the pairing operator is not simple."""


class OptimizationError(BcsglError):
    """Descent did not converge within the iteration budget."""


class StaleCacheError(BcsglError):
    """Cached pipeline stage does not match the current config digest."""
