"""Exception and warning types shared across the package."""


class SpatialDecayError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(SpatialDecayError, ValueError):
    """All distances on a path map to the same abscissa (zero variance of log2 r)."""


class ZeroDecay(SpatialDecayError, ValueError):
    """The fitted decay per doubling is too close to zero for r_c to exist."""


class FieldDomainError(SpatialDecayError, ValueError):
    """A sound-field query fell outside the provider's domain."""


class InfeasibleSpec(SpatialDecayError, ValueError):
    """Target SNQ values cannot be produced together."""


class InsufficientSamples(SpatialDecayError, ValueError):
    pass


class InsufficientPaths(SpatialDecayError, ValueError):
    pass


class ParseError(SpatialDecayError, ValueError):
    """Malformed input file. ``location`` names the offending line or field."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class ValidationError(SpatialDecayError, ValueError):
    """Well-formed input that violates a domain invariant."""

    def __init__(self, message, diagnostics=()):
        self.diagnostics = tuple(diagnostics)
        super().__init__(message)


class NotConverged(UserWarning):
    """Monte-Carlo estimate did not meet the convergence tolerances."""
