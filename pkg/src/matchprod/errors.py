"""Exception types shared across the package."""


class ModelError(Exception):
    """Base class for all matchprod errors."""


class InvalidParam(ModelError):
    """A parameter violates its admissible range."""


class PamViolation(ModelError):
    """Parameters do not support a positive assortative matching equilibrium."""


class DivisionDegenerate(ModelError):
    """A closed-form denominator is exactly zero."""


class DomainError(ModelError):
    """An input lies outside the domain of the requested function."""


class GridTooSmall(ModelError):
    """Evaluation grid has too few points for numerical derivatives."""


class ConfigError(ModelError):
    """Simulation or run configuration is inconsistent."""


class NotConnected(ModelError):
    """Estimation requires a connected worker-firm graph."""


class SolverNoConvergence(ModelError):
    """Iterative least-squares solver did not reach the requested tolerance."""


class UnknownWorker(ModelError):
    """A match references a worker absent from the fitted model."""


class TooFewObservations(ModelError):
    """Not enough observations for the requested fit."""


class InsufficientPanel(ModelError):
    """Panel lacks the consecutive years needed for lagged moments."""


class NoConvergence(ModelError):
    """Numerical optimization failed to converge acceptably."""


class MissingCoefficients(ModelError):
    """Required coefficient estimates are unavailable."""


class KeyMismatch(ModelError):
    """Tables do not align on the expected firm-year keys."""


class SharesNotNormalized(ModelError):
    """Weights do not sum to one within a year."""


class WindowOutOfRange(ModelError):
    """Requested period is not covered by the series."""


class TooFewFirms(ModelError):
    """Too few firms in a year for dispersion statistics."""


class MissingInput(ModelError):
    """A pipeline stage's input file is absent."""
