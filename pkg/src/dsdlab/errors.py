"""Exception types shared across the package."""


class DsdlabError(Exception):
    """Base class for all dsdlab errors."""


class DimensionError(DsdlabError):
    """Array shapes violate an operation's requirements."""


class RankDeficientError(DsdlabError):
    """A factorization pivot fell below the rank tolerance."""


class SingularMatrixError(DsdlabError):
    """A linear system solve failed."""


class NotHermitianError(DsdlabError):
    """Matrix is not Hermitian within tolerance."""


class InvalidCorrelationError(DsdlabError):
    """Antenna correlation coefficient outside [0, 1)."""


class ScenarioParseError(DsdlabError):
    """Scenario file is not valid JSON or a field has the wrong type."""


class ScenarioValidationError(DsdlabError):
    """Scenario contents violate an invariant."""
