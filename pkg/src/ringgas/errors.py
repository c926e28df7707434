"""Exception and warning types shared across the package."""


class RingGasError(Exception):
    """Base class for all package errors."""


class InsufficientFleet(RingGasError):
    """Fewer buses than the operation needs."""


class InvalidPosition(RingGasError):
    """Position outside [0, circumference) or non-finite."""


class DimensionMismatch(RingGasError):
    """Array or list lengths disagree."""


class DomainError(RingGasError):
    """Argument outside the mathematical domain of the operation."""


class EmptyRequest(RingGasError):
    """Zero samples, shots, or work items requested."""


class InsufficientData(RingGasError):
    """Too few samples for the estimator to be defined."""


class Unsupported(RingGasError):
    """Requested variant has no defined reference or method."""


class SingularConfiguration(RingGasError):
    """Coincident particles make the log interaction singular."""


class NotHermitian(RingGasError):
    """Matrix is not conjugate-symmetric within tolerance."""


class ConfigError(RingGasError):
    """Structurally invalid route, polyline, or configuration."""


class ParseError(RingGasError):
    """Malformed input row in strict parsing mode."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class IoError(RingGasError):
    """Unreadable or undecodable input stream."""


class EmptySnapshot(RingGasError):
    """No bus has a usable fix at the requested time."""


class UsageError(RingGasError):
    """Invalid command-line arguments or config file."""


class ClampedDistanceWarning(UserWarning):
    """Pairwise distance fell below the floor and was clamped."""


class ZeroSpacingWarning(UserWarning):
    """Zero spacings were floored before a fit."""
