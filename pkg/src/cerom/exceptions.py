"""Exception hierarchy shared across the pipeline."""


class CeromError(Exception):
    """Base class for all package errors."""


class ConfigError(CeromError, ValueError):
    """Invalid experiment configuration or argument combination."""


class NumericalError(CeromError, ArithmeticError):
    """A solve failed or produced non-finite values.

    ``step`` carries the time-step index when the failure happened inside a
    time loop.
    """

    def __init__(self, message, step=None):
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.step = step


class RomInstabilityError(NumericalError):
    """ROM coefficients exceeded the blow-up threshold."""


class SnapshotFormatError(CeromError, ValueError):
    """Snapshot container could not be read or failed validation."""


class BadMagicError(SnapshotFormatError):
    pass


class VersionMismatchError(SnapshotFormatError):
    pass


class TruncatedPayloadError(SnapshotFormatError):
    pass


class SymmetryError(SnapshotFormatError):
    pass
