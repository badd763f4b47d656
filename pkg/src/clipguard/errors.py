"""Exception hierarchy shared by every clipguard module."""


class ClipGuardError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(ClipGuardError, ValueError):
    """A binary container does not have the expected layout."""


class TruncationError(FormatError):
    """Payload is shorter or longer than its header declares."""


class UnsupportedVersionError(FormatError):
    pass


class ShapeError(ClipGuardError, ValueError):
    pass


class EmptyInputError(ClipGuardError, ValueError):
    pass


class DomainError(ClipGuardError, ValueError):
    """An argument lies outside the domain of the operation."""


class ManifestError(ClipGuardError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateError(ManifestError):
    pass


class ConfigError(ClipGuardError, ValueError):
    pass


class NumericError(ClipGuardError, ArithmeticError):
    """Non-finite values appeared during a forward pass or training.

    ``checkpoint`` carries the last good checkpoint when raised from ``fit``.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class SinkWriteError(ClipGuardError, OSError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
