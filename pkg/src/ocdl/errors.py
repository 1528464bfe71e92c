"""Exception types shared across the package."""


class OcdlError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(OcdlError, ValueError):
    """An argument violates an operation's preconditions."""


class InvalidStateError(OcdlError, RuntimeError):
    """An operation was called on state it cannot act on (e.g. empty accumulator)."""


class NumericalFailureError(OcdlError, ArithmeticError):
    """A solver produced a non-finite iterate."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class FormatError(OcdlError, ValueError):
    """A file does not conform to its on-disk format.

    ``offset`` is the byte position at which the problem was detected.
    """

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class CorruptFileError(FormatError):
    """A structurally valid file whose payload violates an invariant."""


class UnsupportedVersionError(FormatError):
    """A file with a format version this build does not read."""
