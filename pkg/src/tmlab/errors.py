"""Exception taxonomy shared across the package."""


class TmlabError(Exception):
    """Base class for all package-specific failures."""


class InputError(TmlabError, ValueError):
    """A caller-supplied value is outside the documented domain."""


class ShapeError(InputError):
    """An array argument has the wrong shape or dtype."""


class StateError(TmlabError, RuntimeError):
    """An operation was invoked on an object in the wrong state."""


class NumericError(TmlabError, ArithmeticError):
    """A computation produced or received non-finite numbers."""


class NotReadyError(StateError):
    """A sampling or update step was requested before enough data exists."""


class FormatError(TmlabError, ValueError):
    """A file or stream does not follow the expected format/version."""


class CorruptionError(FormatError):
    """A file matched the expected format but its payload is damaged."""


class UsageError(TmlabError, ValueError):
    """Command line or config-file input is invalid; message names the key."""
