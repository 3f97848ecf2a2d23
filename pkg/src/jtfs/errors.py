"""Exception hierarchy shared by the transforms, I/O and the CLI."""


class ScatteringError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSpecError(ScatteringError, ValueError):
    """A filter bank or transform specification violates its invariants."""


class ConfigError(ScatteringError, ValueError):
    """Incompatible runtime configuration (sample rates, hops, path sets)."""


class DataError(ScatteringError, ValueError):
    """Input data is unusable (non-finite samples, malformed files)."""


class ParseError(DataError):
    """A binary file could not be parsed."""


class UnsupportedFormatError(DataError):
    """A file is well formed but uses an encoding we do not read."""


class NumericalError(ScatteringError, ArithmeticError):
    """An iterative procedure diverged."""
