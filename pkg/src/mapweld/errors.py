"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI: ConfigError -> 2, DataError (and
subclasses) -> 3, CoverageError -> 4.
"""


class MapWeldError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MapWeldError):
    """Invalid or incomplete pipeline configuration."""


class DataError(MapWeldError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """XML or file-format syntax error."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class IntegrityError(DataError):
    """Referential-integrity violation; carries the offending ids."""

    def __init__(self, message, ids=()):
        super().__init__(message)
        self.ids = tuple(ids)


class FormatError(DataError):
    """Unsupported file layout (e.g. unknown point-cloud field set)."""


class StateError(MapWeldError):
    """Operation invoked before its prerequisites exist."""


class DegenerateInputError(ValueError, MapWeldError):
    """Input has insufficient rank/extent for the requested fit."""


class CoverageError(MapWeldError):
    """A point falls outside the area a transform is defined on."""

    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = tuple(points)
