"""Exception hierarchy.

Errors split into three families so the CLI can map them onto exit codes:
data problems (bad files, bad annotations, bad shapes), numeric failures,
and everything else.
"""


class StillActError(Exception):
    """Base class for every error raised by this package."""


class DataError(StillActError):
    pass


class NumericError(StillActError):
    """Training produced a non-finite value."""


class MissingHead(DataError):
    pass


class DegenerateHead(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyBatch(DataError):
    pass


class EmptyDataset(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class MissingLabel(DataError):
    pass


class NoPositives(DataError):
    pass


class LengthMismatch(DataError):
    pass


class MissingClass(DataError):
    pass


class InsufficientData(DataError):
    pass


class InvalidConfig(DataError):
    pass


class ParseError(DataError):
    def __init__(self, line, message, path=None):
        self.line = line
        self.path = path
        where = f"{path}:{line}" if path is not None else f"line {line}"
        super().__init__(f"{where}: {message}")


class UnknownEntityKind(ParseError):
    pass


class UnknownLabel(ParseError):
    pass


class VersionMismatch(DataError):
    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"model format version {found!r} found, expected {expected!r}")


class CorruptFile(DataError):
    pass
