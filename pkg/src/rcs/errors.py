"""Exception hierarchy shared by every module in the package."""


class RCSError(ValueError):
    """Base class for all errors raised by this package."""


class NegativeMass(RCSError):
    pass


class NotNormalized(RCSError):
    pass


class IndexOutOfSpace(RCSError, IndexError):
    pass


class ZeroMixtureMass(RCSError):
    pass


class EmptyBuffer(RCSError):
    pass


class InfeasibleFloor(RCSError):
    pass


class EmptyUnsafeSet(RCSError):
    pass


class GroupExhausted(RCSError):
    pass


class NoExclusions(RCSError):
    pass


class TooLarge(RCSError):
    pass


class EmptyResults(RCSError):
    pass


class ParseError(RCSError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class ValidationError(RCSError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")
