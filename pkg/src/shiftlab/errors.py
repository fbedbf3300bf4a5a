"""Exception hierarchy.

``InputError`` subclasses map to CLI exit code 2, ``AnalysisError``
subclasses to exit code 3.
"""

from __future__ import annotations


class ShiftlabError(Exception):
    exit_code = 1


class InputError(ShiftlabError, ValueError):
    exit_code = 2


class AnalysisError(ShiftlabError):
    exit_code = 3


class EmptySeries(InputError):
    def __init__(self):
        super().__init__("time series must contain at least one value")


class NonFiniteValue(InputError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"non-finite value at index {index}")


class InvalidSegmentation(InputError):
    pass


class SeriesTooShort(InputError):
    pass


class InvalidRange(InputError):
    pass


class SegmentTooShort(InputError):
    pass


class NegativeCount(InputError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"Poisson cost needs non-negative integer counts; got {value!r} at index {index}")


class EmptyData(InputError):
    pass


class UnknownLevel(InputError):
    def __init__(self, factor: str, value):
        self.factor = factor
        self.value = value
        super().__init__(f"level {value!r} of factor {factor!r} is not declared")


class RankDeficient(AnalysisError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__("design matrix is rank deficient; collinear columns: " + ", ".join(self.columns))


class InsufficientData(AnalysisError):
    pass


class DegenerateSpread(AnalysisError):
    def __init__(self, axis: str):
        self.axis = axis
        super().__init__(f"points have zero spread along axis {axis}")


class GridTooSmall(InputError):
    pass


class GridMismatch(InputError):
    pass


class EmptySample(InputError):
    pass


class EmptyWindow(InputError):
    def __init__(self, side: str):
        self.side = side
        super().__init__(f"no events in the {side} window")


class FactorMissing(InputError):
    def __init__(self, factor: str):
        self.factor = factor
        super().__init__(f"events do not carry factor {factor!r}")


class WindowOutOfRange(InputError):
    pass


class ParseError(InputError):
    def __init__(self, row: int, col: str | None, message: str = ""):
        self.row = row
        self.col = col
        where = f"row {row}" + (f", column {col!r}" if col else "")
        super().__init__(f"cannot parse {where}" + (f": {message}" if message else ""))


class DateGap(InputError):
    def __init__(self, missing):
        self.date = missing
        super().__init__(f"missing calendar day {missing}")


class MissingColumn(InputError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"column {column!r} not found in header")


class IoError(InputError):
    pass
