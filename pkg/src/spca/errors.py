"""Exception hierarchy shared by all modules."""


class SpcaError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(SpcaError, ValueError):
    """Operand shapes do not agree."""


class RankError(SpcaError, ValueError):
    """Input is rank deficient, or a requested rank is out of range."""


class DegenerateColumnError(SpcaError, ValueError):
    """A column has zero norm and cannot be put on the unit sphere."""

    def __init__(self, column: int, message: str | None = None):
        self.column = column
        super().__init__(message or f"column {column} has zero norm")


class NumericalError(SpcaError, ArithmeticError):
    """An iteration failed to converge or produced non-finite values."""

    def __init__(self, message: str, iteration: int | None = None):
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)


class DataFormatError(SpcaError, ValueError):
    """A data file could not be parsed.

    ``row`` and ``col`` are 1-indexed positions in the file when known.
    """

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        self.row = row
        self.col = col
        where = []
        if row is not None:
            where.append(f"row {row}")
        if col is not None:
            where.append(f"col {col}")
        if where:
            message = f"{message} at {', '.join(where)}"
        super().__init__(message)
