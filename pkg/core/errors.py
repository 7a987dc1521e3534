"""
GRANULA - Error Taxonomy

Every failure raised by the toolkit derives from GranulationError.
Three families map onto the CLI exit codes:
  - UsageError    -> 1
  - DataError     -> 2  (ingestion, shapes, parameters)
  - NumericError  -> 3  (dead clusters, isolated data, non-convergence)
"""

from typing import Any, Optional


class ExitCode:
    OK = 0
    USAGE = 1
    DATA = 2
    NUMERIC = 3


class GranulationError(Exception):
    """Root of all toolkit errors."""

    exit_code = ExitCode.DATA


class UsageError(GranulationError):
    exit_code = ExitCode.USAGE


# --- Data family ---

class DataError(GranulationError):
    exit_code = ExitCode.DATA


class EmptyInputError(DataError):
    pass


class CsvParseError(DataError):
    def __init__(self, row: int, column: int, cell: str, path: str = ""):
        self.row = row
        self.column = column
        self.cell = cell
        where = f"{path}: " if path else ""
        super().__init__(f"{where}non-numeric cell {cell!r} at row {row}, column {column}")


class CsvStructureError(DataError):
    pass


class DegenerateFeatureError(DataError):
    def __init__(self, column: Any):
        self.column = column
        super().__init__(f"feature {column!r} has zero standard deviation")


class DegenerateDataError(DataError):
    pass


class DimensionError(DataError):
    pass


class ParameterError(DataError):
    pass


class ReportError(DataError):
    pass


# --- Numeric family ---

class NumericError(GranulationError):
    exit_code = ExitCode.NUMERIC


class DeadClusterError(NumericError):
    def __init__(self, cluster: int):
        self.cluster = cluster
        super().__init__(f"cluster {cluster} has zero total membership")


class IsolatedDatumError(NumericError):
    def __init__(self, datum: int):
        self.datum = datum
        super().__init__(f"datum {datum} has zero total membership across clusters")


class ConvergenceError(NumericError):
    def __init__(self, message: str, last_value: Optional[float] = None):
        self.last_value = last_value
        super().__init__(f"{message} (last iterate: {last_value})")


class OptimizerDegenerateError(NumericError):
    pass


def exit_code_for(error: BaseException) -> int:
    """Classify any exception into a CLI exit code."""
    if isinstance(error, GranulationError):
        return error.exit_code
    if isinstance(error, (FileNotFoundError, PermissionError, IsADirectoryError)):
        return ExitCode.DATA
    if isinstance(error, (FloatingPointError, OverflowError, ZeroDivisionError)):
        return ExitCode.NUMERIC
    return ExitCode.DATA
