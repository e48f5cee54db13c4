"""
分数阶变差工具的异常类型
Exception hierarchy for the fractional variation toolkit
"""

from typing import Any, Dict, Optional


class FracVarError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(FracVarError, ValueError):
    """A parameter lies outside its admissible domain."""


class ResolutionError(FracVarError, ValueError):
    """A partition is finer than the data it is evaluated on."""


class NumericError(FracVarError, ArithmeticError):
    """A numerical routine failed (e.g. a covariance factorization)."""


class EstimationError(FracVarError):
    """An estimator found no admissible solution."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateDataError(FracVarError):
    """A test statistic is undefined for the given data (zero variance)."""


class ParseError(FracVarError, ValueError):
    """Malformed input file."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.line = line
        self.column = column


class ExperimentError(FracVarError, KeyError):
    """Unknown experiment name."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ''
