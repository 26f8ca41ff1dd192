from __future__ import annotations

from typing import List, Optional, Sequence

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


class LabError(Exception):
    """Base class for every error raised by the lab."""

    exit_code = EXIT_CONFIG


class GridError(LabError, ValueError):
    pass


class FieldError(LabError, ValueError):
    pass


class ProblemSpecError(LabError, ValueError):
    pass


class ConfigError(LabError, ValueError):
    """Malformed experiment configuration.

    Carries the offending key and line number when they are known so the
    diagnostic can point at the exact spot in the file.
    """

    def __init__(self, message: str, key: Optional[str] = None, lineno: Optional[int] = None) -> None:
        self.key = key
        self.lineno = lineno
        location = f"line {lineno}: " if lineno is not None else ""
        super().__init__(f"{location}{message}")


class ExpressionError(ConfigError):
    pass


class ArtifactError(LabError, FileNotFoundError):
    pass


class NumericalError(LabError, RuntimeError):
    exit_code = EXIT_NUMERICAL


class NonFiniteError(NumericalError):
    def __init__(self, message: str, node: Optional[int] = None, coords: Optional[Sequence[float]] = None) -> None:
        self.node = node
        self.coords = None if coords is None else [float(c) for c in coords]
        super().__init__(message)


class SolverDivergenceError(NumericalError):
    def __init__(self, message: str, trace: Optional[List[float]] = None) -> None:
        self.trace = list(trace or [])
        super().__init__(message)


class BracketError(NumericalError):
    pass


class InsufficientDataError(NumericalError):
    pass
