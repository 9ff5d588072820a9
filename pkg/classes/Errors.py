"""Exception hierarchy. Every error carries the process exit code the CLI returns."""
from typing import List, Optional


class DebiasError(Exception):
    exit_code = 1


class UsageError(DebiasError):
    exit_code = 2


class MissingInputError(DebiasError):
    exit_code = 3


class MalformedDataError(DebiasError):
    exit_code = 4

    def __init__(self, message: str, lines: Optional[List[int]] = None):
        self.lines = list(lines or [])
        if self.lines:
            message = f"{message} (lines: {', '.join(map(str, self.lines))})"
        super().__init__(message)


class OutputError(DebiasError):
    exit_code = 5


class InvalidParameterError(DebiasError, ValueError):
    pass


class QuadratureError(DebiasError):
    pass


class DegenerateFitError(DebiasError):
    pass


class EmptySetError(DebiasError):
    pass


class ReplicateBudgetError(DebiasError):
    pass
