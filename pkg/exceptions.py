from typing import Optional


class MlmcError(Exception):
    """Base class for every error raised by the engine."""


class InvalidArgumentError(MlmcError, ValueError):
    """A precondition on an argument was violated."""


class NumericalOverflowError(MlmcError, ArithmeticError):
    """A simulated state, weight or gradient became non-finite."""

    def __init__(self, detail: str, step: Optional[int] = None):
        self.detail = detail
        self.step = step
        message = detail if step is None else f"{detail} (at Euler step {step})"
        super().__init__(message)


class EstimationDegradedError(MlmcError):
    """Too many samples were dropped for the estimate to be trusted."""

    def __init__(self, detail: str, report=None, overflow_fraction: float = 0.0):
        self.detail = detail
        self.report = report
        self.overflow_fraction = overflow_fraction
        super().__init__(detail)


class InsufficientResolutionError(MlmcError):
    """A discretization bias cannot be told apart from Monte Carlo noise."""


class ConfigError(MlmcError):
    """A run config could not be parsed or validated."""

    def __init__(self, detail: str, key: Optional[str] = None, line: Optional[int] = None):
        self.detail = detail
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        message = f"{detail} ({', '.join(where)})" if where else detail
        super().__init__(message)


class ExportError(MlmcError, OSError):
    """A result file could not be written or read."""

    def __init__(self, detail: str, path: str):
        self.detail = detail
        self.path = path
        super().__init__(f"{detail}: {path}")
