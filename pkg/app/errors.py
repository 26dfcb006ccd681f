"""
Error types shared by the kernels, the runtime and the solvers.
Contract and configuration errors are also ValueErrors so argparse-style callers can treat them alike.
"""


class WorkbenchError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(WorkbenchError, ValueError):
    """A caller broke a precondition: dimension mismatch, unknown tag, freed request, ..."""


class ConfigurationError(WorkbenchError, ValueError):
    """Infeasible grid / processor grid / rank layout or an invalid option combination."""


class NotSpdError(WorkbenchError, ArithmeticError):
    def __init__(self, row: int, pivot: float | None = None):
        self.row = row
        self.pivot = pivot
        msg = f"matrix is not symmetric positive definite: non-positive pivot at row {row}"
        if pivot is not None:
            msg += f" (pivot={pivot:.3e})"
        super().__init__(msg)


class WatchdogExpired(WorkbenchError):
    """Raised inside a worker when the runtime exceeds its tick budget."""

    def __init__(self, tick: int, limit: int):
        self.tick = tick
        self.limit = limit
        super().__init__(f"watchdog expired at tick {tick} (limit {limit})")

