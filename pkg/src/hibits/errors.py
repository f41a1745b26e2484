class HibitsError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(HibitsError, ValueError):
    pass


class JitterExhaustedError(HibitsError):
    pass


class RankDeficientError(HibitsError):
    pass


class ConvergenceError(HibitsError):
    """Iterative solver did not converge.

    ``trace`` carries per-iteration diagnostics; ``payload`` carries partial
    results (e.g. a finished Stage-1 fit) when there are any.
    """

    def __init__(self, message, trace=None, payload=None):
        super().__init__(message)
        self.trace = trace or []
        self.payload = payload


class OptimizationFailedError(HibitsError):
    pass


class LoadError(InvalidInputError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column
