"""Exception types shared across the package."""


class ApsentError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ApsentError, ValueError):
    pass


class EmptyInputError(ApsentError, ValueError):
    pass


class ParameterError(ApsentError, ValueError):
    pass


class SchemaError(ApsentError, ValueError):
    """A CSV file is missing a required column."""


class ParseError(ApsentError, ValueError):
    """Malformed input file; ``line`` carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UndefinedMetricError(ApsentError, ValueError):
    """A validity index is not defined for the given labelling."""


class DegenerateSampleError(ApsentError, ValueError):
    pass


class ConsistencyError(ApsentError, ValueError):
    pass


class MemoryBudgetError(ApsentError, RuntimeError):
    pass
