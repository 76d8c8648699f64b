"""Exception hierarchy shared by every module."""


class CRMError(Exception):
    """Base class for all library errors."""


class ConfigError(CRMError, ValueError):
    """Invalid descriptor, hyperparameter or command-line configuration."""


class SchemaError(ConfigError):
    """A CSV schema references a column that is not in the file."""

    def __init__(self, column):
        super().__init__(f"missing column: {column!r}")
        self.column = column


class RowError(CRMError, ValueError):
    """A CSV cell could not be parsed."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class PreconditionError(CRMError, ValueError):
    """An operation was called with arguments outside its domain."""


class EvaluationError(CRMError, ValueError):
    """A discrepancy could not be evaluated on the given windows."""


class ProtocolError(CRMError, RuntimeError):
    """Predict/observe calls were issued out of order."""


class NotPseudometricError(CRMError, ValueError):
    """A distance matrix fails the pseudometric axioms."""

    def __init__(self, report):
        super().__init__(f"not a pseudometric: {report.describe()}")
        self.report = report
