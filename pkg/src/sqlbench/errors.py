"""Exception hierarchy shared across the harness."""


class SqlBenchError(Exception):
    """Base class for all harness errors."""


class ConfigError(SqlBenchError):
    """Invalid run configuration or config file."""


class DataError(SqlBenchError):
    """Malformed benchmark file or unusable database."""


class SqlParseError(SqlBenchError):
    """SQL text could not be parsed.

    Carries the character offset of the offending token so callers can
    point at the problem.
    """

    def __init__(self, message: str, position: int = -1):
        self.position = position
        if position >= 0:
            message = f"{message} (at offset {position})"
        super().__init__(message)


class ExtractionError(SqlBenchError):
    """A completion did not contain the expected structured answer."""


class WriteStatementError(SqlBenchError):
    """A statement that would mutate the database was rejected."""


class TimingError(SqlBenchError):
    """A query failed or timed out during efficiency measurement."""


class TransportError(SqlBenchError):
    """All retries against the model endpoint were exhausted."""


class EndpointError(SqlBenchError):
    """The model endpoint answered with a non-success status."""
