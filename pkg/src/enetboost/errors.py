"""Exception taxonomy mapped onto CLI exit codes."""


class EnetBoostError(Exception):
    """Base class; exit_code drives the CLI status."""

    exit_code = 1


class ConfigError(EnetBoostError):
    """Invalid configuration or parameters."""

    exit_code = 1


class DataError(EnetBoostError):
    """Bad input data: schema, parsing, degenerate targets."""

    exit_code = 2


class SchemaError(DataError):
    """CSV header does not match the declared schema."""


class ParseError(DataError):
    """Unparseable cell, reported with its file row."""

    def __init__(self, row: int, column: str, message: str):
        super().__init__(f"row {row}, column {column!r}: {message}")
        self.row = row
        self.column = column


class StratificationError(DataError):
    """Class too small for the requested split or fold count."""


class ModelError(EnetBoostError):
    """Model fitting or selection failure."""

    exit_code = 3


class EmptySelectionError(ModelError):
    """Selection kept no features; retry with a smaller lambda."""


class SearchError(ModelError):
    """Every random-search trial failed."""
