"""Exception hierarchy shared by every MRQ module."""


class MrqError(Exception):
    """Base exception for MRQ errors."""
    pass


class DegenerateDataError(MrqError):
    """Raised when data has too few rows or no variance to train on."""
    pass


class DimensionMismatchError(MrqError):
    """Raised when vector lengths disagree with each other or with a model."""
    pass


class InvalidConfigError(MrqError):
    """Raised when a parameter is out of its valid range."""
    pass


class ZeroVectorError(MrqError):
    """Raised when a vector that must be normalized has (near) zero norm."""
    pass


class FormatError(MrqError):
    """Raised when a binary file is truncated or malformed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f'{message} (offset {offset})'
        super().__init__(message)
        self.offset = offset


class VersionMismatchError(FormatError):
    """Raised when a file header carries an unknown magic or version."""
    pass


class InconsistentDimensionError(FormatError):
    """Raised when a vecs record's dimension differs from the first record."""

    def __init__(self, message: str, record: int, offset: int | None = None):
        super().__init__(f'{message} (record {record})', offset)
        self.record = record


class QueryError(MrqError):
    """Raised by batch search when a single query fails."""

    def __init__(self, query_index: int, cause: Exception):
        super().__init__(f'query {query_index}: {cause}')
        self.query_index = query_index
        self.cause = cause
