"""Exception types shared across the package."""


class MixExploreError(Exception):
    """Base class for all package errors."""

    code = "internal"


class SchemaError(MixExploreError):
    """Dataset schema is malformed or does not match the file."""

    code = "schema"


class ParseError(MixExploreError):
    """A cell could not be parsed; carries the offending data row."""

    code = "parse"

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(MixExploreError):
    """Input violates a documented precondition or invariant."""

    code = "validation"

    def __init__(self, message: str, field: str | None = None, row: int | None = None):
        super().__init__(message)
        self.field = field
        self.row = row


class NotFoundError(MixExploreError):
    """A record, session, or resource id does not exist."""

    code = "not_found"


class SessionBusyError(MixExploreError):
    """Another operation on the same session is still in flight."""

    code = "session_busy"
