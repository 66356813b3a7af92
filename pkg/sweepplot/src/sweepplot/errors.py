"""Exceptions raised on bad input files; both are ValueError subclasses."""


class SchemaError(ValueError):
    """Version line or column header does not match the supported schema."""


class DataError(ValueError):
    """Schema matches but the rows are unusable (empty, malformed, all skipped)."""
