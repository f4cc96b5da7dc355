"""Exception types shared across the toolkit."""


class ValidationError(ValueError):
    """Input violates a documented contract (bad geometry, malformed file, ...)."""


class ModelFormatError(ValueError):
    """Model file is unreadable or has an unsupported format version."""


class ModelMismatchError(ValueError):
    """Model and data disagree (missing feature column, wrong class set)."""
