"""Exception types shared across the package."""


class MinkowskiError(Exception):
    """Base class for all package errors."""


class PreconditionError(MinkowskiError):
    """A hypothesis required by a solver or check is not met.

    ``hypothesis`` names the failing condition so callers (and the CLI) can
    report a structured refusal.
    """

    def __init__(self, message, hypothesis=None, detail=None):
        super().__init__(message)
        self.hypothesis = hypothesis or "unspecified"
        self.detail = detail or {}


class InfiniteMassError(MinkowskiError):
    pass


class OutOfRangeError(MinkowskiError, ValueError):
    pass


class UnboundedBodyError(MinkowskiError):
    pass


class DegenerateBodyError(MinkowskiError):
    pass


class SchemaError(MinkowskiError):
    """Problem/report file does not match the schema.

    ``field`` is a dotted path (``nu.rows[3]``) to the offending entry.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
