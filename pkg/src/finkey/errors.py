"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented invariant."""


class TraceFormatError(ValidationError):
    """A trace or sample-table file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
