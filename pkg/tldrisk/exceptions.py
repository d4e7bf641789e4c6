class TldrError(Exception):
    """Base class for other exceptions"""
    pass

class DocumentParseError(TldrError):
    """A data document is not valid JSON, or does not match its schema."""
    pass

class IntegrityError(TldrError):
    """A document parsed, but breaks a uniqueness or mapping rule."""
    pass

class NotFoundError(TldrError, KeyError):
    """A lookup by id missed. The missing id is kept on `key`."""
    def __init__(self, message: str, key=None):
        super().__init__(message)
        self.key = key

    def __str__(self):
        # KeyError would otherwise quote the whole message.
        return str(self.args[0])

class CoverageError(TldrError):
    """Subjects, aspects or pattern scores are missing or unexpected."""
    def __init__(self, message: str, missing=(), extra=()):
        super().__init__(message)
        self.missing = sorted(missing)
        self.extra = sorted(extra)

class EmptyPanelError(TldrError):
    pass

class ScoreRangeError(TldrError, ValueError):
    pass

class DegenerateInputError(TldrError, ValueError):
    """Statistic is undefined for the given input (e.g. constant vectors)."""
    pass

class AfdValidationError(TldrError):
    """Raised when an operation needs a valid diagram and gets an invalid one."""
    def __init__(self, message: str, issues=()):
        super().__init__(message)
        self.issues = list(issues)

class ConvergenceError(TldrError):
    pass

class LengthMismatchError(TldrError, ValueError):
    """Paired vectors have different lengths."""
    pass
