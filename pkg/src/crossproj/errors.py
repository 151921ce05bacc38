"""Exception types shared across the package.

ParseError covers anything wrong with bytes on disk (bad magic, truncated
body, malformed text); ValidationError covers in-memory contract violations
(bad shapes, non-finite values, inconsistent dimensions).  The CLI maps them
to distinct exit codes.
"""


class CrossProjError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CrossProjError):
    """A file could not be read: missing, malformed, or truncated."""


class ValidationError(CrossProjError):
    """Input data violates a documented invariant."""
