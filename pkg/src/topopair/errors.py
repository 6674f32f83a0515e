"""Exception types shared across the toolkit."""

from __future__ import annotations


class TopopairError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TopopairError):
    """A trajectory or data file could not be parsed.

    Carries the file path and 1-based line number of the offending line
    when known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:"
            if line is not None:
                prefix += f"{line}:"
            prefix += " "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)


class ValidationError(TopopairError):
    """An input violates a documented precondition or invariant."""


class DegenerateGeometryError(ValidationError):
    """A geometric configuration admits no unique solution.

    Raised e.g. for collinear points when fitting an affine transform, or
    for coincident points when fitting a similarity or a spline.
    """


class GenerationError(TopopairError):
    """Synthetic data generation could not satisfy its constraints."""


class NotFoundError(TopopairError):
    """A referenced session, match, or artifact does not exist."""


class VersionConflictError(TopopairError):
    """An optimistic-concurrency version check failed."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"version conflict: submitted against version {expected}, "
            f"current version is {actual}"
        )


class StateError(TopopairError):
    """An operation is not allowed in the session's current lifecycle state."""
