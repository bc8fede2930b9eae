"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class MgrxError(Exception):
    """Base class for all errors raised by :mod:`mgrx`."""


class InvalidDimsError(MgrxError, ValueError):
    pass


class DepthExceededError(MgrxError, ValueError):
    pass


class InvalidLevelError(MgrxError, ValueError):
    pass


class InvalidAxisError(MgrxError, ValueError):
    pass


class ShapeError(MgrxError, ValueError):
    pass


class DegenerateLineError(MgrxError, ValueError):
    pass


class DegenerateSystemError(MgrxError, ValueError):
    pass


class InvalidBudgetError(MgrxError, ValueError):
    pass


class NonFiniteDataError(MgrxError, ValueError):
    """Raised when input data holds NaN or infinity.

    ``offset`` is the flat index of the first offending element.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class InvalidInputError(MgrxError, ValueError):
    pass


class UndefinedPsnrError(MgrxError, ValueError):
    pass


class DecodeError(MgrxError):
    """Raised for any malformed encoded payload."""


class NotAnArtifactError(DecodeError):
    pass


class UnsupportedVersionError(DecodeError):
    pass


class CorruptArtifactError(DecodeError):
    pass


def check_finite(values) -> None:
    """Raise :class:`NonFiniteDataError` naming the first non-finite offset."""
    import numpy as np

    flat = np.asarray(values).reshape(-1)
    bad = ~np.isfinite(flat)
    if bad.any():
        offset = int(np.argmax(bad))
        raise NonFiniteDataError(
            f"non-finite value {float(flat[offset])} at element offset {offset}", offset
        )
