"""Exception types shared across the package."""

from __future__ import annotations


class CycloSenseError(Exception):
    """Base class for every error raised by cyclosense."""


class InvalidInput(CycloSenseError, ValueError):
    """An argument violates a documented precondition."""


class ShapeError(InvalidInput):
    """Array shapes passed to a layer or kernel do not agree."""


class NumericalError(CycloSenseError, ArithmeticError):
    """A NaN or infinity appeared where finite values are required."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class FormatError(CycloSenseError, ValueError):
    """A file on disk is malformed, truncated or of an unknown version."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
