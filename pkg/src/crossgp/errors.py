"""Exception hierarchy.

``CrossGPError`` subclasses signal bad input or a failed numerical contract;
the CLI maps them to exit code 1. Plain ``OSError`` maps to exit code 2.
"""

from __future__ import annotations


class CrossGPError(Exception):
    """Base class for validation and numerical errors."""


class MalformedRow(CrossGPError):
    def __init__(self, file: str, line: int, reason: str) -> None:
        super().__init__(f"{file}:{line}: malformed row ({reason})")
        self.file = file
        self.line = line
        self.reason = reason


class OutOfRange(CrossGPError):
    def __init__(self, file: str, line: int, reason: str = "") -> None:
        msg = f"{file}:{line}: value out of range"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.file = file
        self.line = line
        self.reason = reason


class EmptyDay(CrossGPError):
    pass


class InsufficientCoverage(CrossGPError):
    def __init__(self, subject: str, date, cgm_count: int) -> None:
        super().__init__(f"{subject} {date}: only {cgm_count} CGM readings")
        self.subject = subject
        self.date = date
        self.cgm_count = cgm_count


class DomainError(CrossGPError):
    pass


class DegenerateFeature(CrossGPError):
    def __init__(self, name: str) -> None:
        super().__init__(f"feature {name!r} has zero variance on the training set")
        self.name = name


class NonFinite(CrossGPError):
    def __init__(self, where: str, step: int) -> None:
        super().__init__(f"non-finite parameters at {where} {step}")
        self.where = where
        self.step = step


class ShapeError(CrossGPError):
    pass


class EmptyTestSet(CrossGPError):
    pass


class Unsupported(CrossGPError):
    pass


class ConfigError(CrossGPError):
    pass
