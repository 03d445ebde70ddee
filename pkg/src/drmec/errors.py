"""Exception hierarchy shared by the solver, validation and CLI layers."""

from __future__ import annotations

from typing import Any


class DrmecError(Exception):
    """Base class for all package errors."""


class DomainError(DrmecError, ValueError):
    """An input is non-finite, has the wrong sign, or violates an invariant."""


class ShapeError(DomainError):
    """Array lengths disagree with each other or with the scenario."""


class InfeasibleError(DrmecError):
    """No admissible power meets a delay constraint.

    ``constraint`` names the offending constraint, e.g. ``"lower[3]"`` or
    ``"upper"``.
    """

    def __init__(self, message: str, constraint: str | None = None):
        super().__init__(message)
        self.constraint = constraint


class NumericError(DrmecError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, iterate: Any = None, residuals: dict | None = None):
        super().__init__(message)
        self.iterate = iterate
        self.residuals = residuals or {}


class CapacityError(DrmecError):
    """The instance is too large for exhaustive enumeration."""
