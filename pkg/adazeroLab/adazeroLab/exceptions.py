from __future__ import annotations

from typing import Any, Optional


class AdaZeroError(Exception):
    """Base class for every error raised by the lab."""


class ContractViolation(AdaZeroError, ValueError):
    """
    A caller broke a precondition: wrong shape, value out of range,
    stepping a finished episode, backward without forward, and so on.
    These are bugs in the calling code, not numerical accidents.
    """


class TrainingHalted(AdaZeroError, RuntimeError):
    """
    A loss or gradient went non-finite. Training stops with a diagnostic
    describing where it happened.
    """

    def __init__(self, message: str, diagnostic: Optional[dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.diagnostic = dict(diagnostic or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostic:
            return base
        details = ", ".join(f"{key}={value!r}" for key, value in self.diagnostic.items())
        return f"{base} ({details})"


class HarnessError(AdaZeroError):
    """Artifact-level failure: missing run files, empty density, incompatible logs."""
