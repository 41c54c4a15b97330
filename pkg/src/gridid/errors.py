"""Exception types shared across the package."""
from __future__ import annotations


class GridIdError(Exception):
    """Base class for every error raised by this package."""


class ParseError(GridIdError):
    """Malformed input text. Carries the 1-based line and column when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class ValidationError(GridIdError):
    """Structurally valid input that violates a semantic precondition."""


class MeasurementError(GridIdError):
    """Measurement set unusable for the requested operation."""


class PowerFlowError(GridIdError):
    """Newton iteration did not reach the mismatch tolerance."""

    def __init__(self, message: str, mismatch: float, iterations: int):
        self.mismatch = mismatch
        self.iterations = iterations
        super().__init__(f"{message} (max mismatch {mismatch:.3e} after {iterations} iterations)")


class EstimationError(GridIdError):
    """Identification problem malformed (empty data, dimension mismatch)."""


class KronError(GridIdError):
    """Reduction rejected: hidden block singular or input malformed."""


class RecoveryError(GridIdError):
    """Radial recovery failed at a named stage."""

    def __init__(self, message: str, stage: str, clique: tuple[int, ...] | None = None):
        self.stage = stage
        self.clique = clique
        detail = f" [stage: {stage}" + (f", clique {sorted(clique)}" if clique else "") + "]"
        super().__init__(message + detail)
