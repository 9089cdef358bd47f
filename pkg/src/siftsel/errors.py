"""Exception hierarchy shared across the package.

Every error carries enough context (row/column indices, byte counts, file
paths) for the CLI to print an actionable diagnostic and map the failure to
an exit code: input problems exit 2, numerical breakdowns exit 3.
"""

from __future__ import annotations


class SiftselError(Exception):
    """Base class for all package errors."""


class InputError(SiftselError):
    """Bad user input: shapes, values, files, parameters. CLI exit code 2."""


class DimensionMismatch(InputError):
    """Vectors/matrices that must share a dimension do not."""


class ZeroNormRow(InputError):
    """A row with Euclidean norm below 1e-12 where a unit direction is needed."""

    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row} has (near-)zero norm and cannot be normalized")


class NotEnoughCandidates(InputError):
    """More distinct rows requested than the candidate set contains."""


class NotAProbabilityVector(InputError):
    """Vector has negative entries or does not sum to 1 within tolerance."""


class InvalidParameter(InputError):
    """A scalar parameter outside its documented domain."""


class InstanceTooLarge(InputError):
    """Brute-force oracle invoked beyond its enumeration limits."""


class DegenerateVariance(InputError):
    """Posterior variance too close to zero for a log-based quantity."""


class NumericalFailure(SiftselError):
    """SPD solve failed even after jitter escalation, or a variance went
    negative beyond round-off tolerance. CLI exit code 3."""


class EmbeddingIOError(InputError):
    """Base class for embedding/selection file format errors."""


class BadMagic(EmbeddingIOError):
    """File does not start with the expected magic tag (or wrong version)."""


class TruncatedPayload(EmbeddingIOError):
    """Binary payload shorter than the header promises."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"payload truncated: expected {expected} bytes, found {actual}")


class NonFiniteValue(EmbeddingIOError):
    """NaN or Inf encountered in an embedding file."""

    def __init__(self, row: int, col: int):
        self.row = row
        self.col = col
        super().__init__(f"non-finite value at row {row}, column {col}")


class RaggedRow(EmbeddingIOError):
    """CSV row whose value count differs from the established dimension."""

    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row} has a different number of values than the first row")
