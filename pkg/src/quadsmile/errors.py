"""Exception hierarchy for the quadsmile library.

Every error raised by the library derives from :class:`QuadSmileError` so that
callers (and the CLI) can distinguish library failures from programming bugs.
"""

from __future__ import annotations


class QuadSmileError(Exception):
    """Base class for all quadsmile errors."""


class OutOfDomainError(QuadSmileError):
    """An evaluation point lies outside the model domain ``[lower, upper]``."""


class InvalidLocalVarianceError(QuadSmileError):
    """A local-variance function violates its preconditions.

    Raised when knots are not strictly increasing, a piece interval is
    degenerate, or the local-variance value is not strictly positive
    somewhere on its interval.
    """


class SingularSystemError(QuadSmileError):
    """The coefficient system could not be solved to acceptable accuracy."""


class DenominatorNearZeroError(QuadSmileError):
    """The smooth-density update has a vanishing linear coefficient."""


class NonPositiveParameterError(QuadSmileError):
    """A solved parameter that must stay positive came out non-positive."""


class ArbitrageViolationError(QuadSmileError):
    """An option price is at or below its intrinsic lower bound."""


class PriceOutOfBoundsError(QuadSmileError):
    """An option price violates its model-free upper bound."""


class InvalidQuotesError(QuadSmileError):
    """A quote set violates its schema (ordering, positivity, duplicates)."""


class ParseError(QuadSmileError):
    """A quote file could not be parsed."""


class MissingMetadataError(ParseError):
    """A quote file lacks a required metadata key (forward or maturity)."""


class InvalidStrategyError(QuadSmileError):
    """A knot-placement strategy cannot be applied to the given strikes."""


class NonFiniteResidualError(QuadSmileError):
    """The least-squares residual is not finite at the starting point."""
