"""Exception hierarchy. Every user-facing error carries a source position when one exists."""

from __future__ import annotations


class AlloySmtError(Exception):
    """Base class for all errors raised by this package."""


class SourceError(AlloySmtError):
    """An error anchored to a position in the input text."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class LexError(SourceError):
    pass


class ParseError(SourceError):
    def __init__(self, message: str, line: int, col: int, expected: frozenset[str] = frozenset()):
        if expected:
            message = f"{message} (expected one of: {', '.join(sorted(expected))})"
        super().__init__(message, line, col)
        self.expected = expected


class FeatureOutOfScope(ParseError):
    """An Alloy construct outside the supported subset."""

    def __init__(self, construct: str, line: int, col: int):
        super().__init__(f"feature out of scope: {construct}", line, col)
        self.construct = construct


class ResolveError(SourceError):
    """Name-resolution or type/arity error."""


class ScopeError(AlloySmtError):
    """Finitization planning failed, e.g. a closure type has no bound."""

    def __init__(self, message: str, missing: tuple[str, ...] = ()):
        super().__init__(message)
        self.missing = missing


class TranslationError(AlloySmtError):
    pass


class SolverNotFoundError(AlloySmtError):
    pass


class SolverOutputError(AlloySmtError):
    """Solver produced no parseable verdict; carries the raw output."""

    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}\n--- raw solver output ---\n{raw}")
        self.raw = raw


class ModelParseError(SolverOutputError):
    pass


class OracleCapacityError(AlloySmtError):
    """The enumeration state space exceeds the configured ceiling."""

    def __init__(self, estimate: int, ceiling: int):
        super().__init__(
            f"oracle refuses: estimated {estimate} candidate instances exceeds ceiling {ceiling}"
        )
        self.estimate = estimate
        self.ceiling = ceiling
