"""Shared exception types for the mso2mpa package."""

from __future__ import annotations


class Mso2MpaError(Exception):
    """Base class for all package-specific errors."""


class ParseError(Mso2MpaError):
    """Raised on malformed input text; carries 1-based line/column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnboundVariableError(Mso2MpaError):
    """A variable is used outside any binder or with the wrong kind."""


class TreeError(Mso2MpaError):
    """Base class for tree validation failures; carries offending node ids."""

    def __init__(self, message: str, nodes=()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class MultipleRootsError(TreeError):
    pass


class CycleError(TreeError):
    pass


class UnreachableError(TreeError):
    pass


class DuplicateParentError(TreeError):
    pass


class UnknownNodeError(TreeError):
    pass


class BudgetExceededError(Mso2MpaError):
    """An enumeration or search exceeded its configured budget."""


class StateBudgetExceededError(BudgetExceededError):
    """A lazily materialized automaton grew past its state budget."""


class SizeLimitError(Mso2MpaError):
    """An exact oracle was asked to handle a structure above its size cap."""


class HorizonExceededError(Mso2MpaError):
    """A run did not stabilize within the round limit; carries the partial trace."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class UndecidableError(Mso2MpaError):
    """Neither stabilization nor a configuration cycle was found in time."""


class MissingTransitionError(Mso2MpaError):
    """The transition table has no entry for an encountered label set."""


class EmptyInitError(Mso2MpaError):
    """A nondeterministic automaton ended up with an empty initial choice set."""


class SystemTooSmallError(Mso2MpaError):
    """The floating-point system cannot represent a required value."""


class UnsupportedProgramError(Mso2MpaError):
    """A recursive rule program is outside the fragment the translator handles."""
