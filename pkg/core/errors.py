"""
Checker Errors
==============
Exception hierarchy shared by the parser, typechecker, evaluator and kernel.

Input problems subclass ValueError so callers can keep a single
``except ValueError`` branch for "bad machine / bad option" cases.
"""

from typing import Any, Optional

from .model import pretty


class CheckerError(Exception):
    """Base class for all deadlock checker errors."""


class MachineSyntaxError(CheckerError, ValueError):
    """Raised when a machine or predicate text does not match the grammar."""

    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)


class DuplicateDeclarationError(MachineSyntaxError):
    """Raised when an identifier, label, event or sort element is declared twice."""


class TypeCheckError(CheckerError, ValueError):
    """Raised for type mismatches, unknown identifiers and malformed machines."""

    def __init__(self, message: str, where: Optional[str] = None):
        self.where = where
        if where:
            message = f"{message} [{where}]"
        super().__init__(message)


class NotAtomicError(CheckerError, ValueError):
    """Raised when an atomic predicate was expected."""


class EvaluationError(CheckerError):
    """Raised when the ground evaluator cannot compute a value."""


class KernelError(CheckerError):
    """Raised when the constraint kernel cannot represent a domain."""


class WDError(CheckerError):
    """
    Well-definedness failure (division or modulo by zero).

    Attributes:
        expr: the offending sub-expression
        atom: the enclosing atomic predicate, when known
    """

    def __init__(self, expr: Any, atom: Any = None):
        self.expr = expr
        self.atom = atom
        super().__init__(self._describe())

    def _describe(self) -> str:
        text = f"well-definedness error: {pretty(self.expr)} divides by zero"
        if self.atom is not None:
            text += f" in {pretty(self.atom)}"
        return text

    def with_atom(self, atom: Any) -> "WDError":
        """Return a copy that records the enclosing atom (first one wins)."""
        if self.atom is not None:
            return self
        return WDError(self.expr, atom)
