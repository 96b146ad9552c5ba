"""Exact rational-function algebra over Q with named indeterminates."""

from .gcd import poly_gcd
from .parser import ParseError, UndeclaredIdentifier, parse_expression
from .poly import Context, ContextError, Indeterminate, Polynomial
from .rational import RationalExpr, ZeroDenominatorError, equals

__all__ = [
    "Context",
    "ContextError",
    "Indeterminate",
    "ParseError",
    "Polynomial",
    "RationalExpr",
    "UndeclaredIdentifier",
    "ZeroDenominatorError",
    "equals",
    "parse_expression",
    "poly_gcd",
]
