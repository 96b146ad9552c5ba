"""Recursive-descent parser for rational expressions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' nat)?
    base   := ident | number | '(' expr ')'

Unary minus binds looser than ``^`` so that ``-x^2`` means ``-(x^2)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .poly import Context
from .rational import RationalExpr, ZeroDenominatorError


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.line = line
        self.col = col


class UndeclaredIdentifier(ParseError):
    pass


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")


@dataclass
class _Tok:
    kind: str  # num, ident, op, end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        if m.group(1) is not None:
            out.append(_Tok("num", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            out.append(_Tok("ident", m.group(2), m.start(2)))
        elif m.group(3) is not None:
            out.append(_Tok("op", m.group(3), m.start(3)))
        pos = m.end()
    out.append(_Tok("end", "", len(text.rstrip()) if text.strip() else 0))
    return out


class _Parser:
    def __init__(self, text: str, ctx: Context):
        self.text = text
        self.ctx = ctx
        self.toks = _tokenize(text)
        self.i = 0

    def where(self, pos: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, msg: str, tok: _Tok, cls=ParseError) -> ParseError:
        return cls(msg, *self.where(tok.pos))

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, op: str) -> None:
        t = self.take()
        if t.kind != "op" or t.text != op:
            raise self.error(f"expected {op!r}, found {t.text or 'end of input'!r}", t)

    def parse(self) -> RationalExpr:
        if self.tok.kind == "end":
            raise self.error("empty expression", self.tok)
        e = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}", self.tok)
        return e

    def expr(self) -> RationalExpr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> RationalExpr:
        e = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            optok = self.take()
            rhs = self.factor()
            if optok.text == "*":
                e = e * rhs
            else:
                if rhs.is_zero():
                    raise self.error("division by the zero polynomial", optok, ParseError)
                e = e / rhs
        return e

    def factor(self) -> RationalExpr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            return -self.factor()
        b = self.base()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            t = self.take()
            if t.kind != "num":
                raise self.error("exponent must be a nonnegative integer literal", t)
            b = b ** int(t.text)
        return b

    def base(self) -> RationalExpr:
        t = self.take()
        if t.kind == "num":
            return RationalExpr.const(self.ctx, Fraction(int(t.text)))
        if t.kind == "ident":
            if t.text not in self.ctx.index:
                raise self.error(f"undeclared identifier {t.text!r}", t, UndeclaredIdentifier)
            return RationalExpr.var(self.ctx, t.text)
        if t.kind == "op" and t.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise self.error(f"unexpected {t.text or 'end of input'!r}", t)


def parse_expression(text: str, ctx: Context) -> RationalExpr:
    """Parse ``text`` into a normalised RationalExpr over ``ctx``."""
    try:
        return _Parser(text, ctx).parse()
    except ZeroDenominatorError as exc:
        raise ParseError(f"division by the zero polynomial ({exc})", 1, 1) from None
