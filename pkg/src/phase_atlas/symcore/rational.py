"""Exact rational functions with a canonical (reduced, monic-denominator) form."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Union

from .gcd import content_in, poly_gcd
from .poly import Context, ContextError, Indeterminate, Polynomial, Scalar


class ZeroDenominatorError(ZeroDivisionError):
    """An operation would put the zero polynomial in a denominator."""


Operand = Union["RationalExpr", Polynomial, int, Fraction]


class RationalExpr:
    """numerator / denominator, coprime, denominator leading coefficient 1."""

    __slots__ = ("num", "den")

    num: Polynomial
    den: Polynomial

    def __init__(self, num: Polynomial, den: Polynomial | None = None, *, reduced: bool = False):
        if den is None:
            self.num, self.den = num, Polynomial.constant(num.ctx, 1)
            return
        if den.is_zero():
            raise ZeroDenominatorError("denominator is the zero polynomial")
        if num.ctx is not den.ctx:
            ctx = num.ctx.merge(den.ctx)
            num, den = num.lift(ctx), den.lift(ctx)
        if num.is_zero():
            self.num, self.den = num, Polynomial.constant(num.ctx, 1)
            return
        if not reduced and not den.is_constant():
            g = poly_gcd(num, den)
            if not g.is_constant():
                num, den = num // g, den // g
        _, lc = den.leading_term()
        if lc != 1:
            num, den = num * (1 / lc), den * (1 / lc)
        self.num, self.den = num, den

    # constructors -------------------------------------------------------------
    @classmethod
    def const(cls, ctx: Context, c: Scalar) -> "RationalExpr":
        return cls(Polynomial.constant(ctx, c))

    @classmethod
    def var(cls, ctx: Context, name: str | Indeterminate) -> "RationalExpr":
        return cls(Polynomial.variable(ctx, name))

    @property
    def ctx(self) -> Context:
        return self.num.ctx

    def _wrap(self, other: Operand) -> "RationalExpr":
        if isinstance(other, RationalExpr):
            return other
        if isinstance(other, Polynomial):
            return RationalExpr(other)
        if isinstance(other, (int, Fraction)):
            return RationalExpr.const(self.ctx, other)
        raise TypeError(f"cannot combine RationalExpr with {type(other).__name__}")

    def _aligned(self, other: Operand) -> tuple["RationalExpr", "RationalExpr"]:
        o = self._wrap(other)
        if o.ctx is self.ctx:
            return self, o
        ctx = self.ctx.merge(o.ctx)
        return self.lift(ctx), o.lift(ctx)

    def lift(self, ctx: Context) -> "RationalExpr":
        if ctx is self.ctx:
            return self
        # Reordering variables can change which denominator term leads.
        return RationalExpr(self.num.lift(ctx), self.den.lift(ctx), reduced=True)

    def in_context(self, ctx: Context) -> "RationalExpr":
        """Move into ``ctx``; raises ContextError if a used variable is missing."""
        return self.lift(ctx)

    # predicates ---------------------------------------------------------------
    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.is_constant()

    def is_constant(self) -> bool:
        return self.den.is_constant() and self.num.is_constant()

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"{self} is not constant")
        return self.num.constant_value() / self.den.constant_value()

    def variables(self) -> set[str]:
        return self.num.variables() | self.den.variables()

    def is_polynomial_in(self, names) -> bool:
        """True iff the denominator involves none of ``names``."""
        names = {getattr(n, "name", n) for n in names}
        return not (self.den.variables() & names)

    def as_polynomial(self) -> Polynomial:
        if not self.den.is_constant():
            raise ValueError(f"{self} is not a polynomial")
        return self.num * (1 / self.den.constant_value())

    # arithmetic ---------------------------------------------------------------
    def __neg__(self) -> "RationalExpr":
        return RationalExpr(-self.num, self.den, reduced=True)

    def __add__(self, other: Operand) -> "RationalExpr":
        a, b = self._aligned(other)
        if b.is_zero():
            return a
        if a.is_zero():
            return b
        if a.den == b.den:
            return RationalExpr(a.num + b.num, a.den)
        if a.den.is_constant() or b.den.is_constant():
            return RationalExpr(a.num * b.den + b.num * a.den, a.den * b.den)
        g = poly_gcd(a.den, b.den)
        da, db = a.den // g, b.den // g
        num = a.num * db + b.num * da
        if num.is_zero():
            return RationalExpr(num)
        g2 = poly_gcd(num, g)
        return RationalExpr(num // g2, da * db * (g // g2), reduced=True)

    __radd__ = __add__

    def __sub__(self, other: Operand) -> "RationalExpr":
        return self + (-self._wrap(other))

    def __rsub__(self, other: Operand) -> "RationalExpr":
        return (-self) + other

    def __mul__(self, other: Operand) -> "RationalExpr":
        a, b = self._aligned(other)
        if a.is_zero() or b.is_zero():
            return RationalExpr(Polynomial(a.ctx))
        g1 = poly_gcd(a.num, b.den)
        g2 = poly_gcd(b.num, a.den)
        return RationalExpr(
            (a.num // g1) * (b.num // g2), (a.den // g2) * (b.den // g1), reduced=True
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "RationalExpr":
        if self.is_zero():
            raise ZeroDenominatorError("division by the zero expression")
        return RationalExpr(self.den, self.num, reduced=True)

    def __truediv__(self, other: Operand) -> "RationalExpr":
        return self * self._wrap(other).reciprocal()

    def __rtruediv__(self, other: Operand) -> "RationalExpr":
        return self._wrap(other) * self.reciprocal()

    def __pow__(self, k: int) -> "RationalExpr":
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        return RationalExpr(self.num**k, self.den**k, reduced=True)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, (RationalExpr, Polynomial, int, Fraction)):
            return NotImplemented
        return equals(self, other)

    def __hash__(self) -> int:
        # Canonical forms in different contexts differ by a scalar at most.
        return hash((frozenset(self.variables()), len(self.num.terms), len(self.den.terms)))

    # calculus and substitution -----------------------------------------------
    def diff(self, var: str | Indeterminate) -> "RationalExpr":
        name = getattr(var, "name", var)
        dn = self.num.derivative(name)
        dd = self.den.derivative(name)
        if dd.is_zero():
            return RationalExpr(dn, self.den)
        # Factors of the denominator free of ``var`` would otherwise cancel
        # against the numerator only through an expensive gcd.
        c = content_in(self.den, name)
        d = self.den // c if not c.is_constant() else self.den
        return RationalExpr(dn * d - self.num * d.derivative(name), c * d * d)

    def substitute(self, bindings: Mapping[str | Indeterminate, Operand]) -> "RationalExpr":
        if not bindings:
            return self
        b = {getattr(k, "name", k): self._wrap(v) for k, v in bindings.items()}
        n = substitute_polynomial(self.num, b)
        d = substitute_polynomial(self.den, b)
        if d.is_zero():
            raise ZeroDenominatorError(f"substitution makes the denominator of {self} vanish")
        return n / d

    def partial_evaluate(self, values: Mapping[str, Scalar]) -> "RationalExpr":
        d = self.den.partial_evaluate(values)
        if d.is_zero():
            raise ZeroDenominatorError(f"specialisation makes the denominator of {self} vanish")
        return RationalExpr(self.num.partial_evaluate(values), d)

    def evaluate(self, values: Mapping[str, object]):
        d = self.den.evaluate(values)
        if d == 0:
            raise ZeroDenominatorError(f"{self} has a pole at the given point")
        return self.num.evaluate(values) / d

    # printing -----------------------------------------------------------------
    def __str__(self) -> str:
        if self.den.is_constant():
            return str(self.num)
        return f"({self.num})/({self.den})"

    def __repr__(self) -> str:
        return f"RationalExpr({self})"


def equals(a: Operand, b: Operand) -> bool:
    """Exact equality by cross-multiplication."""
    if not isinstance(a, RationalExpr):
        if isinstance(b, RationalExpr):
            a, b = b, a
        else:
            a = RationalExpr(a) if isinstance(a, Polynomial) else a
            if not isinstance(a, RationalExpr):
                return a == b
    b = a._wrap(b)
    if a.ctx is b.ctx:
        if a.num == b.num and a.den == b.den:
            return True
    return (a.num * b.den - b.num * a.den).is_zero()


def substitute_polynomial(p: Polynomial, bindings: Mapping[str, RationalExpr]) -> RationalExpr:
    """Simultaneous substitution into a polynomial over a common denominator."""
    ctx = p.ctx
    active = [(ctx.index[n], v) for n, v in bindings.items() if n in ctx.index]
    if not active:
        return RationalExpr(p)
    out_ctx = ctx
    for _, v in active:
        out_ctx = out_ctx.merge(v.ctx)
    top = {i: 0 for i, _ in active}
    for e in p.terms:
        for i in top:
            if e[i] > top[i]:
                top[i] = e[i]
    # powers[i][k] = num^k * den^(top-k)
    powers: dict[int, list[Polynomial]] = {}
    den = Polynomial.constant(out_ctx, 1)
    for i, v in active:
        n, d = v.num.lift(out_ctx), v.den.lift(out_ctx)
        m = top[i]
        npow = [Polynomial.constant(out_ctx, 1)]
        for _ in range(m):
            npow.append(npow[-1] * n)
        if d.is_constant():
            dc = d.constant_value()
            powers[i] = [npow[k] * (dc ** (m - k)) for k in range(m + 1)]
        else:
            dpow = [Polynomial.constant(out_ctx, 1)]
            for _ in range(m):
                dpow.append(dpow[-1] * d)
            powers[i] = [npow[k] * dpow[m - k] for k in range(m + 1)]
        den = den * (d**m)
    bound = set(top)
    # Map old indices to new ones for the unbound part of each monomial.
    remap = {i: out_ctx.index[ctx.names[i]] for i in range(len(ctx))}
    total = Polynomial(out_ctx)
    groups: dict[tuple[int, ...], dict[tuple[int, ...], Fraction]] = {}
    for e, c in p.terms.items():
        key = tuple(e[i] for i, _ in active)
        rest = [0] * len(out_ctx)
        for i, k in enumerate(e):
            if k and i not in bound:
                rest[remap[i]] = k
        groups.setdefault(key, {})[tuple(rest)] = c
    for key, rest_terms in groups.items():
        prod = Polynomial(out_ctx, rest_terms)
        for (i, _), k in zip(active, key):
            prod = prod * powers[i][k]
        total = total + prod
    if den.is_zero():
        raise ZeroDenominatorError("a substituted value has a zero denominator")
    return RationalExpr(total, den)


def coerce_context(ctx: Context, exprs) -> list[RationalExpr]:
    """Lift a sequence of expressions into one context, checking coverage."""
    out = []
    for e in exprs:
        try:
            out.append(e.lift(ctx))
        except ContextError as exc:
            raise ContextError(f"{e} does not fit {ctx!r}: {exc}") from None
    return out
