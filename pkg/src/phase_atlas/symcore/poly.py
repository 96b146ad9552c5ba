"""Sparse multivariate polynomials over Q on an ordered indeterminate list."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd as igcd
from typing import Iterable, Mapping, Sequence, Union

KINDS = ("state", "time", "parameter", "coefficient")

Scalar = Union[int, Fraction]


class ContextError(ValueError):
    """Raised when indeterminates clash or fall outside a context."""


@dataclass(frozen=True)
class Indeterminate:
    name: str
    kind: str = "state"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ContextError(f"unknown indeterminate kind {self.kind!r}")
        if not self.name.isidentifier():
            raise ContextError(f"bad indeterminate name {self.name!r}")

    def __str__(self) -> str:
        return self.name


class Context:
    """An ordered, interned list of indeterminates.

    Contexts with the same variable tuple are the same object, so identity
    comparison is enough on the hot paths.
    """

    __slots__ = ("vars", "names", "index", "__weakref__")
    _interned: dict[tuple[Indeterminate, ...], "Context"] = {}

    vars: tuple[Indeterminate, ...]
    names: tuple[str, ...]
    index: dict[str, int]

    def __new__(cls, variables: Iterable[Indeterminate] = ()):
        key = tuple(variables)
        hit = cls._interned.get(key)
        if hit is not None:
            return hit
        names = tuple(v.name for v in key)
        if len(set(names)) != len(names):
            raise ContextError(f"duplicate names in context: {names}")
        self = super().__new__(cls)
        self.vars = key
        self.names = names
        self.index = {n: i for i, n in enumerate(names)}
        cls._interned[key] = self
        return self

    @classmethod
    def build(cls, **groups: str | Sequence[str]) -> "Context":
        """``Context.build(state="x y z", time="t", parameter="a1 a2 a3")``."""
        out: list[Indeterminate] = []
        for kind, names in groups.items():
            if isinstance(names, str):
                names = names.split()
            out.extend(Indeterminate(n, kind) for n in names)
        return cls(out)

    def __len__(self) -> int:
        return len(self.vars)

    def __contains__(self, name: object) -> bool:
        if isinstance(name, Indeterminate):
            i = self.index.get(name.name)
            return i is not None and self.vars[i] == name
        return name in self.index

    def __repr__(self) -> str:
        return f"Context({' '.join(self.names)})"

    def var(self, name: str) -> Indeterminate:
        try:
            return self.vars[self.index[name]]
        except KeyError:
            raise ContextError(f"{name!r} not in {self!r}") from None

    def merge(self, other: "Context") -> "Context":
        if other is self:
            return self
        extra = []
        for v in other.vars:
            i = self.index.get(v.name)
            if i is None:
                extra.append(v)
            elif self.vars[i].kind != v.kind:
                raise ContextError(f"{v.name!r} has kinds {self.vars[i].kind} and {v.kind}")
        if not extra:
            return self
        return Context(self.vars + tuple(extra))

    def extend(self, variables: Iterable[Indeterminate]) -> "Context":
        return self.merge(Context(variables))


def _as_fraction(c: Scalar) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    raise TypeError(f"exact coefficient expected, got {type(c).__name__}")


def _grlex_key(e: tuple[int, ...]) -> tuple[int, tuple[int, ...]]:
    return (sum(e), e)


class Polynomial:
    """Immutable sparse polynomial: exponent tuple -> nonzero Fraction."""

    __slots__ = ("ctx", "terms", "_hash")

    def __init__(self, ctx: Context, terms: Mapping[tuple[int, ...], Fraction] | None = None):
        # Callers guarantee exact Fraction values, no zeros, and exponent arity len(ctx).
        self.ctx = ctx
        self.terms: dict[tuple[int, ...], Fraction] = dict(terms) if terms else {}
        self._hash: int | None = None

    # construction -----------------------------------------------------------
    @classmethod
    def constant(cls, ctx: Context, c: Scalar) -> "Polynomial":
        c = _as_fraction(c)
        if c == 0:
            return cls(ctx)
        return cls(ctx, {(0,) * len(ctx): c})

    @classmethod
    def variable(cls, ctx: Context, name: str | Indeterminate) -> "Polynomial":
        name = getattr(name, "name", name)
        i = ctx.index.get(name)
        if i is None:
            raise ContextError(f"{name!r} not in {ctx!r}")
        e = [0] * len(ctx)
        e[i] = 1
        return cls(ctx, {tuple(e): Fraction(1)})

    @classmethod
    def monomial(cls, ctx: Context, exps: Mapping[str, int], coeff: Scalar = 1) -> "Polynomial":
        e = [0] * len(ctx)
        for n, k in exps.items():
            e[ctx.index[n]] = k
        c = _as_fraction(coeff)
        return cls(ctx, {tuple(e): c} if c else {})

    # basic predicates ---------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        if not self.terms:
            return True
        if len(self.terms) > 1:
            return False
        (e,) = self.terms
        return not any(e)

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return next(iter(self.terms.values()), Fraction(0))

    def variables(self) -> set[str]:
        used = [0] * len(self.ctx)
        for e in self.terms:
            for i, k in enumerate(e):
                if k:
                    used[i] = 1
        return {self.ctx.names[i] for i, u in enumerate(used) if u}

    def sorted_terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        """Terms in descending graded-lex order; the canonical representation."""
        return sorted(self.terms.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True)

    def leading_term(self) -> tuple[tuple[int, ...], Fraction]:
        if not self.terms:
            raise ValueError("zero polynomial has no leading term")
        e = max(self.terms, key=_grlex_key)
        return e, self.terms[e]

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def degree(self, var: str | Indeterminate) -> int:
        i = self.ctx.index[getattr(var, "name", var)]
        return max((e[i] for e in self.terms), default=-1)

    # context handling ---------------------------------------------------------
    def lift(self, ctx: Context) -> "Polynomial":
        """Re-express in a context whose names cover every variable in use."""
        if ctx is self.ctx:
            return self
        n = len(ctx)
        pos = []
        for i, name in enumerate(self.ctx.names):
            j = ctx.index.get(name)
            pos.append(j)
        used = self.variables()
        for name in used:
            if name not in ctx.index:
                raise ContextError(f"{name!r} is used but not in {ctx!r}")
        out = {}
        for e, c in self.terms.items():
            ne = [0] * n
            for i, k in enumerate(e):
                if k:
                    ne[pos[i]] = k
            out[tuple(ne)] = c
        return Polynomial(ctx, out)

    def _coerce(self, other: object) -> tuple["Polynomial", "Polynomial"]:
        if isinstance(other, Polynomial):
            if other.ctx is self.ctx:
                return self, other
            ctx = self.ctx.merge(other.ctx)
            return self.lift(ctx), other.lift(ctx)
        if isinstance(other, (int, Fraction)):
            return self, Polynomial.constant(self.ctx, other)
        return NotImplemented  # type: ignore[return-value]

    # arithmetic ---------------------------------------------------------------
    def __neg__(self) -> "Polynomial":
        return Polynomial(self.ctx, {e: -c for e, c in self.terms.items()})

    def __add__(self, other: object) -> "Polynomial":
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        if len(a.terms) < len(b.terms):
            a, b = b, a
        out = dict(a.terms)
        for e, c in b.terms.items():
            s = out.get(e)
            if s is None:
                out[e] = c
            else:
                s += c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return Polynomial(a.ctx, out)

    __radd__ = __add__

    def __sub__(self, other: object) -> "Polynomial":
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        return pair[0] + (-pair[1])

    def __rsub__(self, other: object) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other: object) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return Polynomial(self.ctx)
            return Polynomial(self.ctx, {e: c * other for e, c in self.terms.items()})
        pair = self._coerce(other)
        if pair is NotImplemented:
            return NotImplemented
        a, b = pair
        out: dict[tuple[int, ...], Fraction] = {}
        get = out.get
        for ea, ca in a.terms.items():
            for eb, cb in b.terms.items():
                e = tuple([x + y for x, y in zip(ea, eb)])
                s = get(e)
                out[e] = ca * cb if s is None else s + ca * cb
        return Polynomial(a.ctx, {e: c for e, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise ValueError("polynomial exponent must be a nonnegative integer")
        result = Polynomial.constant(self.ctx, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def scale(self, c: Scalar) -> "Polynomial":
        return self * _as_fraction(c)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.ctx, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        if other.ctx is not self.ctx:
            a, b = self._coerce(other)
            return a.terms == b.terms
        return self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            names = self.ctx.names
            self._hash = hash(
                frozenset(
                    (frozenset((names[i], k) for i, k in enumerate(e) if k), c)
                    for e, c in self.terms.items()
                )
            )
        return self._hash

    # division -----------------------------------------------------------------
    def divmod(self, other: "Polynomial") -> tuple["Polynomial", "Polynomial"]:
        """Multivariate division by a single divisor in graded-lex order."""
        a, b = self._coerce(other)
        if b.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        lb, cb = b.leading_term()
        q: dict[tuple[int, ...], Fraction] = {}
        r: dict[tuple[int, ...], Fraction] = {}
        p = a
        while p.terms:
            lp, cp = p.leading_term()
            if all(x >= y for x, y in zip(lp, lb)):
                e = tuple(x - y for x, y in zip(lp, lb))
                c = cp / cb
                q[e] = c
                p = p - Polynomial(a.ctx, {e: c}) * b
            else:
                r[lp] = cp
                p = Polynomial(a.ctx, {e: c for e, c in p.terms.items() if e != lp})
        return Polynomial(a.ctx, q), Polynomial(a.ctx, r)

    def exact_div(self, other: "Polynomial") -> "Polynomial | None":
        """Quotient if ``other`` divides ``self`` exactly, else None."""
        a, b = self._coerce(other)
        if b.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        if b.is_constant():
            return a * (1 / b.constant_value())
        if a.is_zero():
            return a
        lb, cb = b.leading_term()
        if len(b.terms) == 1:
            out = {}
            for e, c in a.terms.items():
                d = tuple(x - y for x, y in zip(e, lb))
                if min(d) < 0:
                    return None
                out[d] = c / cb
            return Polynomial(a.ctx, out)
        q: dict[tuple[int, ...], Fraction] = {}
        p = a
        bd = b.total_degree()
        while p.terms:
            lp, cp = p.leading_term()
            if sum(lp) < bd:
                return None
            e = tuple(x - y for x, y in zip(lp, lb))
            if min(e) < 0:
                return None
            c = cp / cb
            q[e] = c
            p = p - Polynomial(a.ctx, {e: c}) * b
        return Polynomial(a.ctx, q)

    def __floordiv__(self, other: "Polynomial") -> "Polynomial":
        q = self.exact_div(other)
        if q is None:
            raise ValueError("inexact polynomial division")
        return q

    # coefficient views --------------------------------------------------------
    def coefficients_in(self, var: str | Indeterminate) -> dict[int, "Polynomial"]:
        """Split as sum_k c_k * var^k; each c_k is free of ``var``."""
        i = self.ctx.index[getattr(var, "name", var)]
        parts: dict[int, dict[tuple[int, ...], Fraction]] = {}
        for e, c in self.terms.items():
            k = e[i]
            parts.setdefault(k, {})[e[:i] + (0,) + e[i + 1:]] = c
        return {k: Polynomial(self.ctx, t) for k, t in parts.items()}

    def coefficient_of(self, monomial: Mapping[str, int]) -> "Polynomial":
        """Coefficient of a monomial in the named subset of variables.

        Variables not named in ``monomial`` are treated as coefficients;
        named variables must match the given exponent (absent means 0 only
        if explicitly listed).
        """
        idx = []
        for n, k in monomial.items():
            if n not in self.ctx.index:
                if k:
                    return Polynomial(self.ctx)
                continue
            idx.append((self.ctx.index[n], k))
        out = {}
        for e, c in self.terms.items():
            if all(e[i] == k for i, k in idx):
                ne = list(e)
                for i, _ in idx:
                    ne[i] = 0
                out[tuple(ne)] = c
        return Polynomial(self.ctx, out)

    def derivative(self, var: str | Indeterminate) -> "Polynomial":
        name = getattr(var, "name", var)
        i = self.ctx.index.get(name)
        if i is None:
            return Polynomial(self.ctx)
        out = {}
        for e, c in self.terms.items():
            k = e[i]
            if k:
                out[e[:i] + (k - 1,) + e[i + 1:]] = c * k
        return Polynomial(self.ctx, out)

    # content / primitive part --------------------------------------------------
    def rational_content(self) -> Fraction:
        """Positive rational c with self/c integral and primitive."""
        if not self.terms:
            return Fraction(0)
        num = 0
        den = 1
        for c in self.terms.values():
            num = igcd(num, c.numerator)
            den = den * c.denominator // igcd(den, c.denominator)
        return Fraction(num, den)

    def integral_primitive(self) -> "Polynomial":
        c = self.rational_content()
        if c in (0, 1):
            return self
        return self * (1 / c)

    def monic(self) -> "Polynomial":
        """Scale so the graded-lex leading coefficient is 1."""
        if not self.terms:
            return self
        _, c = self.leading_term()
        return self if c == 1 else self * (1 / c)

    # evaluation ---------------------------------------------------------------
    def evaluate(self, values: Mapping[str, object]):
        """Evaluate with every used variable bound (Fractions, floats, complex...)."""
        names = self.ctx.names
        total = 0
        for e, c in self.terms.items():
            term = c
            for i, k in enumerate(e):
                if k:
                    term = term * values[names[i]] ** k
            total = total + term
        return total

    def partial_evaluate(self, values: Mapping[str, Scalar]) -> "Polynomial":
        """Exact specialisation of some variables to rational numbers."""
        idx = [(self.ctx.index[n], _as_fraction(v)) for n, v in values.items() if n in self.ctx.index]
        out: dict[tuple[int, ...], Fraction] = {}
        for e, c in self.terms.items():
            ne = list(e)
            for i, v in idx:
                if e[i]:
                    c = c * v ** e[i]
                    ne[i] = 0
            if c:
                key = tuple(ne)
                s = out.get(key, 0) + c
                if s:
                    out[key] = s
                else:
                    out.pop(key, None)
        return Polynomial(self.ctx, out)

    # printing -----------------------------------------------------------------
    def _monomial_str(self, e: tuple[int, ...]) -> str:
        parts = []
        for n, k in zip(self.ctx.names, e):
            if k == 1:
                parts.append(n)
            elif k:
                parts.append(f"{n}^{k}")
        return "*".join(parts)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        out = []
        for j, (e, c) in enumerate(self.sorted_terms()):
            mono = self._monomial_str(e)
            neg = c < 0
            a = -c if neg else c
            if mono and a == 1:
                body = mono
            elif mono:
                body = f"{a}*{mono}"
            else:
                body = str(a)
            if j == 0:
                out.append(f"-{body}" if neg else body)
            else:
                out.append(f" - {body}" if neg else f" + {body}")
        return "".join(out)

    def __repr__(self) -> str:
        return f"Polynomial({self})"
