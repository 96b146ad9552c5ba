"""Exact linear algebra and elimination helpers over Q."""

from __future__ import annotations

from fractions import Fraction
from math import isqrt
from typing import Sequence

from .poly import Polynomial


def rref(rows: Sequence[Sequence[Fraction]], ncols: int) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form; returns (rows, pivot columns)."""
    m = [list(map(Fraction, r)) for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def nullspace(rows: Sequence[Sequence[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of {v : A v = 0}, one vector per free column."""
    red, pivots = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(red, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def det_bareiss(mat: list[list[Polynomial]]) -> Polynomial:
    """Fraction-free determinant of a square polynomial matrix."""
    n = len(mat)
    if n == 0:
        raise ValueError("empty matrix")
    ctx = mat[0][0].ctx
    m = [row[:] for row in mat]
    sign = 1
    prev = Polynomial.constant(ctx, 1)
    for k in range(n - 1):
        if m[k][k].is_zero():
            swap = next((i for i in range(k + 1, n) if not m[i][k].is_zero()), None)
            if swap is None:
                return Polynomial(ctx)
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            m[i][k] = Polynomial(ctx)
        prev = m[k][k]
    return m[n - 1][n - 1] * sign


def resultant(a: Polynomial, b: Polynomial, var: str) -> Polynomial:
    """Sylvester resultant of ``a`` and ``b`` with respect to ``var``."""
    ctx = a.ctx.merge(b.ctx)
    a, b = a.lift(ctx), b.lift(ctx)
    m, n = a.degree(var), b.degree(var)
    if m < 0 or n < 0:
        return Polynomial(ctx)
    if m == 0:
        return a**n
    if n == 0:
        return b**m
    ca, cb = a.coefficients_in(var), b.coefficients_in(var)
    zero = Polynomial(ctx)
    size = m + n
    rows = []
    for i in range(n):
        row = [zero] * size
        for k in range(m + 1):
            row[i + m - k] = ca.get(k, zero)
        rows.append(row)
    for i in range(m):
        row = [zero] * size
        for k in range(n + 1):
            row[i + n - k] = cb.get(k, zero)
        rows.append(row)
    return det_bareiss(rows)


def _divisors(n: int) -> list[int]:
    n = abs(n)
    small, large = [], []
    for d in range(1, isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
    return small + large[::-1]


def rational_roots(p: Polynomial, var: str) -> tuple[list[Fraction], Polynomial]:
    """Distinct rational roots of a univariate polynomial, plus the cofactor.

    The cofactor is ``p`` with every rational linear factor removed (to full
    multiplicity); a nonconstant cofactor carries irrational or complex roots.
    """
    others = p.variables() - {var}
    if others:
        raise ValueError(f"not univariate in {var}: also uses {sorted(others)}")
    if p.is_zero():
        raise ValueError("the zero polynomial has every number as a root")
    ctx = p.ctx
    x = Polynomial.variable(ctx, var)
    roots: list[Fraction] = []
    rest = p.integral_primitive()
    while rest.degree(var) > 0 and rest.coefficients_in(var).get(0) is None:
        if Fraction(0) not in roots:
            roots.append(Fraction(0))
        rest = rest // x
    changed = True
    while changed and rest.degree(var) > 0:
        changed = False
        rest = rest.integral_primitive()
        cs = rest.coefficients_in(var)
        lead = cs[rest.degree(var)].constant_value()
        const = cs[0].constant_value()
        for q in _divisors(int(lead)):
            for s in _divisors(int(const)):
                for r in (Fraction(s, q), Fraction(-s, q)):
                    if rest.partial_evaluate({var: r}).is_zero():
                        if r not in roots:
                            roots.append(r)
                        while True:
                            nxt = rest.exact_div(x - r)
                            if nxt is None:
                                break
                            rest = nxt
                            if rest.degree(var) <= 0:
                                break
                        changed = True
                        break
                if changed:
                    break
            if changed:
                break
    return sorted(roots), rest


def fraction_sqrt(q: Fraction) -> Fraction | None:
    """Exact square root of a nonnegative rational, or None if irrational."""
    if q < 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = isqrt(n), isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None
