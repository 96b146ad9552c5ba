"""Multivariate polynomial GCD over Q.

A heuristic integer-evaluation gcd first, then a recursive content /
primitive-part scheme with a primitive pseudo-remainder sequence in a chosen
main variable when the heuristic gives up. A handful of structural shortcuts
(monomials, exact divisibility, variables present on one side only) handle
the vast majority of calls arising from coordinate changes cheaply.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd as igcd
from math import isqrt, lcm

from .poly import Polynomial


def _monomial_gcd(m: Polynomial, p: Polynomial) -> Polynomial:
    (em,) = m.terms
    low = list(em)
    for e in p.terms:
        for i, k in enumerate(e):
            if k < low[i]:
                low[i] = k
    return Polynomial(m.ctx, {tuple(low): Fraction(1)})


def _normalize(g: Polynomial) -> Polynomial:
    return g.monic()


def _pseudo_remainder(a: Polynomial, b: Polynomial, var: str) -> Polynomial:
    db = b.degree(var)
    cb = b.coefficients_in(var)
    lcb = cb[db]
    i = a.ctx.index[var]
    r = a
    while not r.is_zero():
        dr = r.degree(var)
        if dr < db:
            break
        lcr = r.coefficients_in(var)[dr]
        e = [0] * len(a.ctx)
        e[i] = dr - db
        shift = Polynomial(a.ctx, {tuple(e): Fraction(1)})
        r = r * lcb - lcr * shift * b
    return r


_PROBES = (3, 5, 7, 11, 13, 17, 19, 23)


def _univariate(p: Polynomial, var: str, point: dict[str, Fraction]) -> list[Fraction]:
    """Coefficients (low to high) of ``p`` in ``var`` with the rest specialised."""
    i = p.ctx.index[var]
    out = [Fraction(0)] * (p.degree(var) + 1)
    for e, c in p.terms.items():
        v = c
        for j, k in enumerate(e):
            if k and j != i:
                v *= point[p.ctx.names[j]] ** k
        out[e[i]] += v
    while out and out[-1] == 0:
        out.pop()
    return out


def _uni_gcd_degree(a: list[Fraction], b: list[Fraction]) -> int:
    while b:
        while len(a) >= len(b) and a:
            q = a[-1] / b[-1]
            off = len(a) - len(b)
            for k, c in enumerate(b):
                a[off + k] -= q * c
            while a and a[-1] == 0:
                a.pop()
        a, b = b, a
    return len(a) - 1


def _free_of(a: Polynomial, b: Polynomial, var: str) -> bool | None:
    """True when gcd(a, b) certainly does not involve ``var``; None if unsure.

    The other variables are set to small integers at which neither leading
    coefficient in ``var`` vanishes.  The gcd's leading coefficient divides
    both, so its degree survives, and a constant univariate gcd rules it out.
    """
    others = [n for n in a.ctx.names if n != var and (n in a.variables() or n in b.variables())]
    for shift in range(len(_PROBES)):
        point = {n: Fraction(_PROBES[(j + shift) % len(_PROBES)] + shift) for j, n in enumerate(others)}
        ua, ub = _univariate(a, var, point), _univariate(b, var, point)
        if len(ua) - 1 != a.degree(var) or len(ub) - 1 != b.degree(var):
            continue
        return _uni_gcd_degree(ua, ub) == 0
    return None


# ---------------------------------------------------------------------------
# heuristic gcd: evaluate at a large integer, recurse, read the digits back
# ---------------------------------------------------------------------------

IntPoly = dict[tuple[int, ...], int]
# Large inputs keep evaluation points within HEU_BUDGET bit-terms (and at
# least HEU_MAX_BITS bits): paying for big digits on every term costs more than
# the PRS route.  Small inputs run uncapped, since for them the PRS route, with
# its recursive contents, is far worse than the heuristic.
HEU_MAX_BITS = 2048
HEU_BUDGET = 1 << 22
HEU_SMALL = 256


def _heu_cap(nterms: int) -> int | None:
    if nterms <= HEU_SMALL:
        return None
    return max(HEU_MAX_BITS, HEU_BUDGET // nterms)


def _icontent(f: IntPoly) -> int:
    g = 0
    for c in f.values():
        g = igcd(g, c)
        if g == 1:
            break
    return g


def _heu_eval(f: IntPoly, i: int, xi: int) -> IntPoly:
    out: IntPoly = {}
    for e, c in f.items():
        k = e[:i] + (0,) + e[i + 1 :]
        out[k] = out.get(k, 0) + c * xi ** e[i]
    return {e: c for e, c in out.items() if c}


def _heu_interp(h: IntPoly, i: int, xi: int) -> IntPoly:
    """Symmetric xi-adic digits of each coefficient become powers of variable i."""
    out: IntPoly = {}
    half = xi // 2
    for e, c in h.items():
        k = 0
        while c:
            d = c % xi
            if d > half:
                d -= xi
            if d:
                out[e[:i] + (k,) + e[i + 1 :]] = d
            c = (c - d) // xi
            k += 1
    return out


def _heu(f: IntPoly, g: IntPoly, idx: list[int], ctx, cap: int | None) -> IntPoly | None:
    cf, cg = _icontent(f), _icontent(g)
    c = igcd(cf, cg)
    zero = (0,) * len(ctx)
    if not idx:
        return {zero: c}
    f = {e: v // cf for e, v in f.items()}
    g = {e: v // cg for e, v in g.items()}
    i, rest = idx[0], idx[1:]
    nf, ng = max(map(abs, f.values())), max(map(abs, g.values()))
    lf, lg = abs(f[max(f)]), abs(g[max(g)])
    # Below 2*min height + 2 a divisor passing both division tests need not be the greatest.
    xi = max(2 * min(nf, ng) + 2, 2 * min(nf // lf, ng // lg) + 2)
    if cap is not None and xi.bit_length() > cap:
        return None
    pf, pg = Polynomial(ctx, {e: Fraction(v) for e, v in f.items()}), Polynomial(ctx, {e: Fraction(v) for e, v in g.items()})
    for _ in range(6):
        ff, gg = _heu_eval(f, i, xi), _heu_eval(g, i, xi)
        if ff and gg:
            h = _heu(ff, gg, rest, ctx, cap)
            if h is None:
                # a failing image rarely recovers at another point; let the caller fall back
                return None
            hh = _heu_interp(h, i, xi)
            if hh:
                ch = _icontent(hh)
                hp = Polynomial(ctx, {e: Fraction(v, ch) for e, v in hh.items()})
                if pf.exact_div(hp) is not None and pg.exact_div(hp) is not None:
                    return {e: int(v) * c for e, v in hp.terms.items()}
        xi = xi * 73794 * isqrt(isqrt(xi)) // 27011
        if cap is not None and xi.bit_length() > cap:
            return None
    return None


def heuristic_gcd(a: Polynomial, b: Polynomial) -> Polynomial | None:
    """GCD by integer evaluation and interpolation, or None when it gives up.

    A returned value has been confirmed by exact division, so it is never
    wrong; giving up only sends the caller to the pseudo-remainder route.
    """
    ctx = a.ctx
    da = lcm(*(c.denominator for c in a.terms.values()))
    db = lcm(*(c.denominator for c in b.terms.values()))
    f = {e: int(c * da) for e, c in a.terms.items()}
    g = {e: int(c * db) for e, c in b.terms.items()}
    idx = sorted(ctx.index[n] for n in a.variables() | b.variables())
    h = _heu(f, g, idx, ctx, _heu_cap(len(f) + len(g)))
    if h is None:
        return None
    return Polynomial(ctx, {e: Fraction(v) for e, v in h.items()})


def content_in(p: Polynomial, var: str) -> Polynomial:
    """GCD of the coefficients of ``p`` viewed as a polynomial in ``var``."""
    g: Polynomial | None = None
    for c in sorted(p.coefficients_in(var).values(), key=lambda q: len(q.terms)):
        g = c if g is None else poly_gcd(g, c)
        if g.is_constant():
            return Polynomial.constant(p.ctx, 1)
    assert g is not None
    return _normalize(g)


def poly_gcd(a: Polynomial, b: Polynomial) -> Polynomial:
    """Greatest common divisor, normalised to graded-lex leading coefficient 1."""
    if a.ctx is not b.ctx:
        ctx = a.ctx.merge(b.ctx)
        a, b = a.lift(ctx), b.lift(ctx)
    if a.is_zero():
        return _normalize(b)
    if b.is_zero():
        return _normalize(a)
    if a.is_constant() or b.is_constant():
        return Polynomial.constant(a.ctx, 1)
    if a.is_monomial():
        return _monomial_gcd(a, b)
    if b.is_monomial():
        return _monomial_gcd(b, a)
    if len(a.terms) > len(b.terms):
        a, b = b, a
    if b.exact_div(a) is not None:
        return _normalize(a)

    va, vb = a.variables(), b.variables()
    only_a = va - vb
    if only_a:
        return poly_gcd(content_in(a, min(only_a)), b)
    only_b = vb - va
    if only_b:
        return poly_gcd(a, content_in(b, min(only_b)))

    # Strip common monomial factors first; they confuse nothing but cost PRS steps.
    ma = _monomial_gcd(Polynomial(a.ctx, {next(iter(a.terms)): Fraction(1)}), a)
    mb = _monomial_gcd(Polynomial(b.ctx, {next(iter(b.terms)): Fraction(1)}), b)
    mono = _monomial_gcd(ma, mb)
    if not ma.is_constant():
        a = a // ma
    if not mb.is_constant():
        b = b // mb
    if a.is_constant() or b.is_constant():
        return mono

    shared = va & vb
    if all(_free_of(a, b, v) for v in sorted(shared)):
        return mono
    h = heuristic_gcd(a, b)
    if h is not None:
        return _normalize(mono * h)
    var = min(shared, key=lambda v: (max(a.degree(v), b.degree(v)), v))
    ca, cb = content_in(a, var), content_in(b, var)
    g_cont = poly_gcd(ca, cb)
    pa = a // ca
    pb = b // cb
    if pa.degree(var) < pb.degree(var):
        pa, pb = pb, pa
    while True:
        if pb.degree(var) <= 0:
            g_prim = Polynomial.constant(a.ctx, 1) if not pb.is_zero() else pa
            break
        r = _pseudo_remainder(pa, pb, var)
        if r.is_zero():
            g_prim = pb
            break
        if r.degree(var) == 0:
            g_prim = Polynomial.constant(a.ctx, 1)
            break
        pa, pb = pb, (r // content_in(r, var)).integral_primitive()
    if g_prim.degree(var) > 0:
        g_prim = g_prim // content_in(g_prim, var)
    return _normalize(mono * g_cont * g_prim)
