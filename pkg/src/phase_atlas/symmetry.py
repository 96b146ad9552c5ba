"""Backlund symmetries, the invariant quadratic family and its reductions."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import Mapping

from .atlas import boundary_maps, core_field
from .singular import LocalIndex, local_index
from .symcore import Context, Indeterminate, Polynomial, RationalExpr, ZeroDenominatorError
from .symcore.linalg import nullspace, rref
from .vfield import RationalMap, VectorField, load_maps, load_systems, pushforward, restrict_to_manifold

STATE = ("x", "y", "z")
PARAMS = ("alpha1", "alpha2", "alpha3")
# Quadratic and t-linear monomials of the family, in the printed order.
MONOMIALS = ("x^2", "y^2", "z^2", "x*y", "x*z", "y*z", "t*x", "t*y", "t*z")
_EXP = {
    "x^2": (2, 0, 0, 0), "y^2": (0, 2, 0, 0), "z^2": (0, 0, 2, 0),
    "x*y": (1, 1, 0, 0), "x*z": (1, 0, 1, 0), "y*z": (0, 1, 1, 0),
    "t*x": (1, 0, 0, 1), "t*y": (0, 1, 0, 1), "t*z": (0, 0, 1, 1),
}  # fmt: skip
PREFIXES = ("a", "b", "c")


class BacklundPoleError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class BacklundMap:
    name: str
    variable_map: RationalMap
    parameter_map: Mapping[str, RationalExpr]

    @property
    def pole_locus(self) -> list[Polynomial]:
        out = []
        for e in self.variable_map.forward:
            if not e.den.is_constant():
                out.append(e.den)
        return out


@lru_cache(maxsize=None)
def backlund_maps() -> dict[str, BacklundMap]:
    return {n: BacklundMap(n, m, dict(m.parameter_action or {})) for n, m in load_maps("backlund.txt").items()}


def apply_backlund(s: BacklundMap, state: Mapping[str, object], params: Mapping[str, object]):
    """Image of a state and parameter tuple, exact or float.

    Values may be numbers or RationalExpr; returns (state', params').
    """
    env = {**state, **params}
    symbolic = any(isinstance(v, RationalExpr) for v in env.values())
    if symbolic:
        out_state = {n: e.substitute(env) for n, e in zip(s.variable_map.target_names, s.variable_map.forward)}
        out_params = {n: e.substitute(env) for n, e in s.parameter_map.items()}
        return out_state, out_params
    try:
        out_state = s.variable_map.apply(env)
    except ZeroDivisionError as exc:
        raise BacklundPoleError(f"{s.name} evaluated on its pole locus: {exc}") from None
    out_params = {n: e.evaluate(env) for n, e in s.parameter_map.items()}
    return out_state, out_params


def invariance_residual(f: VectorField, s: BacklundMap) -> tuple[RationalExpr, ...]:
    """d/dt of the transformed variables minus f at the transformed point."""
    m = s.variable_map
    X = m.forward
    bind = dict(zip(m.target_names, X))
    bind.update(s.parameter_map)
    out = []
    for Xi, fi in zip(X, f.rhs):
        lhs = RationalExpr.const(f.ctx, 0)
        if "t" in Xi.variables():
            lhs = lhs + Xi.diff("t")
        for n, fn in zip(f.names, f.rhs):
            if n in Xi.variables():
                lhs = lhs + Xi.diff(n) * fn
        out.append(lhs - fi.substitute(bind))
    return tuple(out)


# ---------------------------------------------------------------------------
# the invariant family
# ---------------------------------------------------------------------------


def unknown_names() -> list[str]:
    """Quadratic/t-linear coefficients then alpha-coefficients, per equation."""
    out = []
    for p in PREFIXES:
        out += [f"{p}{k}" for k in range(1, 10)]
        out += [f"{p}10_{j}" for j in range(1, 4)]
    return out


def family_context(coefficients) -> Context:
    vs = [Indeterminate(n, "state") for n in STATE] + [Indeterminate("t", "time")]
    vs += [Indeterminate(n, "parameter") for n in PARAMS]
    vs += [Indeterminate(n, "coefficient") for n in coefficients]
    return Context(vs)


def _monomial(ctx: Context, name: str) -> RationalExpr:
    e = _EXP[name]
    p = Polynomial.monomial(ctx, {"x": e[0], "y": e[1], "z": e[2], "t": e[3]})
    return RationalExpr(p)


def general_family() -> VectorField:
    """The 36-coefficient family: 9 quadratic/t-linear terms plus a constant
    term linear in the parameters, for each equation."""
    names = unknown_names()
    ctx = family_context(names)
    rhs = []
    for p in PREFIXES:
        e = RationalExpr.const(ctx, 0)
        for k, mon in enumerate(MONOMIALS, 1):
            e = e + RationalExpr.var(ctx, f"{p}{k}") * _monomial(ctx, mon)
        for j, a in enumerate(PARAMS, 1):
            e = e + RationalExpr.var(ctx, f"{p}10_{j}") * RationalExpr.var(ctx, a)
        rhs.append(e)
    return VectorField(tuple(ctx.var(n) for n in STATE), tuple(rhs), "family", ctx)


def coefficient_vector(f: VectorField) -> list[Fraction]:
    """Coordinates of a concrete member in the unknowns of :func:`general_family`."""
    vec = []
    for r in f.rhs:
        p = r.as_polynomial()
        for mon in MONOMIALS:
            e = _EXP[mon]
            c = p.coefficient_of({"x": e[0], "y": e[1], "z": e[2], "t": e[3]})
            vec.append(c.constant_value() if not c.variables() else _bad(c))
        for a in PARAMS:
            c = p.coefficient_of({a: 1, "x": 0, "y": 0, "z": 0, "t": 0})
            vec.append(c.constant_value() if not c.variables() else _bad(c))
    return vec


def _bad(c):
    raise ValueError(f"not a member of the family: coefficient {c}")


def _linear_rows(residuals, unknowns: list[str], ctx: Context) -> list[list[Fraction]]:
    """One row per monomial of the cleared residual numerators."""
    uidx = [ctx.index[u] for u in unknowns]
    others = [i for i in range(len(ctx)) if i not in set(uidx)]
    rows = []
    for r in residuals:
        num = r.num
        groups: dict[tuple, list[Fraction]] = {}
        for e, c in num.terms.items():
            key = tuple(e[i] for i in others)
            row = groups.setdefault(key, [Fraction(0)] * len(unknowns))
            deg = [k for k, i in enumerate(uidx) if e[i]]
            if len(deg) != 1 or e[uidx[deg[0]]] != 1:
                raise ValueError("residual is not linear in the unknowns")
            row[deg[0]] += c
        rows.extend(groups.values())
    return rows


@dataclass
class FamilyReport:
    unknowns: list[str]
    basis: list[list[Fraction]]
    dimension: int
    family: VectorField
    contains_core: bool
    printed_match: dict[str, list[str]]
    constant_discrepancies: dict[str, str]
    residual_rows: int

    @property
    def quadratic_match(self) -> bool:
        return not any(self.printed_match.values())


# printed coefficient -> (equation, slot in the unknown vector of that equation)
_PRINTED_FREE = {
    "a1": ("a", "a1"), "a5": ("a", "a5"), "a6": ("a", "a6"), "a7": ("a", "a7"),
    "b2": ("b", "b2"), "b8": ("b", "b8"), "c3": ("c", "c3"), "a10": ("a", "a10_1"),
}  # fmt: skip


def _solve_member(basis: list[list[Fraction]], unknowns: list[str], ctx: Context) -> list[RationalExpr]:
    """General member written with the printed free coefficients."""
    names = list(_PRINTED_FREE)
    cols = [unknowns.index(_PRINTED_FREE[n][1]) for n in names]
    k = len(basis)
    # M[i][j] = basis[j][cols[i]]; solve M lam = (printed symbols)
    aug = [[basis[j][cols[i]] for j in range(k)] + [Fraction(int(i == r)) for r in range(len(names))] for i in range(len(names))]
    red, piv = rref(aug, k + len(names))
    if piv[:k] != list(range(k)) or len(names) != k:
        raise ValueError("printed free coefficients do not parametrise the solution space")
    inv = [row[k:] for row in red[:k]]
    syms = [RationalExpr.var(ctx, n) for n in names]
    lam = []
    for j in range(k):
        e = RationalExpr.const(ctx, 0)
        for i, s in enumerate(syms):
            if inv[j][i]:
                e = e + s * inv[j][i]
        lam.append(e)
    out = []
    for u in range(len(unknowns)):
        e = RationalExpr.const(ctx, 0)
        for j in range(k):
            if basis[j][u]:
                e = e + lam[j] * basis[j][u]
        out.append(e)
    return out


def _member_field(values: list[RationalExpr], ctx: Context) -> VectorField:
    rhs = []
    per = len(MONOMIALS) + len(PARAMS)
    for q in range(3):
        e = RationalExpr.const(ctx, 0)
        chunk = values[q * per : (q + 1) * per]
        for v, mon in zip(chunk, MONOMIALS):
            e = e + v * _monomial(ctx, mon)
        for v, a in zip(chunk[len(MONOMIALS) :], PARAMS):
            e = e + v * RationalExpr.var(ctx, a)
        rhs.append(e)
    return VectorField(tuple(ctx.var(n) for n in STATE), tuple(rhs), "invariant family", ctx)


def split_constant(p: Polynomial, states=STATE) -> tuple[Polynomial, Polynomial]:
    """(part involving the states or t, the rest)."""
    ctx = p.ctx
    si = [ctx.index[n] for n in (*states, "t") if n in ctx.index]
    top = {e: c for e, c in p.terms.items() if any(e[i] for i in si)}
    const = {e: c for e, c in p.terms.items() if not any(e[i] for i in si)}
    return Polynomial(ctx, top), Polynomial(ctx, const)


@lru_cache(maxsize=None)
def derive_invariant_family() -> FamilyReport:
    fam = general_family()
    unknowns = unknown_names()
    rows = []
    for s in backlund_maps().values():
        rows += _linear_rows(invariance_residual(fam, s), unknowns, fam.ctx)
    basis = nullspace(rows, len(unknowns))
    core = coefficient_vector(core_field())
    contains = not any(sum(r[i] * core[i] for i in range(len(core))) for r in rows)

    printed = load_systems("core.txt")["family_printed"]
    ctx = family_context(_PRINTED_FREE)
    member = _member_field(_solve_member(basis, unknowns, ctx), ctx)
    matches: dict[str, list[str]] = {}
    consts: dict[str, str] = {}
    for n, a, b in zip(STATE, member.rhs, printed.rhs):
        qa, ca = split_constant(a.as_polynomial())
        qb, cb = split_constant(b.lift(ctx).as_polynomial())
        d = qa - qb
        matches[n] = [] if d.is_zero() else [f"d{n}/dt quadratic part: computed {qa}, printed {qb}"]
        if ca != cb:
            consts[n] = f"computed {ca} ; printed {cb}"
    return FamilyReport(unknowns, basis, len(basis), member, contains, matches, consts, len(rows))


# ---------------------------------------------------------------------------
# decoupling and the index at P3
# ---------------------------------------------------------------------------


@dataclass
class DecouplingReport:
    conditions: list[Polynomial]
    condition: Polynomial
    solved: dict[str, RationalExpr]
    decoupled: VectorField | None


def printed_family() -> VectorField:
    return load_systems("core.txt")["family_printed"]


def decoupling_check(family: VectorField | None = None, solve_for: str = "a5") -> DecouplingReport:
    """x-dependence of the (y, z) equations and the condition removing it."""
    family = family or printed_family()
    f2 = family["y"].as_polynomial()
    f3 = family["z"].as_polynomial()
    c2 = f2.coefficient_of({"x": 1, "y": 1, "z": 0, "t": 0})
    c3 = f3.coefficient_of({"x": 1, "y": 0, "z": 1, "t": 0})
    conds = [c for c in (c2, c3) if not c.is_zero()]
    if not conds:
        return DecouplingReport([c2, c3], Polynomial(f2.ctx), {}, _yz(family))
    g = conds[0].monic()
    for c in conds[1:]:
        if c.monic() != g:
            raise ValueError(f"conditions {conds} are not proportional")
    # solve the (linear) condition for one coefficient
    order = sorted(g.variables(), key=lambda v: (v != solve_for, v))
    var = next((v for v in order if g.degree(v) == 1 and g.coefficients_in(v)[1].is_constant()), None)
    solved = {}
    dec = None
    if var is not None:
        parts = g.coefficients_in(var)
        solved[var] = RationalExpr(-parts.get(0, Polynomial(g.ctx))) / RationalExpr(parts[1])
        dec = _yz(family.substitute(solved))
    return DecouplingReport([c2, c3], g, solved, dec)


def _yz(family: VectorField) -> VectorField | None:
    rhs = (family["y"], family["z"])
    if any("x" in r.variables() for r in rhs):
        return None
    ctx = Context([v for v in family.ctx.vars if v.name != "x"])
    return VectorField(tuple(family.ctx.var(n) for n in ("y", "z")), tuple(r.lift(ctx) for r in rhs), "decoupled", ctx)


def p3_index_family(family: VectorField | None = None, impose_decoupling: bool = True) -> LocalIndex:
    """Local index at [0:1:0:0] of a family member, symbolic in its coefficients."""
    family = family or printed_family()
    if impose_decoupling:
        rep = decoupling_check(family)
        if rep.solved:
            family = family.substitute(rep.solved)
    g = pushforward(family, boundary_maps()["pqr"], label="family in (p, q, r)")
    return local_index(g, {"q": 0, "r": 0}, "p")


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


@dataclass
class ReductionReport:
    name: str
    invariant: bool
    residual_symbolic: RationalExpr | None
    reduced: VectorField
    renaming: dict[str, str] = field(default_factory=dict)
    matches_core: bool = False
    candidates: int = 0
    riccati: dict[int, Polynomial] = field(default_factory=dict)
    details: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.invariant and self.matches_core and not self.details


def _constant_part(r: RationalExpr, states) -> Polynomial:
    return split_constant(r.as_polynomial(), states)[1]


def ny_reduction_check() -> ReductionReport:
    """Restrict the four-variable system to x = 0, beta1 = 0 and identify it."""
    ny = load_systems("core.txt")["noumi_yamada"]
    sym = restrict_to_manifold(ny, Polynomial.variable(ny.ctx, "x"))
    spec = ny.specialize({"beta1": 0})
    res = restrict_to_manifold(spec, Polynomial.variable(spec.ctx, "x"))
    red = res.reduced
    core = core_field()
    found = []
    for perm in permutations(core.names):
        smap = dict(zip(red.names, perm))
        pmap = {}
        ok = True
        for src, dst in smap.items():
            c = _constant_part(red[src], red.names)
            target = _constant_part(core[dst], core.names)
            cv, tv = c.variables(), target.variables()
            if len(cv) != 1 or len(tv) != 1 or c != Polynomial.variable(c.ctx, next(iter(cv))):
                ok = False
                break
            pmap[next(iter(cv))] = next(iter(tv))
        if not ok:
            continue
        renamed = red.rename({**smap, **pmap})
        reordered = VectorField(core.coords, tuple(renamed[n] for n in core.names), "renamed", renamed.ctx)
        if reordered.same_as(core):
            found.append({**smap, **pmap})
    details = []
    if len(found) != 1:
        details.append(f"{len(found)} renamings identify the reduced system with the core system")
    return ReductionReport(
        "noumi-yamada",
        res.invariant,
        sym.residual,
        red,
        found[0] if found else {},
        bool(found),
        len(found),
        details=details,
    )


def piv_reduction_check() -> ReductionReport:
    """The surface x = 0 with alpha1 = 0 and the Riccati form of dx/dt."""
    core = core_field()
    sym = restrict_to_manifold(core, Polynomial.variable(core.ctx, "x"))
    spec = core.specialize({"alpha1": 0})
    res = restrict_to_manifold(spec, Polynomial.variable(spec.ctx, "x"))
    f1 = core["x"].as_polynomial()
    ric = f1.coefficients_in("x")
    details = []
    if f1.degree("x") != 2:
        details.append(f"dx/dt has degree {f1.degree('x')} in x")
    expected = (core["y"], core["z"])
    for n, e, got in zip(("y", "z"), expected, res.reduced.rhs):
        want = e.substitute({"x": RationalExpr.const(e.ctx, 0)}).partial_evaluate({"alpha1": 0})
        if not (got - want).is_zero():
            details.append(f"d{n}/dt on x = 0: {got} vs {want}")
    return ReductionReport(
        "painleve-iv",
        res.invariant,
        sym.residual,
        res.reduced,
        matches_core=not details,
        riccati=ric,
        details=details,
    )


def specialize_index(idx: LocalIndex, values: Mapping[str, object]) -> tuple[Fraction, ...]:
    vals = {k: Fraction(v) for k, v in values.items()}
    try:
        return tuple(e.partial_evaluate(vals).constant_value() for e in idx.tuple_)
    except (ValueError, ZeroDenominatorError) as exc:
        raise ValueError(f"index does not specialise to numbers: {exc}") from None
