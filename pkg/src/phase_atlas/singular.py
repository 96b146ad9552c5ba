"""Accessible singular points on the hyperplane at infinity and their local indices."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .atlas import boundary_maps, core_field, printed_local_systems
from .symcore import Polynomial, RationalExpr, poly_gcd
from .symcore.linalg import fraction_sqrt, rational_roots, resultant
from .vfield import VectorField, pole_order, pushforward

# name -> (homogeneous point, printed index, type mark, dimension of the
# meromorphic family flowing in).  The type and dimension are carried as data.
PAPER_TABLE: dict[str, tuple[tuple[int, ...], tuple[int, ...], str, int]] = {
    "P1": ((0, 0, 0, 1), (-1, 3, 1), "○", 1),
    "P2": ((0, -1, 0, 1), (1, 3, 1), "●", 2),
    "P3": ((0, 1, 0, 0), (1, 1, 1), "●", 2),
    "P4": ((0, 0, -1, 1), (-3, -3, -1), "●", 2),
    "P5": ((0, -1, 1, 0), (1, -1, -3), "○", 1),
    "P6": ((0, 0, 1, 0), (-1, -1, -3), "●", 2),
    "P7": ((0, -3, -1, 1), (3, -3, -1), "★", 1),
}

# boundary chart -> (boundary coordinate, tangential coordinates,
# positions of (boundary, tangential...) inside [z0:z1:z2:z3]).
BOUNDARY_CHARTS = {
    "uvw": ("w", ("u", "v"), 3),
    "pqr": ("p", ("q", "r"), 1),
    "lmn": ("m", ("l", "n"), 2),
}

# Local systems printed for single points: (system name, point name, chart).
PRINTED_LOCAL = {"P1": "P1", "P2": "P2", "P3": "P3", "P4": "P4", "P7": "P7"}


class SingularityError(ValueError):
    pass


@dataclass(frozen=True)
class LocalIndex:
    a: RationalExpr
    eigenvalues: tuple[RationalExpr, RationalExpr] | None
    tuple_: tuple[RationalExpr, ...] | None
    triangular: bool
    strict_form: bool
    warnings: tuple[str, ...] = ()

    @property
    def normalized(self) -> tuple[RationalExpr, ...] | None:
        if self.eigenvalues is None or self.a.is_zero():
            return None
        b, c = self.eigenvalues
        one = RationalExpr.const(self.a.ctx, 1)
        return (one, b / self.a, c / self.a)

    def as_fractions(self) -> tuple[Fraction, ...] | None:
        if self.tuple_ is None or not all(e.is_constant() for e in self.tuple_):
            return None
        return tuple(e.constant_value() for e in self.tuple_)


@dataclass
class AccessibleSingularity:
    homogeneous: tuple[Fraction, ...]
    chart: str
    point: dict[str, Fraction]
    index: LocalIndex | None = None
    name: str | None = None
    paper_type: str | None = None
    dimension: int | None = None


@dataclass
class AccessibleScan:
    chart: str
    boundary: str
    points: list[AccessibleSingularity]
    unresolved: list[str] = field(default_factory=list)
    positive_dimensional: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def polar_numerators(f: VectorField, boundary: str) -> list[tuple[str, Polynomial]]:
    """(boundary * rhs_i) restricted to boundary = 0, for the tangential rhs."""
    orders = pole_order(f, boundary)
    k = f.names.index(boundary)
    if orders[k] > 0:
        raise SingularityError(f"d{boundary}/dt itself has a pole along {boundary} = 0")
    if any(o > 1 for o in orders):
        raise SingularityError(f"pole along {boundary} = 0 is not simple: orders {orders}")
    b = RationalExpr.var(f.ctx, boundary)
    out = []
    for n, r in zip(f.names, f.rhs):
        if n == boundary:
            continue
        num = (r * b).partial_evaluate({boundary: 0})
        if not num.is_polynomial():
            raise SingularityError(f"d{n}/dt has a pole off the boundary: {r}")
        out.append((n, num.as_polynomial()))
    return out


def _generic_components(p: Polynomial, keep: Sequence[str]) -> list[Polynomial]:
    """Coefficients of ``p`` with respect to all variables outside ``keep``."""
    others = sorted(p.variables() - set(keep))
    parts = [p]
    for v in others:
        nxt = []
        for q in parts:
            nxt.extend(c for c in q.coefficients_in(v).values() if not c.is_zero())
        parts = nxt
    return [q for q in parts if not q.is_zero()]


def _solve_pair_system(polys: list[Polynomial], u: str, v: str) -> tuple[list[tuple[Fraction, Fraction]], list[str], list[str]]:
    """Rational common zeros in (u, v) of a list of bivariate polynomials."""
    polys = [p for p in polys if not p.is_zero()]
    if not polys:
        return [], [], ["every point of the boundary"]
    g = polys[0]
    for p in polys[1:]:
        g = poly_gcd(g, p)
    if not g.is_constant():
        return [], [], [f"common component {g} = 0"]
    # eliminate v: a polynomial without v, or a nonzero resultant of a pair
    elim = next((p for p in polys if v not in p.variables()), None)
    if elim is None:
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                r = resultant(polys[i], polys[j], v)
                if not r.is_zero():
                    elim = r
                    break
            if elim is not None:
                break
    if elim is None:
        raise SingularityError("could not eliminate a variable")
    unresolved = []
    roots, rest = rational_roots(elim, u)
    if rest.degree(u) > 0:
        unresolved.append(f"{u}: roots of {rest}")
    sols = []
    pos = []
    for u0 in roots:
        spec = [p.partial_evaluate({u: u0}) for p in polys]
        spec = [p for p in spec if not p.is_zero()]
        if not spec:
            pos.append(f"the line {u} = {u0}")
            continue
        h = spec[0]
        for p in spec[1:]:
            h = poly_gcd(h, p)
        if h.is_constant():
            continue
        vroots, vrest = rational_roots(h, v)
        if vrest.degree(v) > 0:
            unresolved.append(f"{v} at {u} = {u0}: roots of {vrest}")
        for v0 in vroots:
            if all(p.partial_evaluate({u: u0, v: v0}).is_zero() for p in polys):
                sols.append((u0, v0))
    return sorted(sols), unresolved, pos


def normalize_homogeneous(h: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """Scale so that the last nonzero entry is 1."""
    last = next(c for c in reversed(h) if c != 0)
    return tuple(Fraction(c) / last for c in h)


def homogeneous_point(chart: str, point: Mapping[str, Fraction]) -> tuple[Fraction, ...]:
    """[z0:z1:z2:z3] of a boundary point given in a boundary chart."""
    if chart == "uvw":
        h = (0, point["u"], point["v"], 1)
    elif chart == "pqr":
        h = (0, 1, point["q"], point["r"])
    elif chart == "lmn":
        h = (0, point["l"], 1, point["n"])
    else:
        raise KeyError(chart)
    return normalize_homogeneous([Fraction(c) for c in h])


def preferred_chart(h: Sequence[Fraction]) -> str:
    if h[3] != 0:
        return "uvw"
    if h[2] != 0:
        return "lmn"
    return "pqr"


def chart_point(chart: str, h: Sequence[Fraction]) -> dict[str, Fraction]:
    _, x, y, z = (Fraction(c) for c in h)
    if chart == "uvw":
        return {"u": x / z, "v": y / z}
    if chart == "pqr":
        return {"q": y / x, "r": z / x}
    return {"l": x / y, "n": z / y}


def boundary_field(chart: str, base: VectorField | None = None) -> VectorField:
    return pushforward(base or core_field(), boundary_maps()[chart], label=chart)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def find_accessible(f: VectorField, boundary: str, chart: str | None = None) -> AccessibleScan:
    """All boundary points where the polar numerators vanish for every t."""
    tang = tuple(n for n in f.names if n != boundary)
    if len(tang) != 2:
        raise SingularityError("expected three coordinates")
    polys = []
    for _, num in polar_numerators(f, boundary):
        polys.extend(_generic_components(num, tang))
    sols, unresolved, pos = _solve_pair_system(polys, *tang)
    points = []
    for a, b in sols:
        pt = {tang[0]: a, tang[1]: b}
        h = homogeneous_point(chart, pt) if chart else ()
        points.append(AccessibleSingularity(h, chart or f.label, pt))
    return AccessibleScan(chart or f.label, boundary, points, unresolved, pos)


def _eigen_2x2(j: list[list[RationalExpr]]) -> tuple[tuple[RationalExpr, RationalExpr] | None, bool]:
    lower, upper = j[1][0].is_zero(), j[0][1].is_zero()
    if lower or upper:
        return (j[0][0], j[1][1]), True
    if not all(e.is_constant() for row in j for e in row):
        return None, False
    a, b = j[0][0].constant_value(), j[0][1].constant_value()
    c, d = j[1][0].constant_value(), j[1][1].constant_value()
    tr, det = a + d, a * d - b * c
    s = fraction_sqrt(tr * tr - 4 * det)
    if s is None:
        return None, False
    ctx = j[0][0].ctx
    lo, hi = sorted(((tr - s) / 2, (tr + s) / 2))
    return (RationalExpr.const(ctx, lo), RationalExpr.const(ctx, hi)), False


def local_index(f: VectorField, point: Mapping[str, object], boundary: str) -> LocalIndex:
    """Transversal constant and spectrum of the polar linearisation at ``point``.

    The returned tuple lists the tangential eigenvalues in coordinate order
    with ``a`` placed in the slot of the boundary coordinate.
    """
    tang = [n for n in f.names if n != boundary]
    at = {k: Fraction(v) for k, v in point.items()}
    at[boundary] = Fraction(0)
    nums = dict(polar_numerators(f, boundary))
    warnings = []
    for n, p in nums.items():
        if not p.partial_evaluate(at).is_zero():
            raise SingularityError(f"point {dict(point)} is not accessible: d{n}/dt numerator = {p.partial_evaluate(at)}")
    a = f[boundary].partial_evaluate(at)
    if not a.is_polynomial() or a.variables() & ({"t"} | set(f.names)):
        warnings.append(f"transversal term depends on t or state: {a}")
    jac = [[RationalExpr(nums[n].derivative(m)).partial_evaluate(at) for m in tang] for n in tang]
    eig, tri = _eigen_2x2(jac)
    strict = jac[0][1].is_zero() and jac[1][0].is_zero()
    if a.is_zero() or (eig is not None and any(e.is_zero() for e in eig)):
        warnings.append("a zero entry: the nonzero-constant hypothesis does not hold")
    tup = None
    if eig is not None:
        it = iter(eig)
        tup = tuple(a if n == boundary else next(it) for n in f.names)
    return LocalIndex(a, eig, tup, tri, strict, tuple(warnings))


@dataclass
class TableRow:
    name: str
    homogeneous: tuple[Fraction, ...]
    chart: str
    point: dict[str, Fraction]
    index: tuple[Fraction, ...] | None
    normalized: tuple[Fraction, ...] | None
    paper_type: str
    dimension: int
    matched: bool
    detail: list[str]


@dataclass
class TableReport:
    rows: list[TableRow]
    extra_points: list[tuple[Fraction, ...]]
    scans: dict[str, AccessibleScan]

    @property
    def ok(self) -> bool:
        return len(self.rows) == 7 and not self.extra_points and all(r.matched for r in self.rows)


def scan_boundary(base: VectorField | None = None) -> dict[str, AccessibleScan]:
    out = {}
    for chart, (boundary, _, _) in BOUNDARY_CHARTS.items():
        out[chart] = find_accessible(boundary_field(chart, base), boundary, chart)
    return out


def _frac_tuple(t) -> tuple[Fraction, ...] | None:
    if t is None or not all(e.is_constant() for e in t):
        return None
    return tuple(e.constant_value() for e in t)


def verify_table() -> TableReport:
    """Recompute the seven-point table and compare it row by row."""
    scans = scan_boundary()
    found: dict[tuple[Fraction, ...], AccessibleSingularity] = {}
    for scan in scans.values():
        for p in scan.points:
            found.setdefault(p.homogeneous, p)
    by_point = {tuple(Fraction(c) for c in v[0]): k for k, v in PAPER_TABLE.items()}
    printed = printed_local_systems()
    rows = []
    for h in found:
        name = by_point.get(h)
        if name is None:
            continue
        _, idx_paper, mark, dim = PAPER_TABLE[name]
        chart = preferred_chart(h)
        boundary = BOUNDARY_CHARTS[chart][0]
        pt = chart_point(chart, h)
        li = local_index(boundary_field(chart), pt, boundary)
        idx = li.as_fractions()
        detail = []
        if idx != tuple(Fraction(c) for c in idx_paper):
            detail.append(f"index {idx} vs printed {idx_paper}")
        # the printed local system at the point, where there is one
        if name in PRINTED_LOCAL:
            sysf = printed[PRINTED_LOCAL[name]]
            bnd = sysf.names[0] if name == "P3" else sysf.names[2]
            origin = {n: 0 for n in sysf.names if n != bnd}
            li2 = local_index(sysf, origin, bnd).as_fractions()
            if li2 != tuple(Fraction(c) for c in idx_paper):
                detail.append(f"index from the printed local system {li2} vs {idx_paper}")
        norm = _frac_tuple(li.normalized)
        if norm is None or any(c.denominator != 1 for c in norm):
            detail.append(f"normalized index {norm} is not integral")
        rows.append(TableRow(name, h, chart, pt, idx, norm, mark, dim, not detail, detail))
    rows.sort(key=lambda r: r.name)
    extra = [h for h in found if h not in by_point]
    missing = set(PAPER_TABLE) - {r.name for r in rows}
    for name in sorted(missing):
        h0, idx_paper, mark, dim = PAPER_TABLE[name]
        rows.append(TableRow(name, tuple(map(Fraction, h0)), "", {}, None, None, mark, dim, False, ["not found"]))
    return TableReport(rows, extra, scans)
