"""Boundary charts, blow-up sequences and the eight-chart phase space.

Everything here is loaded from the fixture files and checked exactly:
round trips of every map, polynomiality of the flow on each chart, the
printed local systems along the resolution sequence, and agreement of the
terminal coordinates with the gluing charts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

from .symcore import Context, Polynomial, RationalExpr
from .symcore.gcd import poly_gcd
from .vfield import (
    MapError,
    RationalMap,
    VectorField,
    load_blocks,
    load_maps,
    load_systems,
    map_from_block,
    pole_order,
    pushforward,
    restrict_to_manifold,
)

STEP_KINDS = ("blow_up_point", "blow_up_curve", "blow_down_surface")

# Start of each resolution branch -> boundary map producing its local system.
BRANCH_STARTS = {
    "P1": "uvw",
    "P2": "P2_local",
    "P3": "pqr",
    "P4": "P4_local",
    "P7": "P7_local",
    "P56": "lmn",
}


class AtlasError(RuntimeError):
    pass


class GoldenMismatch(AssertionError):
    def __init__(self, step: str, details: list[str]):
        super().__init__(f"step {step}: " + " | ".join(details))
        self.step = step
        self.details = details


@lru_cache(maxsize=None)
def core_field() -> VectorField:
    return load_systems("core.txt")["eq1"]


@lru_cache(maxsize=None)
def boundary_maps() -> dict[str, RationalMap]:
    return load_maps("boundary.txt")


@lru_cache(maxsize=None)
def printed_local_systems() -> dict[str, VectorField]:
    return load_systems("boundary.txt")


def specialize_map(m: RationalMap, values: Mapping[str, object]) -> RationalMap:
    vals = {k: Fraction(v) for k, v in values.items()}
    return RationalMap(
        m.name,
        m.source,
        m.target,
        tuple(e.partial_evaluate(vals) for e in m.forward),
        tuple(e.partial_evaluate(vals) for e in m.inverse),
        m.parameter_action,
    )


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Chart:
    """One affine chart U_j; ``from_U0`` sends (x, y, z) to its coordinates."""

    name: str
    from_U0: RationalMap
    base: VectorField = field(repr=False)

    @property
    def coords(self):
        return self.from_U0.target

    @property
    def names(self) -> tuple[str, ...]:
        return self.from_U0.target_names

    @property
    def to_U0(self) -> RationalMap:
        return self.from_U0.inverted(f"{self.name}->U0")

    @cached_property
    def field(self) -> VectorField:
        return pushforward(self.base, self.from_U0, label=self.name)


@dataclass(frozen=True)
class HolomorphyReport:
    chart: str
    polynomial: bool
    offending_terms: list[str]


def certify_holomorphic(chart: Chart) -> HolomorphyReport:
    """Check that every right-hand side is polynomial in the chart variables."""
    names = set(chart.names)
    bad = []
    for n, r in zip(chart.names, chart.field.rhs):
        if not r.is_polynomial_in(names):
            bad.append(f"d{n}/dt has denominator {r.den}")
    return HolomorphyReport(chart.name, not bad, bad)


def _identity_chart(base: VectorField) -> Chart:
    ctx = base.ctx
    ident = tuple(RationalExpr.var(ctx, n) for n in base.names)
    return Chart("U0", RationalMap("U0", base.coords, base.coords, ident, ident), base)


def load_atlas(base: VectorField | None = None) -> list[Chart]:
    """Charts U0..U7 without validation (see :func:`verify_atlas`)."""
    base = base or core_field()
    maps = load_maps("atlas.txt", ("chart",))
    return [_identity_chart(base)] + [Chart(n, m, base) for n, m in maps.items()]


@lru_cache(maxsize=None)
def builtin_atlas() -> tuple[Chart, ...]:
    """The eight charts, with round trips and holomorphy enforced."""
    charts = load_atlas()
    for c in charts:
        errs = c.from_U0.round_trip_errors()
        if errs:
            raise AtlasError(f"{c.name}: " + "; ".join(errs))
        rep = certify_holomorphic(c)
        if not rep.polynomial:
            raise AtlasError(f"{c.name} is not holomorphic: " + "; ".join(rep.offending_terms))
    return tuple(charts)


def chart(name: str) -> Chart:
    for c in builtin_atlas():
        if c.name == name:
            return c
    raise KeyError(name)


def transition(a: Chart, b: Chart) -> RationalMap:
    """Exact coordinate change from chart ``a`` to chart ``b``."""
    return a.to_U0.then(b.from_U0, name=f"{a.name}->{b.name}")


def check_transition(a: Chart, b: Chart) -> list[str]:
    """Mismatches between the transported field of ``a`` and the field of ``b``."""
    moved = pushforward(a.field, transition(a, b), label=b.name)
    return moved.mismatches(b.field)


def invariant_surface_check(base: VectorField | None = None):
    """Restrict the core flow (alpha1 = 0) to the surface x = 0."""
    f = (base or core_field()).specialize({"alpha1": 0})
    return restrict_to_manifold(f, Polynomial.variable(f.ctx, "x"))


# ---------------------------------------------------------------------------
# resolution steps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResolutionStep:
    index: str
    kind: str
    center: tuple[RationalExpr, ...]
    substitution: RationalMap
    source: str
    expected: str | None = None
    terminal: str | None = None
    derived: bool = False
    erratum: tuple[str, RationalExpr] | None = None

    def round_trip_errors(self) -> list[str]:
        return self.substitution.round_trip_errors()


def _parse_center(text: str, m: RationalMap) -> tuple[RationalExpr, ...]:
    from .symcore import parse_expression

    ctx = m.forward[0].ctx.merge(Context(m.source))
    return tuple(parse_expression(part, ctx) for part in text.split(";") if part.strip())


@lru_cache(maxsize=None)
def resolution_steps() -> dict[str, ResolutionStep]:
    out = {}
    for b in load_blocks("resolution.txt"):
        if b.kind != "step":
            continue
        m = map_from_block(b, "resolution.txt")
        kind = b.directives.get("kind", "")
        if kind not in STEP_KINDS:
            raise AtlasError(f"step {b.name}: unknown kind {kind!r}")
        out[b.name] = ResolutionStep(
            index=b.name,
            kind=kind,
            center=_parse_center(b.directives.get("center", ""), m),
            substitution=m,
            source=b.directives["from"],
            expected=b.directives.get("expect"),
            terminal=b.directives.get("terminal"),
            derived=b.directives.get("derived", "no") == "yes",
            erratum=_parse_erratum(b.directives.get("erratum"), m, b.name),
        )
    return out


def _parse_erratum(text: str | None, m: RationalMap, step: str) -> tuple[str, RationalExpr] | None:
    if not text:
        return None
    from .symcore import parse_expression

    coord, _, expr = text.partition(" ")
    if coord not in m.target_names:
        raise AtlasError(f"step {step}: erratum names unknown coordinate {coord!r}")
    ctx = m.inverse[0].ctx.merge(Context(m.target))
    return coord, parse_expression(expr, ctx)


def erratum_explains(computed: VectorField, printed: VectorField, erratum: tuple[str, RationalExpr] | None) -> bool:
    """True iff ``computed - printed`` is exactly the recorded erratum."""
    if erratum is None or computed.names != printed.names:
        return False
    coord, delta = erratum
    for n, a, b in zip(computed.names, computed.rhs, printed.rhs):
        d = a - b
        if n == coord:
            d = d - delta
        if not d.is_zero():
            return False
    return True


@lru_cache(maxsize=None)
def golden_systems() -> dict[str, VectorField]:
    return load_systems("resolution.txt")


def apply_resolution_step(
    f: VectorField, s: ResolutionStep, expected: VectorField | None = None, check: bool = True
) -> VectorField:
    """Push ``f`` through the step; compare with the printed output if any."""
    if f.names != s.substitution.source_names:
        raise MapError(f"step {s.index} expects {s.substitution.source_names}, got {f.names}")
    g = pushforward(f, s.substitution, label=s.index)
    if check:
        if expected is None and s.expected:
            expected = golden_systems()[s.expected]
        if expected is not None:
            diff = g.mismatches(expected)
            if diff:
                raise GoldenMismatch(s.index, diff)
    return g


def log_pole_legal(f: VectorField) -> bool:
    """Simple poles at most, and none in a divisor's own equation."""
    for i, c in enumerate(f.coords):
        orders = pole_order(f, c.name)
        if orders[i] > 0 or any(k > 1 for k in orders):
            return False
    return True


def branch_chain(step: str) -> list[ResolutionStep]:
    """Steps from a branch start up to and including ``step``."""
    steps = resolution_steps()
    chain = []
    cur = step
    while cur in steps:
        chain.append(steps[cur])
        cur = steps[cur].source
    if cur not in BRANCH_STARTS:
        raise AtlasError(f"step {step} does not lead back to a branch start ({cur!r})")
    return chain[::-1]


def composed_map(step: str) -> RationalMap:
    """(x, y, z) -> coordinates after ``step``, through the boundary chart."""
    chain = branch_chain(step)
    m = boundary_maps()[BRANCH_STARTS[chain[0].source]]
    for s in chain:
        m = m.then(s.substitution)
    return m


def same_map(a: RationalMap, b: RationalMap) -> list[str]:
    if a.source_names != b.source_names or a.target_names != b.target_names:
        return [f"coordinates differ: {a.source_names}->{a.target_names} vs {b.source_names}->{b.target_names}"]
    return [
        f"{n}: {x} vs {y}" for n, x, y in zip(a.target_names, a.forward, b.forward) if not (x - y).is_zero()
    ]


@dataclass
class StepRecord:
    step: str
    kind: str
    derived: bool
    matched_golden: bool | None = None
    golden_detail: list[str] = field(default_factory=list)
    # a golden mismatch that equals the recorded misprint exactly
    known_erratum: bool = False
    round_trip: bool = True
    pole_legal: bool | None = None
    polynomial: bool | None = None
    terminal: str | None = None
    terminal_matches_chart: bool | None = None
    terminal_detail: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.round_trip
            and self.matched_golden is not False
            and self.pole_legal is not False
            and self.polynomial is not False
            and self.terminal_matches_chart is not False
        )


@dataclass
class ResolutionReport:
    boundary: dict[str, list[str]]
    steps: list[StepRecord]
    fields: dict[str, VectorField] = field(repr=False, default_factory=dict)

    @property
    def ok(self) -> bool:
        return not any(self.boundary.values()) and all(s.ok for s in self.steps)

    def golden_failures(self) -> dict[str, list[str]]:
        out = {k: v for k, v in self.boundary.items() if v}
        out.update({s.step: s.golden_detail for s in self.steps if s.matched_golden is False})
        return out


def replay_resolution(params: Mapping[str, object] | None = None) -> ResolutionReport:
    """Run every branch of the resolution and collect exact checks.

    ``params`` optionally specialises the parameters throughout (fields,
    maps and printed systems alike).
    """
    params = dict(params or {})

    def spec_f(f: VectorField) -> VectorField:
        return f.specialize(params) if params else f

    def spec_m(m: RationalMap) -> RationalMap:
        return specialize_map(m, params) if params else m

    base = spec_f(core_field())
    bmaps = boundary_maps()
    printed = printed_local_systems()
    fields: dict[str, VectorField] = {}
    boundary: dict[str, list[str]] = {}
    for start, mname in BRANCH_STARTS.items():
        fields[start] = pushforward(base, spec_m(bmaps[mname]), label=start)
        if start in printed:
            boundary[start] = fields[start].mismatches(spec_f(printed[start]))

    charts = {c.name: c for c in load_atlas()}
    golden = golden_systems()
    records = []
    for s in resolution_steps().values():
        rec = StepRecord(s.index, s.kind, s.derived)
        sub = spec_m(s.substitution)
        errs = sub.round_trip_errors()
        rec.round_trip = not errs
        if errs:
            rec.golden_detail = errs
            records.append(rec)
            continue
        g = pushforward(fields[s.source], sub, label=s.index)
        fields[s.index] = g
        if s.expected:
            printed_g = spec_f(golden[s.expected])
            rec.golden_detail = g.mismatches(printed_g)
            rec.matched_golden = not rec.golden_detail
            if rec.golden_detail and s.erratum is not None:
                delta = s.erratum[1].partial_evaluate(params) if params else s.erratum[1]
                rec.known_erratum = erratum_explains(g, printed_g, (s.erratum[0], delta))
        if s.derived and not s.terminal:
            rec.pole_legal = log_pole_legal(g)
        if s.terminal:
            rec.terminal = s.terminal
            rec.polynomial = all(r.is_polynomial_in(g.names) for r in g.rhs)
            target = spec_m(charts[s.terminal].from_U0)
            got = composed_map(s.index)
            got = spec_m(got) if params else got
            rec.terminal_detail = same_map(got, target)
            rec.terminal_matches_chart = not rec.terminal_detail
        records.append(rec)
    return ResolutionReport(boundary, records, fields)


def steps_by_branch() -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for s in resolution_steps().values():
        if s.terminal:
            chain = branch_chain(s.index)
            out[s.terminal] = [c.index for c in chain]
    return out


def denominator_factors(e: RationalExpr, names: Iterable[str]) -> list[Polynomial]:
    """Chart variables dividing the denominator of ``e``."""
    out = []
    for n in names:
        if n in e.den.variables():
            v = Polynomial.variable(e.ctx, n)
            if not poly_gcd(e.den, v).is_constant():
                out.append(v)
    return out
