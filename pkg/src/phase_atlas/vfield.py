"""Vector fields on coordinate charts and their transport under birational maps.

Fixture format (one or more blocks per file)::

    system eq1
      state x y z
      time t
      parameter alpha1 alpha2 alpha3
      dx/dt = x*(t - x - 2*z) + alpha1
      ...
    end

    map uvw
      source x y z
      target u v w
      time t
      parameter alpha1 alpha2 alpha3
      u = x/z
      ...
      inverse
      x = u/w
      ...
    end

Maps may carry a ``parameters`` section (``alpha3 = -alpha3``) describing an action on
the parameters; other block kinds (``chart``, ``step``) reuse the map syntax
and add their own directives.  ``#`` starts a comment.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .symcore import Context, ContextError, Indeterminate, Polynomial, RationalExpr, parse_expression
from .symcore.parser import ParseError

FIXTURE_ENV = "PHASE_ATLAS_FIXTURES"


class MapError(ValueError):
    """A rational map failed its round-trip check or could not be applied."""


class FixtureError(ValueError):
    pass


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VectorField:
    coords: tuple[Indeterminate, ...]
    rhs: tuple[RationalExpr, ...]
    label: str = ""
    ctx: Context | None = None

    def __post_init__(self) -> None:
        if len(self.coords) != len(self.rhs):
            raise ValueError("one right-hand side per coordinate is required")
        ctx = self.ctx or Context(self.coords)
        for r in self.rhs:
            ctx = ctx.merge(r.ctx)
        object.__setattr__(self, "ctx", ctx)
        object.__setattr__(self, "rhs", tuple(r.lift(ctx) for r in self.rhs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.coords)

    def __getitem__(self, name: str) -> RationalExpr:
        return self.rhs[self.names.index(name)]

    def specialize(self, values: Mapping[str, object], label: str | None = None) -> "VectorField":
        """Exactly specialise parameters / coefficients to rational numbers."""
        from fractions import Fraction

        vals = {k: Fraction(v) for k, v in values.items()}
        return VectorField(
            self.coords,
            tuple(r.partial_evaluate(vals) for r in self.rhs),
            label if label is not None else self.label,
            self.ctx,
        )

    def substitute(self, bindings: Mapping[str, RationalExpr], label: str | None = None) -> "VectorField":
        """Substitute into every right-hand side (not a change of coordinates)."""
        return VectorField(
            self.coords,
            tuple(r.substitute(bindings) for r in self.rhs),
            label if label is not None else self.label,
            self.ctx,
        )

    def rename(self, mapping: Mapping[str, str], label: str | None = None) -> "VectorField":
        """Rename coordinates / parameters (a pure relabelling)."""
        new_vars = [Indeterminate(mapping.get(v.name, v.name), v.kind) for v in self.ctx.vars]
        new_ctx = Context(new_vars)
        bindings = {v.name: RationalExpr.var(new_ctx, mapping.get(v.name, v.name)) for v in self.ctx.vars}
        coords = tuple(Indeterminate(mapping.get(c.name, c.name), c.kind) for c in self.coords)
        return VectorField(
            coords,
            tuple(r.substitute(bindings).lift(new_ctx) for r in self.rhs),
            label if label is not None else self.label,
            new_ctx,
        )

    def same_as(self, other: "VectorField") -> bool:
        return self.names == other.names and all(a == b for a, b in zip(self.rhs, other.rhs))

    def mismatches(self, other: "VectorField") -> list[str]:
        """Human-readable term-by-term differences against ``other``."""
        if self.names != other.names:
            return [f"coordinates differ: {self.names} vs {other.names}"]
        out = []
        for n, a, b in zip(self.names, self.rhs, other.rhs):
            d = a - b
            if not d.is_zero():
                out.append(f"d{n}/dt: computed {a} ; expected {b} ; difference {d}")
        return out

    def __str__(self) -> str:
        return "\n".join(f"d{n}/dt = {r}" for n, r in zip(self.names, self.rhs))


@dataclass(frozen=True)
class RationalMap:
    """Birational change of coordinates with stored (hand-derived) inverse."""

    name: str
    source: tuple[Indeterminate, ...]
    target: tuple[Indeterminate, ...]
    forward: tuple[RationalExpr, ...]
    inverse: tuple[RationalExpr, ...]
    parameter_action: Mapping[str, RationalExpr] | None = None

    def __post_init__(self) -> None:
        if len(self.source) != len(self.inverse) or len(self.target) != len(self.forward):
            raise MapError(f"{self.name}: arity mismatch between coordinates and expressions")

    @property
    def source_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.source)

    @property
    def target_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.target)

    def forward_bindings(self) -> dict[str, RationalExpr]:
        return dict(zip(self.target_names, self.forward))

    def inverse_bindings(self) -> dict[str, RationalExpr]:
        return dict(zip(self.source_names, self.inverse))

    def round_trip_errors(self) -> list[str]:
        errs = []
        inv = self.inverse_bindings()
        for n, f in zip(self.target_names, self.forward):
            back = f.substitute(inv)
            if not (back - RationalExpr.var(back.ctx.merge(Context(self.target)), n)).is_zero():
                errs.append(f"{self.name}: forward({n}) o inverse = {back}, expected {n}")
        fwd = self.forward_bindings()
        for n, g in zip(self.source_names, self.inverse):
            back = g.substitute(fwd)
            if not (back - RationalExpr.var(back.ctx.merge(Context(self.source)), n)).is_zero():
                errs.append(f"{self.name}: inverse({n}) o forward = {back}, expected {n}")
        return errs

    @cached_property
    def verified(self) -> bool:
        errs = self.round_trip_errors()
        if errs:
            raise MapError("; ".join(errs))
        return True

    def inverted(self, name: str | None = None) -> "RationalMap":
        if self.parameter_action:
            raise MapError("inverting a map with a parameter action is not supported")
        return RationalMap(name or f"{self.name}^-1", self.target, self.source, self.inverse, self.forward)

    def then(self, other: "RationalMap", name: str | None = None) -> "RationalMap":
        """Composite map: apply ``self`` first, then ``other``."""
        if self.target_names != other.source_names:
            raise MapError(f"cannot compose {self.name} -> {other.name}: {self.target_names} vs {other.source_names}")
        if self.parameter_action or other.parameter_action:
            raise MapError("composition with parameter actions is not supported")
        fwd = self.forward_bindings()
        inv = other.inverse_bindings()
        return RationalMap(
            name or f"{other.name}o{self.name}",
            self.source,
            other.target,
            tuple(f.substitute(fwd) for f in other.forward),
            tuple(g.substitute(inv) for g in self.inverse),
        )

    def apply(self, values: Mapping[str, object]) -> dict[str, object]:
        """Evaluate the forward map numerically (exact or float)."""
        return {n: f.evaluate(values) for n, f in zip(self.target_names, self.forward)}


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def _time_names(ctx: Context) -> list[str]:
    return [v.name for v in ctx.vars if v.kind == "time"]


def pushforward(f: VectorField, m: RationalMap, label: str | None = None) -> VectorField:
    """Rewrite ``f`` in the target coordinates of ``m`` (chain rule + inverse)."""
    if f.names != m.source_names:
        raise MapError(f"field coordinates {f.names} do not match map source {m.source_names}")
    m.verified  # noqa: B018  (raises on a bad round trip)
    inv = m.inverse_bindings()
    extra = [v for v in f.ctx.vars if v.kind != "state"]
    for e in m.forward + m.inverse:
        extra.extend(v for v in e.ctx.vars if v.kind != "state" and v.name in e.variables())
    target_ctx = Context(m.target).extend(dict.fromkeys(extra))
    times = _time_names(f.ctx)
    out = []
    for F in m.forward:
        g = RationalExpr.const(F.ctx, 0)
        for t in times:
            if t in F.variables():
                g = g + F.diff(t)
        for s, fs in zip(m.source_names, f.rhs):
            if s in F.variables():
                g = g + F.diff(s) * fs
        g = g.substitute(inv)
        try:
            out.append(g.lift(target_ctx))
        except ContextError as exc:
            raise MapError(f"{m.name}: source variable survives elimination ({exc})") from None
    return VectorField(m.target, tuple(out), label if label is not None else f"{f.label}->{m.name}", target_ctx)


def _as_poly(ctx: Context, divisor: Polynomial | str | Indeterminate) -> Polynomial | None:
    if isinstance(divisor, Polynomial):
        return divisor
    name = getattr(divisor, "name", divisor)
    if name not in ctx.index:
        return None
    return Polynomial.variable(ctx, name)


def pole_order(f: VectorField, divisor: Polynomial | str | Indeterminate) -> tuple[int, ...]:
    """Exponent of ``divisor`` in each canonical denominator."""
    out = []
    for r in f.rhs:
        d = _as_poly(r.ctx, divisor)
        if d is None:
            out.append(0)
            continue
        if d.is_constant():
            raise ValueError("divisor must be nonconstant")
        k = 0
        den = r.den
        while True:
            q = den.exact_div(d)
            if q is None:
                break
            den = q
            k += 1
        out.append(k)
    return tuple(out)


@dataclass(frozen=True)
class ManifoldRestriction:
    invariant: bool
    residual: RationalExpr
    reduced: VectorField
    solved_for: str


def restrict_to_manifold(f: VectorField, constraint: Polynomial | RationalExpr) -> ManifoldRestriction:
    """Test invariance of {constraint = 0} and restrict the flow to it.

    The constraint must be linear with constant coefficient in one
    coordinate (``x`` or ``x - g(y, z, ...)``); that coordinate is eliminated.
    """
    c = constraint.as_polynomial() if isinstance(constraint, RationalExpr) else constraint
    ctx = f.ctx.merge(c.ctx)
    c = c.lift(ctx)
    solved = None
    for name in f.names:
        if c.degree(name) == 1:
            lead = c.coefficients_in(name)[1]
            if lead.is_constant():
                solved = name
                break
    if solved is None:
        raise ValueError(f"constraint {c} is not solvable for a single coordinate")
    parts = c.coefficients_in(solved)
    value = RationalExpr(-parts.get(0, Polynomial(ctx))) / RationalExpr(parts[1])
    dc = RationalExpr.const(ctx, 0)
    for t in _time_names(ctx):
        dc = dc + RationalExpr(c.derivative(t))
    for n, r in zip(f.names, f.rhs):
        dc = dc + RationalExpr(c.derivative(n)) * r
    residual = dc.substitute({solved: value})
    keep = [(v, r) for v, r in zip(f.coords, f.rhs) if v.name != solved]
    reduced_ctx = Context([v for v in ctx.vars if v.name != solved])
    reduced = VectorField(
        tuple(v for v, _ in keep),
        tuple(r.substitute({solved: value}).lift(reduced_ctx) for _, r in keep),
        f"{f.label}|{c}=0",
        reduced_ctx,
    )
    return ManifoldRestriction(residual.is_zero(), residual.lift(ctx), reduced, solved)


# ---------------------------------------------------------------------------
# fixture files
# ---------------------------------------------------------------------------

_DECL_KINDS = {"state": "state", "time": "time", "parameter": "parameter", "coefficient": "coefficient"}
_DERIV = re.compile(r"^d([A-Za-z_][A-Za-z_0-9]*)/d([A-Za-z_][A-Za-z_0-9]*)$")


@dataclass
class Block:
    kind: str
    name: str
    line: int
    decls: dict[str, list[str]] = field(default_factory=dict)
    directives: dict[str, str] = field(default_factory=dict)
    sections: dict[str, list[tuple[str, str, int]]] = field(default_factory=lambda: {"main": []})

    def context(self, state: Iterable[str] | None = None) -> Context:
        vs = [Indeterminate(n, "state") for n in (state if state is not None else self.decls.get("state", []))]
        for kind in ("time", "parameter", "coefficient"):
            vs.extend(Indeterminate(n, kind) for n in self.decls.get(kind, []))
        return Context(vs)


_SECTION_MARKERS = {"inverse", "parameters"}
_DECL_WORDS = {"state", "time", "parameter", "coefficient", "source", "target"}


def read_blocks(text: str, origin: str = "<string>") -> list[Block]:
    blocks: list[Block] = []
    cur: Block | None = None
    section = "main"
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if cur is None:
            if len(words) != 2:
                raise FixtureError(f"{origin}:{lineno}: expected '<kind> <name>', got {line!r}")
            cur = Block(words[0], words[1], lineno)
            section = "main"
            continue
        if line == "end":
            blocks.append(cur)
            cur = None
            continue
        if line in _SECTION_MARKERS:
            section = line
            cur.sections.setdefault(section, [])
            continue
        if "=" in line:
            lhs, rhs = line.split("=", 1)
            cur.sections[section].append((lhs.strip(), rhs.strip(), lineno))
            continue
        if words[0] in _DECL_WORDS:
            cur.decls.setdefault(words[0], []).extend(words[1:])
        else:
            cur.directives[words[0]] = line[len(words[0]):].strip()
    if cur is not None:
        raise FixtureError(f"{origin}: block {cur.kind} {cur.name} (line {cur.line}) is missing 'end'")
    return blocks


def _parse(text: str, ctx: Context, where: str) -> RationalExpr:
    try:
        return parse_expression(text, ctx)
    except ParseError as exc:
        raise FixtureError(f"{where}: {exc}") from None


def system_from_block(b: Block, origin: str = "<string>") -> VectorField:
    ctx = b.context()
    state = b.decls.get("state", [])
    rhs: dict[str, RationalExpr] = {}
    for lhs, expr, lineno in b.sections["main"]:
        m = _DERIV.match(lhs.replace(" ", ""))
        if not m or m.group(1) not in state:
            raise FixtureError(f"{origin}:{lineno}: bad derivative {lhs!r}")
        rhs[m.group(1)] = _parse(expr, ctx, f"{origin}:{lineno}")
    missing = [s for s in state if s not in rhs]
    if missing:
        raise FixtureError(f"{origin}: system {b.name} lacks equations for {missing}")
    coords = tuple(ctx.var(s) for s in state)
    return VectorField(coords, tuple(rhs[s] for s in state), b.directives.get("label", b.name), ctx)


def map_from_block(b: Block, origin: str = "<string>") -> RationalMap:
    source = b.decls.get("source") or b.decls.get("state")
    target = b.decls.get("target") or source
    if not source:
        raise FixtureError(f"{origin}: map {b.name} declares no source coordinates")
    sctx = b.context(source)
    tctx = b.context(target)

    def collect(section: str, names: Sequence[str], ctx: Context) -> tuple[RationalExpr, ...]:
        eqs = {lhs: (rhs, ln) for lhs, rhs, ln in b.sections.get(section, [])}
        missing = [n for n in names if n not in eqs]
        if missing:
            raise FixtureError(f"{origin}: {b.kind} {b.name} [{section}] lacks {missing}")
        return tuple(_parse(eqs[n][0], ctx, f"{origin}:{eqs[n][1]}") for n in names)

    forward = collect("main", target, sctx)
    inverse = collect("inverse", source, tctx)
    action = None
    if "parameters" in b.sections:
        pctx = b.context(source)
        action = {lhs: _parse(rhs, pctx, f"{origin}:{ln}") for lhs, rhs, ln in b.sections["parameters"]}
    return RationalMap(
        b.name,
        tuple(sctx.var(n) for n in source),
        tuple(tctx.var(n) for n in target),
        forward,
        inverse,
        action,
    )


def fixture_dir() -> Path:
    override = os.environ.get(FIXTURE_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("phase_atlas") / "fixtures"))


def load_blocks(filename: str) -> list[Block]:
    path = fixture_dir() / filename
    return read_blocks(path.read_text(encoding="utf-8"), str(path))


def load_systems(filename: str) -> dict[str, VectorField]:
    path = fixture_dir() / filename
    return {b.name: system_from_block(b, str(path)) for b in load_blocks(filename) if b.kind == "system"}


def load_maps(filename: str, kinds: Iterable[str] = ("map",)) -> dict[str, RationalMap]:
    path = fixture_dir() / filename
    kinds = set(kinds)
    return {b.name: map_from_block(b, str(path)) for b in load_blocks(filename) if b.kind in kinds}
