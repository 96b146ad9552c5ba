"""Integration of the core system through movable poles by chart switching.

The flow is polynomial on every chart of the atlas, so an explicit
Runge-Kutta method never sees a singularity: when the coordinates of the
current chart grow past ``switch_radius`` the state is moved, by an exact
rational transition map, to the chart in which it is smallest.  Poles of
the original variables show up as zero crossings of chart coordinates that
sit in the denominators of the map back to (x, y, z).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable, Mapping, Sequence

from scipy.optimize import brentq

from .atlas import Chart, builtin_atlas, core_field
from .symcore import Polynomial, RationalExpr
from .symcore.linalg import rref
from .vfield import VectorField

PARAMS = ("alpha1", "alpha2", "alpha3")


class IntegrationError(RuntimeError):
    pass


class AtlasIncompleteError(IntegrationError):
    """No chart holds the state with all coordinates below the switch radius."""


class StepSizeUnderflow(IntegrationError):
    pass


class NoBracketError(ValueError):
    pass


# ---------------------------------------------------------------------------
# float evaluation of exact expressions
# ---------------------------------------------------------------------------


def _poly_source(p: Polynomial, names: Sequence[str]) -> str:
    if p.is_zero():
        return "0.0"
    terms = []
    for e, c in p.sorted_terms():
        factors = [repr(float(c))] if c != 1 else []
        for i, k in enumerate(e):
            if k == 1:
                factors.append(names[i])
            elif k > 1:
                factors.append(f"{names[i]}**{k}")
        terms.append("*".join(factors) or "1.0")
    return " + ".join(terms)


def _div(a: float, b: float) -> float:
    if b == 0.0:
        return math.copysign(math.inf, a) if a != 0.0 else math.nan
    return a / b


class CompiledExprs:
    """Expressions over (t, three coordinates, parameters) turned into one
    Python function; the exact objects stay untouched."""

    def __init__(self, exprs: Sequence[RationalExpr], coords: Sequence[str], label: str = ""):
        self.label = label
        self.coords = tuple(coords)
        self.args = ("t", *self.coords, *PARAMS)
        lines = [f"def _f({', '.join(self.args)}):"]
        outs = []
        for k, e in enumerate(exprs):
            extra = e.variables() - set(self.args)
            if extra:
                raise ValueError(f"{label}: expression uses {sorted(extra)}, which are not arguments")
            num = _poly_source(e.num, e.ctx.names)
            if e.den.is_constant():
                scale = 1 / e.den.constant_value()
                body = f"({num})" if scale == 1 else f"({num})*{float(scale)!r}"
            else:
                body = f"_div({num}, {_poly_source(e.den, e.ctx.names)})"
            lines.append(f"    _r{k} = {body}")
            outs.append(f"_r{k}")
        lines.append(f"    return ({', '.join(outs)},)")
        self.source = "\n".join(lines)
        scope = {"_div": _div}
        exec(compile(self.source, f"<compiled {label}>", "exec"), scope)  # noqa: S102
        self._fn = scope["_f"]

    def __call__(self, t: float, y: Sequence[float], params: Sequence[float]) -> tuple[float, ...]:
        return self._fn(t, *y, *params)


def compile_field(f: VectorField) -> CompiledExprs:
    return CompiledExprs(f.rhs, f.names, f.label)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)
# ---------------------------------------------------------------------------

C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
B = A[6] + (0.0,)
# fifth- minus fourth-order weights
E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# continuous extension (Hairer, Norsett & Wanner)
D = (
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
)


@dataclass
class StepResult:
    y: tuple[float, ...]
    error: tuple[float, ...]
    k: list[tuple[float, ...]]


def step_embedded(f: Callable, y: Sequence[float], t: float, h: float, k1: Sequence[float] | None = None) -> StepResult:
    """One Dormand-Prince step; ``f(t, y)`` returns the derivative tuple."""
    n = len(y)
    k = [tuple(k1) if k1 is not None else tuple(f(t, y))]
    for s in range(1, 7):
        a = A[s]
        ys = tuple(y[i] + h * sum(a[j] * k[j][i] for j in range(s) if a[j]) for i in range(n))
        k.append(tuple(f(t + C[s] * h, ys)))
    ynew = tuple(y[i] + h * sum(B[j] * k[j][i] for j in range(6) if B[j]) for i in range(n))
    err = tuple(h * sum(E[j] * k[j][i] for j in range(7) if E[j]) for i in range(n))
    for v in ynew + k[-1]:
        if not math.isfinite(v):
            raise FloatingPointError("nonfinite value in a Runge-Kutta stage")
    return StepResult(ynew, err, k)


def dense_coefficients(y0, y1, k, h) -> tuple[tuple[float, ...], ...]:
    n = len(y0)
    r1 = tuple(y0)
    r2 = tuple(y1[i] - y0[i] for i in range(n))
    r3 = tuple(h * k[0][i] - r2[i] for i in range(n))
    r4 = tuple(r2[i] - h * k[6][i] - r3[i] for i in range(n))
    r5 = tuple(h * sum(D[j] * k[j][i] for j in range(7) if D[j]) for i in range(n))
    return r1, r2, r3, r4, r5


def dense_eval(rc, theta: float) -> tuple[float, ...]:
    r1, r2, r3, r4, r5 = rc
    t1 = 1.0 - theta
    return tuple(
        r1[i] + theta * (r2[i] + t1 * (r3[i] + theta * (r4[i] + t1 * r5[i]))) for i in range(len(r1))
    )


def error_norm(err, y0, y1, rtol: float, atol: float) -> float:
    s = 0.0
    for e, a, b in zip(err, y0, y1):
        sc = atol + rtol * max(abs(a), abs(b))
        s += (e / sc) ** 2
    return math.sqrt(s / len(err))


# ---------------------------------------------------------------------------
# atlas in floating point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    switch_radius: float = 10.0
    hysteresis: float = 0.5
    # None means 1000 * switch_radius; set equal to switch_radius for the strict rule
    hard_radius: float | None = None
    max_step: float = math.inf
    min_step: float = 1e-14
    dense_output: bool = True
    check_switches: bool = True
    max_steps: int = 200_000

    def __post_init__(self) -> None:
        if not 0 < self.hysteresis < 1:
            raise ValueError("hysteresis must lie in (0, 1)")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.hard_radius is None:
            object.__setattr__(self, "hard_radius", 1000.0 * self.switch_radius)
        if self.hard_radius < self.switch_radius:
            raise ValueError("hard_radius must be at least switch_radius")

    @classmethod
    def with_tol(cls, tol: float, **kw) -> "IntegratorConfig":
        return cls(rel_tol=tol, abs_tol=tol, **kw)


def _pole_variables(c: Chart) -> list[str]:
    """Chart coordinates dividing some denominator of the map back to U0."""
    out = []
    for n in c.names:
        for e in c.from_U0.inverse:
            if n in e.den.variables():
                out.append(n)
                break
    return out


class FloatAtlas:
    """Compiled chart fields and all pairwise transition maps."""

    def __init__(self, charts: Sequence[Chart] | None = None):
        self.charts = list(charts or builtin_atlas())
        self.names = [c.name for c in self.charts]
        self.fields = [compile_field(c.field) for c in self.charts]
        self.to_U0 = [CompiledExprs(c.from_U0.inverse, c.names, f"{c.name}->U0") for c in self.charts]
        self.pole_vars = [[c.names.index(n) for n in _pole_variables(c)] for c in self.charts]
        self._exact: dict[tuple[int, int], tuple[RationalExpr, ...]] = {}
        self._compiled: dict[tuple[int, int], CompiledExprs] = {}

    def exact_transition(self, i: int, j: int) -> tuple[RationalExpr, ...]:
        key = (i, j)
        if key not in self._exact:
            a, b = self.charts[i], self.charts[j]
            inv = dict(zip(a.from_U0.source_names, a.from_U0.inverse))
            self._exact[key] = tuple(e.substitute(inv) for e in b.from_U0.forward)
        return self._exact[key]

    def transition(self, i: int, j: int) -> CompiledExprs:
        key = (i, j)
        if key not in self._compiled:
            self._compiled[key] = CompiledExprs(
                self.exact_transition(i, j), self.charts[i].names, f"{self.names[i]}->{self.names[j]}"
            )
        return self._compiled[key]

    def image(self, i: int, j: int, t: float, y, params) -> tuple[float, ...]:
        if i == j:
            return tuple(y)
        try:
            return self.transition(i, j)(t, y, params)
        except (ZeroDivisionError, OverflowError):
            return (math.inf,) * 3

    def u0(self, i: int, t: float, y, params) -> tuple[float, ...]:
        try:
            return self.to_U0[i](t, y, params)
        except (ZeroDivisionError, OverflowError):
            return (math.inf,) * 3

    def exact_image(self, i: int, j: int, t: float, y, params) -> tuple[Fraction, ...] | None:
        env = {"t": Fraction(t), **{n: Fraction(v) for n, v in zip(PARAMS, params)}}
        env.update({n: Fraction(v) for n, v in zip(self.charts[i].names, y)})
        exprs = self.exact_transition(i, j) if i != j else None
        if exprs is None:
            return tuple(Fraction(v) for v in y)
        try:
            return tuple(e.evaluate(env) for e in exprs)
        except ZeroDivisionError:
            return None


@lru_cache(maxsize=None)
def default_atlas() -> FloatAtlas:
    return FloatAtlas()


def sup_norm(y) -> float:
    m = 0.0
    for v in y:
        if not math.isfinite(v):
            return math.inf
        m = max(m, abs(v))
    return m


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass
class Segment:
    t0: float
    t1: float
    chart: int
    coeffs: tuple

    def __call__(self, t: float) -> tuple[float, ...]:
        return dense_eval(self.coeffs, (t - self.t0) / (self.t1 - self.t0))


@dataclass
class PoleEvent:
    t_star: float
    chart: str
    coordinate: str
    diverging: list[str]
    segment: int


@dataclass
class Switch:
    t: float
    source: str
    target: str
    before: tuple[float, ...]
    after: tuple[float, ...]
    transition_error: float | None = None
    round_trip_error: float | None = None


@dataclass
class Trajectory:
    params: tuple[float, ...]
    samples: list[tuple[float, str, tuple[float, ...]]] = field(default_factory=list)
    pole_events: list[PoleEvent] = field(default_factory=list)
    switches: list[Switch] = field(default_factory=list)
    segments: list[Segment] = field(default_factory=list, repr=False)
    atlas: FloatAtlas | None = field(default=None, repr=False)
    steps: int = 0
    rejected: int = 0
    # accepted steps that ended above the switch radius with no better chart
    over_radius_steps: int = 0
    peak_norm: float = 0.0

    @property
    def t_end(self) -> float:
        return self.samples[-1][0]

    def chart_index(self, name: str) -> int:
        return self.atlas.names.index(name)

    def segment_at(self, t: float) -> Segment:
        for s in self.segments:
            lo, hi = min(s.t0, s.t1), max(s.t0, s.t1)
            if lo <= t <= hi:
                return s
        raise ValueError(f"t = {t} outside the integrated span")

    def chart_state(self, t: float) -> tuple[str, tuple[float, ...]]:
        s = self.segment_at(t)
        return self.atlas.names[s.chart], s(t)

    def state(self, t: float) -> tuple[float, ...]:
        """(x, y, z) at time ``t`` from the dense output."""
        s = self.segment_at(t)
        return self.atlas.u0(s.chart, t, s(t), self.params)

    def end_state_in(self, chart: str) -> tuple[float, ...]:
        t, name, y = self.samples[-1]
        return self.atlas.image(self.chart_index(name), self.chart_index(chart), t, y, self.params)

    def u0_samples(self):
        for t, name, y in self.samples:
            yield t, name, y, self.atlas.u0(self.chart_index(name), t, y, self.params)

    def max_switch_error(self) -> float:
        errs = [s.round_trip_error for s in self.switches if s.round_trip_error is not None]
        errs += [s.transition_error for s in self.switches if s.transition_error is not None]
        return max(errs, default=0.0)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "chart", "c1", "c2", "c3", "x", "y", "z"])
            for t, name, y, u in self.u0_samples():
                w.writerow([fmt(t), name, *map(fmt, y), *map(fmt, u)])

    def events_json(self) -> list[dict]:
        return [asdict(e) for e in self.pole_events]


def fmt(v: float) -> str:
    if not math.isfinite(v):
        return "inf"
    return f"{v:.17g}"


def _initial_step(f, t, y, k1, direction, atol, rtol) -> float:
    sc = [atol + rtol * abs(v) for v in y]
    d0 = math.sqrt(sum((v / s) ** 2 for v, s in zip(y, sc)) / len(y))
    d1 = math.sqrt(sum((v / s) ** 2 for v, s in zip(k1, sc)) / len(y))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = [a + direction * h0 * b for a, b in zip(y, k1)]
    k2 = f(t + direction * h0, y1)
    d2 = math.sqrt(sum(((a - b) / s) ** 2 for a, b, s in zip(k2, k1, sc)) / len(y)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def _choose_chart(fa: FloatAtlas, cur: int, t: float, y, params, cfg: IntegratorConfig) -> tuple[int, tuple[float, ...]] | None:
    """Pick a chart for a state whose sup-norm exceeds the switch radius.

    Returns None when staying put is best.  A chart below ``hysteresis * R``
    wins outright; otherwise the least-norm chart is taken if it improves the
    current norm by the hysteresis factor.  Only when every chart, the
    current one included, sits above ``hard_radius`` is the atlas declared
    incomplete.
    """
    n_cur = sup_norm(y)
    best, best_y, best_n = None, None, math.inf
    for j in range(len(fa.charts)):
        if j == cur:
            continue
        yj = fa.image(cur, j, t, y, params)
        n = sup_norm(yj)
        if n < best_n:
            best, best_y, best_n = j, yj, n
    if min(best_n, n_cur) >= cfg.hard_radius:
        raise AtlasIncompleteError(
            f"t = {t}: no chart below radius {cfg.hard_radius:g} (best {best_n:.3g}) from {fa.names[cur]} state {y}"
        )
    if best is not None and (best_n < cfg.hysteresis * cfg.switch_radius or best_n < cfg.hysteresis * n_cur):
        return best, best_y
    return None


def _rel_err(a: Sequence, b: Sequence) -> float:
    return max(abs(float(x) - float(y)) / max(1.0, abs(float(y))) for x, y in zip(a, b))


def _grow(hh: float, err: float, cfg: IntegratorConfig) -> float:
    fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err**-0.2))
    return min(abs(hh) * fac, cfg.max_step)


def _attempt(f, t, y, k1, h, t1, direction, cfg: IntegratorConfig, counts, where: str = ""):
    """Shrink ``h`` until one step passes the error test; returns (h, result, err, last)."""
    while True:
        if counts.steps + counts.rejected > cfg.max_steps:
            raise IntegrationError(f"step budget exhausted at t = {t}")
        last = abs(t1 - t) <= abs(h) * (1 + 1e-12)
        hh = (t1 - t) if last else direction * abs(h)
        try:
            res = step_embedded(f, y, t, hh, k1)
            err = error_norm(res.error, y, res.y, cfg.rel_tol, cfg.abs_tol)
        except (FloatingPointError, OverflowError, ZeroDivisionError):
            err = math.inf
        if err <= 1.0:
            return hh, res, err, last
        counts.rejected += 1
        fac = 0.25 if not math.isfinite(err) else max(0.2, 0.9 * err**-0.2)
        h = abs(hh) * fac
        if h < cfg.min_step:
            raise StepSizeUnderflow(f"step size {h:.3g} below minimum at t = {t} {where}".rstrip())


@dataclass
class _Counts:
    steps: int = 0
    rejected: int = 0


def integrate_adaptive(
    f: Callable, t_span: tuple[float, float], y0: Sequence[float], cfg: IntegratorConfig | None = None
) -> tuple[tuple[float, ...], int, int]:
    """Plain adaptive solve of y' = f(t, y) with no charts; (y(t1), steps, rejected)."""
    cfg = cfg or IntegratorConfig()
    t, t1 = map(float, t_span)
    direction = 1.0 if t1 > t else -1.0
    y = tuple(float(v) for v in y0)
    k1 = f(t, y)
    h = min(_initial_step(f, t, y, k1, direction, cfg.abs_tol, cfg.rel_tol), cfg.max_step)
    counts = _Counts()
    while (t1 - t) * direction > 0:
        hh, res, err, last = _attempt(f, t, y, k1, h, t1, direction, cfg, counts)
        t, y, k1 = (t1 if last else t + hh), res.y, res.k[6]
        counts.steps += 1
        h = _grow(hh, err, cfg)
    return y, counts.steps, counts.rejected


def integrate_meromorphic(
    ic: Sequence[float],
    t_span: tuple[float, float],
    params: Sequence[float],
    cfg: IntegratorConfig | None = None,
    chart: str = "U0",
    atlas: FloatAtlas | None = None,
) -> Trajectory:
    """Integrate the core system from ``ic`` (given in ``chart``) over ``t_span``."""
    cfg = cfg or IntegratorConfig()
    fa = atlas or default_atlas()
    params = tuple(float(p) for p in params)
    t0, t1 = map(float, t_span)
    if t0 == t1:
        raise ValueError("empty time span")
    if not all(math.isfinite(v) for v in (*ic, *params)):
        raise ValueError("initial condition and parameters must be finite")
    direction = 1.0 if t1 > t0 else -1.0
    ci = fa.names.index(chart)
    y = tuple(float(v) for v in ic)
    t = t0
    traj = Trajectory(params, atlas=fa)

    if sup_norm(y) > cfg.switch_radius:
        pick = _choose_chart(fa, ci, t, y, params, cfg)
        if pick is not None:
            traj.switches.append(Switch(t, fa.names[ci], fa.names[pick[0]], y, pick[1]))
            ci, y = pick
    traj.samples.append((t, fa.names[ci], y))

    def rhs_for(i):
        fn = fa.fields[i]
        return lambda tt, yy: fn(tt, yy, params)

    f = rhs_for(ci)
    k1 = f(t, y)
    h = min(_initial_step(f, t, y, k1, direction, cfg.abs_tol, cfg.rel_tol), cfg.max_step)
    while (t1 - t) * direction > 0:
        hh, res, err, last = _attempt(f, t, y, k1, h, t1, direction, cfg, traj, f"in {fa.names[ci]}")
        tn = t1 if last else t + hh
        seg = Segment(t, tn, ci, dense_coefficients(y, res.y, res.k, hh))
        traj.segments.append(seg)
        for k in fa.pole_vars[ci]:
            a, b = y[k], res.y[k]
            if a == 0.0 or (a > 0) == (b > 0) and b != 0.0:
                continue
            if b == 0.0:
                ts = tn
            else:
                ts = brentq(lambda s: seg(s)[k], min(t, tn), max(t, tn), xtol=1e-15, rtol=1e-15)
            diverging = [
                n for n, e in zip(("x", "y", "z"), fa.charts[ci].from_U0.inverse) if fa.charts[ci].names[k] in e.den.variables()
            ]
            traj.pole_events.append(PoleEvent(ts, fa.names[ci], fa.charts[ci].names[k], diverging, len(traj.segments) - 1))
        t, y, k1 = tn, res.y, res.k[6]
        traj.steps += 1
        traj.samples.append((t, fa.names[ci], y))
        h = _grow(hh, err, cfg)
        if sup_norm(y) > cfg.switch_radius and (t1 - t) * direction > 0:
            pick = _choose_chart(fa, ci, t, y, params, cfg)
            if pick is None:
                traj.over_radius_steps += 1
                traj.peak_norm = max(traj.peak_norm, sup_norm(y))
                continue
            nj, ny = pick
            sw = Switch(t, fa.names[ci], fa.names[nj], y, ny)
            if cfg.check_switches:
                exact = fa.exact_image(ci, nj, t, y, params)
                if exact is not None:
                    sw.transition_error = _rel_err(ny, exact)
                back = fa.exact_image(nj, ci, t, ny, params)
                if back is not None:
                    sw.round_trip_error = _rel_err(back, y)
            traj.switches.append(sw)
            ci, y = nj, ny
            f = rhs_for(ci)
            k1 = f(t, y)
            traj.samples[-1] = (t, fa.names[ci], y)
    return traj


# ---------------------------------------------------------------------------
# poles
# ---------------------------------------------------------------------------


@dataclass
class PoleFit:
    t_star: float
    residue: float
    left: float
    right: float

    @property
    def agreement(self) -> float:
        return abs(self.left - self.right) / max(abs(self.residue), 1e-300)


def simple_pole_fit(
    value: Callable[[float], float],
    t_star: float | None = None,
    vanishing: Callable[[float], float] | None = None,
    bracket: tuple[float, float] | None = None,
    delta: float = 1e-3,
) -> PoleFit:
    """Locate a simple pole and estimate its residue from both sides.

    With ``vanishing`` and ``bracket`` the pole is found as a root of the
    vanishing function; the residue is the limit of ``(t - t*) * value(t)``
    as t -> t*, extrapolated from offsets delta, 2 delta, 4 delta so that the
    first two correction terms cancel.
    """
    if t_star is None:
        if vanishing is None or bracket is None:
            raise ValueError("need t_star or a vanishing function with a bracket")
        a, b = bracket
        fa, fb = vanishing(a), vanishing(b)
        if fa == 0:
            t_star = a
        elif fb == 0:
            t_star = b
        elif (fa > 0) == (fb > 0):
            raise NoBracketError(f"no sign change of the vanishing coordinate on [{a}, {b}]")
        else:
            t_star = brentq(vanishing, a, b, xtol=1e-15, rtol=1e-15)

    def g(d: float) -> float:
        return d * value(t_star + d)

    def limit(d: float) -> float:
        return (8 * g(d) - 6 * g(2 * d) + g(4 * d)) / 3

    right, left = limit(delta), limit(-delta)
    return PoleFit(t_star, 0.5 * (left + right), left, right)


@dataclass
class PoleEstimate:
    t_star: float
    coordinate: str
    chart: str
    residues: dict[str, PoleFit]

    def residue_vector(self) -> tuple[float, float, float]:
        return tuple(self.residues[n].residue for n in ("x", "y", "z"))


def estimate_pole(traj: Trajectory, event: PoleEvent, delta: float = 1e-3) -> PoleEstimate:
    """t* and residues of all three variables at a recorded pole event.

    The fitting offset shrinks below ``delta`` when another pole lies close
    by, since its regular part would otherwise leak into the fit.
    """
    seg = traj.segments[event.segment]
    k = traj.atlas.charts[seg.chart].names.index(event.coordinate)
    t_star = simple_pole_fit(
        lambda s: s, vanishing=lambda s: seg(s)[k], bracket=(min(seg.t0, seg.t1), max(seg.t0, seg.t1))
    ).t_star
    gaps = [abs(e.t_star - t_star) for e in traj.pole_events]
    gaps = [g for g in gaps if g > 1e-9]
    if gaps:
        delta = min(delta, min(gaps) / 40)
    lo = min(traj.samples[0][0], traj.t_end)
    hi = max(traj.samples[0][0], traj.t_end)
    if not (lo <= t_star - 4 * delta and t_star + 4 * delta <= hi):
        raise NoBracketError(f"pole at {t_star} too close to the end of the span for delta = {delta}")
    fits = {}
    for i, n in enumerate(("x", "y", "z")):
        fits[n] = simple_pole_fit(lambda s, i=i: traj.state(s)[i], t_star=t_star, delta=delta)
    return PoleEstimate(t_star, event.coordinate, event.chart, fits)


def laurent_balances(f: VectorField | None = None) -> list[tuple[Fraction, Fraction, Fraction]]:
    """Nonzero c with -c = Q(c), Q the quadratic part of the field.

    These are the residues of solutions x ~ c / (t - t*).  Each Q_i is
    required to be divisible by its own variable, which splits the problem
    into linear systems.
    """
    f = f or core_field()
    names = f.names
    ctx = f.ctx
    state = [ctx.index[n] for n in names]
    n = len(names)
    lin = []
    for name, r in zip(names, f.rhs):
        p = r.as_polynomial()
        quad = {e: c for e, c in p.terms.items() if sum(e[i] for i in state) == 2 and sum(e) == 2}
        cof = Polynomial(ctx, quad).exact_div(Polynomial.variable(ctx, name))
        if cof is None:
            raise ValueError(f"quadratic part of d{name}/dt is not divisible by {name}")
        lin.append([cof.coefficient_of({m: 1}).constant_value() for m in names])
    # c_i * (1 + L_i(c)) = 0: each equation picks one factor
    sols = set()
    for choice in product((0, 1), repeat=n):
        rows = []
        for i, pick in enumerate(choice):
            if pick:
                rows.append(lin[i] + [Fraction(-1)])
            else:
                rows.append([Fraction(int(j == i)) for j in range(n)] + [Fraction(0)])
        red, piv = rref(rows, n + 1)
        if n in piv:
            continue
        if len(piv) < n:
            raise ValueError("positive-dimensional family of balances")
        c = tuple(red[piv.index(j)][-1] for j in range(n))
        if any(c):
            sols.add(c)
    return sorted(sols)


def predicted_residues(est: PoleEstimate, balances=None, threshold: float = 1e-2):
    """The Laurent balance whose support matches the observed divergence."""
    balances = balances or laurent_balances()
    vec = est.residue_vector()
    support = tuple(abs(v) > threshold for v in vec)
    for b in balances:
        if tuple(c != 0 for c in b) == support:
            return b
    return None


def residue_mismatch(est: PoleEstimate, balance) -> float:
    """Worst relative error over diverging components, absolute over the rest."""
    worst = 0.0
    for v, c in zip(est.residue_vector(), balance):
        c = float(c)
        worst = max(worst, abs(v - c) / abs(c) if c else abs(v))
    return worst


# ---------------------------------------------------------------------------
# symmetry, numerically
# ---------------------------------------------------------------------------


def backlund_commutation_test(ic, params, s, t_span, cfg: IntegratorConfig | None = None) -> float:
    """Max deviation between (integrate, then map) and (map, then integrate)."""
    from .symmetry import BacklundPoleError, apply_backlund

    cfg = cfg or IntegratorConfig()
    pnames = dict(zip(PARAMS, params))
    A_ = integrate_meromorphic(ic, t_span, params, cfg)
    locus = [RationalExpr(p) for p in s.pole_locus]
    values = [
        [d.evaluate({"x": u[0], "y": u[1], "z": u[2], "t": t, **pnames}) for d in locus]
        for t, _, _, u in A_.u0_samples()
    ]
    for d, col in zip(locus, zip(*values)):
        if not all(math.isfinite(v) and v != 0 for v in col) or min(col) < 0 < max(col):
            raise BacklundPoleError(f"trajectory meets the pole locus {d} = 0 of {s.name}")
    end = A_.state(A_.t_end)
    mapped_end, _ = apply_backlund(s, dict(zip(("x", "y", "z"), end)), pnames)
    ic_m, p_m = apply_backlund(s, dict(zip(("x", "y", "z"), ic)), pnames)
    B_ = integrate_meromorphic([ic_m[n] for n in ("x", "y", "z")], t_span, [p_m[n] for n in PARAMS], cfg)
    other = B_.state(B_.t_end)
    return max(abs(mapped_end[n] - v) / max(1.0, abs(v)) for n, v in zip(("x", "y", "z"), other))


def events_to_json(traj: Trajectory, estimates: Mapping[int, PoleEstimate] | None = None) -> str:
    out = []
    for i, e in enumerate(traj.pole_events):
        rec = asdict(e)
        if estimates and i in estimates:
            rec["residues"] = {n: fit.residue for n, fit in estimates[i].residues.items()}
            rec["t_star_refined"] = estimates[i].t_star
        out.append(rec)
    return json.dumps(out, indent=2)
