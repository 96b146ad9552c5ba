"""``phase-atlas`` command line: verify, derive, integrate, transform.

Every subcommand prints one JSON report to stdout::

    {"command": ..., "checks": [{"name", "status", "detail"}], "elapsed_ms": ..., "data": {...}}

Exit status is 0 when no check FAILs, 1 otherwise, and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from . import atlas as _atlas
from . import mero as _mero
from . import singular as _singular
from . import symmetry as _symmetry
from .vfield import FixtureError, MapError, load_blocks, map_from_block

PASS, FAIL, WARN = "PASS", "FAIL", "WARN"
SCHEMA_PATH = Path(__file__).parent / "schemas" / "report.schema.json"


@dataclass
class Report:
    command: str
    checks: list[dict] = field(default_factory=list)
    elapsed_ms: float = 0.0
    data: dict = field(default_factory=dict)

    def add(self, name: str, status: str, detail: object = "") -> None:
        if not isinstance(detail, str):
            detail = "; ".join(map(str, detail)) if isinstance(detail, (list, tuple)) else str(detail)
        self.checks.append({"name": name, "status": status, "detail": detail})

    def check(self, name: str, ok: bool, detail: object = "") -> None:
        self.add(name, PASS if ok else FAIL, detail)

    def extend(self, other: "Report") -> None:
        self.checks.extend(other.checks)
        self.data.update(other.data)

    @property
    def failed(self) -> bool:
        return any(c["status"] == FAIL for c in self.checks)

    def to_json(self) -> str:
        out = {"command": self.command, "checks": self.checks, "elapsed_ms": round(self.elapsed_ms, 3)}
        if self.data:
            out["data"] = self.data
        return json.dumps(out, indent=2, ensure_ascii=False)


def clear_caches() -> None:
    """Forget everything loaded from fixtures (for a changed fixture directory)."""
    for fn in (
        _atlas.core_field,
        _atlas.boundary_maps,
        _atlas.printed_local_systems,
        _atlas.builtin_atlas,
        _atlas.resolution_steps,
        _atlas.golden_systems,
        _symmetry.backlund_maps,
        _symmetry.derive_invariant_family,
        _mero.default_atlas,
    ):
        fn.cache_clear()


def _s(x) -> str:
    return str(x)


def _fr(x: Fraction) -> str:
    return str(Fraction(x))


def _tup(xs) -> str:
    return "(" + ", ".join(_fr(x) for x in xs) + ")"


def _guard(report: Report, name: str, fn: Callable[[], None]) -> None:
    """Run ``fn``; a fixture or algebra error becomes a FAIL instead of a crash."""
    try:
        fn()
    except (FixtureError, MapError, _atlas.AtlasError, KeyError, ValueError, ArithmeticError) as exc:
        report.add(name, FAIL, f"{type(exc).__name__}: {exc}")


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def verify_atlas() -> Report:
    rep = Report("verify atlas")
    charts, steps = [], []
    rep.data["charts"] = charts
    rep.data["steps"] = steps

    def run() -> None:
        base = _atlas.core_field()
        blocks = [b for b in load_blocks("atlas.txt") if b.kind == "chart"]
        names = [b.name for b in blocks]
        missing = [f"U{j}" for j in range(1, 8) if f"U{j}" not in names]
        rep.check("charts U1..U7 present", not missing, f"missing {missing}" if missing else f"{len(names)} charts")
        for b in blocks:
            t0 = time.perf_counter()
            entry = {"chart": b.name, "polynomial": False, "ms_elapsed": 0.0}
            try:
                m = map_from_block(b, "atlas.txt")
                errs = m.round_trip_errors()
                if errs:
                    rep.add(f"chart {b.name}", FAIL, ["round trip fails"] + errs)
                else:
                    hol = _atlas.certify_holomorphic(_atlas.Chart(b.name, m, base))
                    entry["polynomial"] = hol.polynomial
                    rep.check(
                        f"chart {b.name}",
                        hol.polynomial,
                        "round trip exact; pushed-forward field polynomial" if hol.polynomial else hol.offending_terms,
                    )
            except (FixtureError, MapError, ValueError, ArithmeticError) as exc:
                rep.add(f"chart {b.name}", FAIL, f"{type(exc).__name__}: {exc}")
            entry["ms_elapsed"] = round(1000 * (time.perf_counter() - t0), 3)
            charts.append(entry)

        inv = _atlas.invariant_surface_check()
        rep.check("x = 0 invariant at alpha1 = 0", inv.invariant, f"residual {inv.residual}")

        res = _atlas.replay_resolution()
        for s in res.steps:
            steps.append({"step": s.step, "matched_golden": s.matched_golden})
            if s.terminal:
                rep.check(
                    f"resolution reaches {s.terminal}",
                    bool(s.terminal_matches_chart and s.polynomial),
                    s.terminal_detail or f"composed substitutions end at {s.terminal} ({s.step})",
                )

    _guard(rep, "atlas", run)
    return rep


def verify_transitions() -> Report:
    """All 56 ordered pairs: the transported field equals the target field."""
    rep = Report("verify transitions")

    def run() -> None:
        charts = _atlas.builtin_atlas()
        for a in charts:
            for b in charts:
                if a is not b:
                    mism = _atlas.check_transition(a, b)
                    rep.check(f"transition {a.name}->{b.name}", not mism, mism or "consistent")

    _guard(rep, "transitions", run)
    return rep


def verify_singularities() -> Report:
    rep = Report("verify singularities")

    def run() -> None:
        table = _singular.verify_table()
        rows = []
        for r in table.rows:
            rows.append(
                {
                    "name": r.name,
                    "homogeneous": [_fr(c) for c in r.homogeneous],
                    "chart": r.chart,
                    "index": None if r.index is None else [_fr(c) for c in r.index],
                    "paper_type": r.paper_type,
                    "matched": r.matched,
                }
            )
            rep.check(
                f"singular point {r.name}",
                r.matched,
                r.detail or f"[{':'.join(_fr(c) for c in r.homogeneous)}] index {_tup(r.index)}",
            )
        rep.check("seven accessible points", len(table.rows) == 7, f"{len(table.rows)} matched rows")
        rep.check(
            "no unlisted accessible points",
            not table.extra_points,
            [_tup(p) for p in table.extra_points] or "none",
        )
        rep.data["rows"] = rows

    _guard(rep, "singularities", run)
    return rep


def verify_symmetry() -> Report:
    rep = Report("verify symmetry")

    def run() -> None:
        f = _atlas.core_field()
        residuals = {}
        for name, s in _symmetry.backlund_maps().items():
            res = _symmetry.invariance_residual(f, s)
            nonzero = [f"d{n}/dt: {r}" for n, r in zip(f.names, res) if not r.is_zero()]
            residuals[name] = [_s(r) for r in res]
            rep.check(f"{name} preserves the system", not nonzero, nonzero or "residuals identically zero")
        rep.data["residuals"] = residuals
        rep.extend(_family_checks(_symmetry.derive_invariant_family()))

    _guard(rep, "symmetry", run)
    return rep


def _family_checks(fam) -> Report:
    rep = Report("family")
    rep.check("invariant family dimension 8", fam.dimension == 8, f"nullspace dimension {fam.dimension}")
    rep.check("family contains the core system", fam.contains_core)
    rep.check(
        "quadratic and t-linear terms match printed family",
        fam.quadratic_match,
        [d for v in fam.printed_match.values() for d in v] or "all 27 coefficients agree",
    )
    for n, d in fam.constant_discrepancies.items():
        rep.add(f"constant term of d{n}/dt", WARN, f"differs from the printed family: {d}")
    return rep


def verify_resolution() -> Report:
    rep = Report("verify resolution")

    def run() -> None:
        res = _atlas.replay_resolution()
        for start, mism in res.boundary.items():
            rep.check(f"local system at {start}", not mism, mism or "reproduced exactly")
        for s in res.steps:
            if not s.round_trip:
                rep.add(f"step {s.step}", FAIL, s.golden_detail)
                continue
            if s.matched_golden is True:
                rep.add(f"step {s.step} golden", PASS, "printed output reproduced exactly")
            elif s.matched_golden is False:
                if s.known_erratum:
                    rep.add(
                        f"step {s.step} golden",
                        WARN,
                        ["printed output differs only by the recorded misprint"] + s.golden_detail,
                    )
                else:
                    rep.add(f"step {s.step} golden", FAIL, s.golden_detail)
            if s.pole_legal is not None:
                rep.check(f"step {s.step} poles", s.pole_legal, "only poles along the new exceptional coordinate")
            if s.terminal:
                rep.check(
                    f"step {s.step} terminal {s.terminal}",
                    bool(s.polynomial and s.terminal_matches_chart),
                    s.terminal_detail or "polynomial; composed map equals the chart",
                )
        flop = res.fields.get("4.1.3")
        if flop is not None:
            idx = _singular.local_index(flop, {n: 0 for n in flop.names}, flop.names[-1]).as_fractions()
            want = (Fraction(0), Fraction(2), Fraction(1))
            rep.check("index after blow-down at origin", idx == want, _tup(idx or ()))
        rep.data["steps"] = [
            {"step": s.step, "matched_golden": s.matched_golden, "known_erratum": s.known_erratum} for s in res.steps
        ]

    _guard(rep, "resolution", run)
    return rep


VERIFY = {
    "atlas": verify_atlas,
    "singularities": verify_singularities,
    "symmetry": verify_symmetry,
    "resolution": verify_resolution,
}


def cmd_verify(target: str, transitions: bool = False) -> Report:
    if target != "all":
        rep = VERIFY[target]()
        if transitions and target == "atlas":
            rep.extend(verify_transitions())
        return rep
    jobs = list(VERIFY.values()) + ([verify_transitions] if transitions else [])
    with ThreadPoolExecutor(max_workers=len(jobs)) as ex:
        parts = list(ex.map(lambda fn: fn(), jobs))
    rep = Report("verify all")
    for name, part in zip(list(VERIFY) + ["transitions"], parts):
        rep.checks.extend(part.checks)
        if part.data:
            rep.data[name] = part.data
    return rep


# ---------------------------------------------------------------------------
# derive
# ---------------------------------------------------------------------------


def derive_family() -> Report:
    rep = Report("derive family")

    def run() -> None:
        fam = _symmetry.derive_invariant_family()
        rep.extend(_family_checks(fam))
        rep.data.update(
            {
                "dimension": fam.dimension,
                "unknowns": fam.unknowns,
                "basis": [[_fr(c) for c in v] for v in fam.basis],
                "general_member": {f"d{n}/dt": _s(r) for n, r in zip(fam.family.names, fam.family.rhs)},
                "constant_discrepancies": fam.constant_discrepancies,
            }
        )

    _guard(rep, "family", run)
    return rep


def derive_p3_index() -> Report:
    rep = Report("derive p3-index")

    def run() -> None:
        dec = _symmetry.decoupling_check()
        solved = {k: _s(v) for k, v in dec.solved.items()}
        rep.check("decoupling condition a5 = 2*a1", solved == {"a5": "2*a1"}, f"condition {dec.condition} = 0; {solved}")
        idx = _symmetry.p3_index_family()
        tup = [_s(e) for e in idx.tuple_] if idx.tuple_ else None
        rep.check("P3 index (-a1,-a1,-a1)", tup == ["-a1"] * 3, f"{tup}")
        free = _symmetry.p3_index_family(impose_decoupling=False)
        spec = _symmetry.specialize_index(idx, {"a1": -1})
        rep.check("a1 = -1 gives the table row (1,1,1)", spec == (1, 1, 1), _tup(spec))
        rep.data.update(
            {
                "condition": _s(dec.condition),
                "solved": solved,
                "index": tup,
                "index_without_condition": [_s(e) for e in free.tuple_] if free.tuple_ else None,
                "warnings": list(idx.warnings),
            }
        )

    _guard(rep, "p3-index", run)
    return rep


def derive_reductions() -> Report:
    rep = Report("derive reductions")

    def run() -> None:
        for r in (_symmetry.ny_reduction_check(), _symmetry.piv_reduction_check()):
            detail = r.details or [f"residual on the surface: {r.residual_symbolic}"]
            if r.renaming:
                detail.append(f"renaming {r.renaming}")
            rep.check(r.name, r.ok, detail)
            rep.data[r.name] = {
                "residual": _s(r.residual_symbolic),
                "renaming": r.renaming,
                "reduced": {f"d{n}/dt": _s(e) for n, e in zip(r.reduced.names, r.reduced.rhs)},
                "riccati": {str(k): _s(v) for k, v in r.riccati.items()},
            }

    _guard(rep, "reductions", run)
    return rep


DERIVE = {"family": derive_family, "p3-index": derive_p3_index, "reductions": derive_reductions}


# ---------------------------------------------------------------------------
# integrate / transform
# ---------------------------------------------------------------------------


def cmd_integrate(args: argparse.Namespace) -> Report:
    rep = Report("integrate")
    cfg = _mero.IntegratorConfig.with_tol(args.tol, switch_radius=args.radius)
    try:
        traj = _mero.integrate_meromorphic(args.ic, (args.t0, args.t1), args.alpha, cfg, chart=args.chart)
    except (_mero.IntegrationError, FloatingPointError) as exc:
        rep.add("integration", FAIL, f"{type(exc).__name__}: {exc}")
        return rep
    rep.add("integration", PASS, f"{traj.steps} steps, {traj.rejected} rejected, {len(traj.switches)} chart switches")
    err = traj.max_switch_error()
    rep.check("chart switch round trip", err <= 1e-12, f"max relative error {err:.3g}")

    estimates = {}
    balances = _mero.laurent_balances()
    for i, e in enumerate(traj.pole_events):
        try:
            est = _mero.estimate_pole(traj, e)
        except (_mero.NoBracketError, ValueError, ArithmeticError) as exc:
            rep.add(f"pole {i} residues", WARN, f"t* = {e.t_star:.17g}: not estimated ({exc})")
            continue
        estimates[i] = est
        b = _mero.predicted_residues(est, balances)
        if b is None:
            rep.add(f"pole {i} residues", WARN, f"t* = {est.t_star:.17g}: no Laurent balance with this support")
            continue
        mis = _mero.residue_mismatch(est, b)
        rep.add(
            f"pole {i} residues",
            PASS if mis <= 1e-4 else WARN,
            f"t* = {est.t_star:.17g} in {e.chart}; residues {tuple(round(v, 8) for v in est.residue_vector())}"
            f" vs balance {_tup(b)} (mismatch {mis:.2g})",
        )

    end_chart, end = traj.chart_state(traj.t_end)
    rep.data.update(
        {
            "pole_events": len(traj.pole_events),
            "switches": [[s.t, s.source, s.target] for s in traj.switches],
            "end_chart": end_chart,
            "end_state": [_mero.fmt(v) for v in end],
            "end_state_U0": [_mero.fmt(v) for v in traj.state(traj.t_end)],
        }
    )
    if args.out:
        out = Path(args.out)
        traj.write_csv(out)
        events = out.with_suffix(".poles.json")
        events.write_text(_mero.events_to_json(traj, estimates), encoding="utf-8")
        rep.data["csv"] = str(out)
        rep.data["events"] = str(events)
    return rep


def cmd_transform(args: argparse.Namespace) -> Report:
    rep = Report("transform")

    def run() -> None:
        src, dst = _atlas.chart(args.source), _atlas.chart(args.target)
        m = _atlas.transition(src, dst)
        values = dict(zip(src.names, args.point))
        values["t"] = args.t
        values.update(zip(("alpha1", "alpha2", "alpha3"), args.alpha))
        try:
            image = m.apply(values)
        except ZeroDivisionError as exc:
            rep.add("transform", FAIL, f"point lies off {dst.name}: {exc}")
            return
        rep.add("transform", PASS, f"{src.name} -> {dst.name}")
        rep.data.update(
            {
                "source": src.name,
                "target": dst.name,
                "point": {n: _fr(v) for n, v in zip(src.names, args.point)},
                "image": {n: _fr(v) for n, v in image.items()},
                "image_float": {n: float(v) for n, v in image.items()},
            }
        )

    _guard(rep, "transform", run)
    return rep


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _triple(kind: Callable[[str], object]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
        try:
            vals = tuple(kind(p) for p in parts)
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"not a number in {text!r}") from None
        if kind is float and not all(math.isfinite(v) for v in vals):
            raise argparse.ArgumentTypeError(f"non-finite value in {text!r}")
        return vals

    return parse


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return v


def _positive(text: str) -> float:
    v = _finite(text)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phase-atlas", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="exact checks of the atlas, table, symmetries and resolution")
    v.add_argument("target", choices=[*VERIFY, "all"])
    v.add_argument("--transitions", action="store_true", help="also check all 56 chart transitions (slow)")

    d = sub.add_parser("derive", help="derive the invariant family, the P3 index or the reductions")
    d.add_argument("target", choices=list(DERIVE))

    i = sub.add_parser("integrate", help="integrate through poles across the atlas")
    i.add_argument("--ic", type=_triple(float), required=True, metavar="X,Y,Z")
    i.add_argument("--alpha", type=_triple(float), required=True, metavar="A1,A2,A3")
    i.add_argument("--t0", type=_finite, default=0.0)
    i.add_argument("--t1", type=_finite, required=True)
    i.add_argument("--tol", type=_positive, default=1e-10)
    i.add_argument("--radius", type=_positive, default=10.0, help="chart switch radius")
    i.add_argument("--chart", default="U0", help="chart the initial condition is given in")
    i.add_argument("--out", help="trajectory CSV; pole events go to <stem>.poles.json")

    t = sub.add_parser("transform", help="map a point between charts (exact rationals)")
    t.add_argument("--from", dest="source", required=True)
    t.add_argument("--to", dest="target", required=True)
    t.add_argument("--point", type=_triple(Fraction), required=True, metavar="C1,C2,C3")
    t.add_argument("--t", type=Fraction, default=Fraction(0))
    t.add_argument("--alpha", type=_triple(Fraction), default=(Fraction(0),) * 3, metavar="A1,A2,A3")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "integrate":
        if args.t1 == args.t0:
            parser.error("--t1 must differ from --t0")
        if args.chart not in [f"U{j}" for j in range(8)]:
            parser.error(f"unknown chart {args.chart!r}")
    clear_caches()
    t0 = time.perf_counter()
    if args.command == "verify":
        rep = cmd_verify(args.target, args.transitions)
    elif args.command == "derive":
        rep = DERIVE[args.target]()
    elif args.command == "integrate":
        rep = cmd_integrate(args)
    else:
        rep = cmd_transform(args)
    rep.elapsed_ms = 1000 * (time.perf_counter() - t0)
    sys.stdout.write(rep.to_json() + "\n")
    return 1 if rep.failed else 0


if __name__ == "__main__":
    sys.exit(main())
