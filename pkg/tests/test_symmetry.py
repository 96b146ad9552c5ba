from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from phase_atlas.atlas import core_field
from phase_atlas.symmetry import (
    BacklundPoleError,
    apply_backlund,
    backlund_maps,
    coefficient_vector,
    decoupling_check,
    derive_invariant_family,
    invariance_residual,
    ny_reduction_check,
    p3_index_family,
    piv_reduction_check,
    printed_family,
    specialize_index,
)

F = Fraction
fracs = st.fractions(min_value=-4, max_value=4, max_denominator=7)


@pytest.fixture(scope="module")
def family():
    return derive_invariant_family()


@pytest.mark.parametrize("name", ["s1", "s2"])
def test_symmetries_leave_the_system_invariant(name):
    res = invariance_residual(core_field(), backlund_maps()[name])
    assert all(r.is_zero() for r in res)


def _sympy_residual(name):
    t, x, y, z, a1, a2, a3 = sympy.symbols("t x y z alpha1 alpha2 alpha3")
    rhs = lambda X, Y, Z, b1, b2, b3: (  # noqa: E731
        X * (t - X - 2 * Z) + b1,
        Y * (-t + Y + 2 * Z) + b2,
        Z * (t - 2 * Y - Z) + b3,
    )
    if name == "s1":
        img, par = (x, y - a3 / z, z), (a1, a2 + a3, -a3)
    else:
        img, par = (x - a2 / y, y, z + a2 / y), (a1 + a2, -a2, a3 + a2)
    f = rhs(x, y, z, a1, a2, a3)
    out = []
    for X, target in zip(img, rhs(*img, *par)):
        dX = sympy.diff(X, t) + sum(sympy.diff(X, v) * fv for v, fv in zip((x, y, z), f))
        out.append(sympy.simplify(dX - target))
    return out


@pytest.mark.parametrize("name", ["s1", "s2"])
def test_residual_agrees_with_sympy(name):
    assert _sympy_residual(name) == [0, 0, 0]


def test_perturbed_symmetry_is_rejected():
    s1 = backlund_maps()["s1"]
    a3 = -s1.parameter_map["alpha3"]
    bad = type(s1)("s1'", s1.variable_map, {**s1.parameter_map, "alpha3": a3})
    res = invariance_residual(core_field(), bad)
    assert any(not r.is_zero() for r in res)


@pytest.mark.parametrize("name", ["s1", "s2"])
def test_involution(name):
    s = backlund_maps()[name]
    pt = {"x": F(2, 3), "y": F(-5, 2), "z": F(7, 5)}
    par = {"alpha1": F(1, 3), "alpha2": F(-2), "alpha3": F(5, 4)}
    st1, p1 = apply_backlund(s, pt, par)
    st2, p2 = apply_backlund(s, st1, p1)
    assert st2 == pt and p2 == par


@settings(max_examples=60, deadline=None)
@given(st.tuples(fracs, fracs, fracs), st.tuples(fracs, fracs, fracs))
def test_braid_relation(xyz, alpha):
    maps = backlund_maps()
    state = dict(zip("xyz", xyz))
    par = dict(zip(("alpha1", "alpha2", "alpha3"), alpha))
    s, p = state, par
    try:
        for _ in range(3):
            s, p = apply_backlund(maps["s1"], s, p)
            s, p = apply_backlund(maps["s2"], s, p)
    except BacklundPoleError:
        return
    assert s == state and p == par


def test_pole_locus():
    s1, s2 = backlund_maps()["s1"], backlund_maps()["s2"]
    assert [str(p) for p in s1.pole_locus] == ["z"]
    assert [str(p) for p in s2.pole_locus] == ["y", "y"]
    with pytest.raises(BacklundPoleError):
        apply_backlund(s1, {"x": 1, "y": 1, "z": 0}, {"alpha1": 1, "alpha2": 1, "alpha3": 1})
    with pytest.raises(BacklundPoleError):
        apply_backlund(s2, {"x": 1.0, "y": 0.0, "z": 1.0}, {"alpha1": 1, "alpha2": 1, "alpha3": 1})


# ---------------------------------------------------------------------------
# invariant family
# ---------------------------------------------------------------------------


def test_family_dimension(family):
    assert len(family.unknowns) == 36
    assert family.dimension == 8
    assert family.contains_core


def test_family_quadratic_part_matches_print(family):
    assert family.quadratic_match, family.printed_match


def test_family_constant_terms_differ_from_print(family):
    # frozen: the printed constant terms are not invariant under s1 and s2
    assert set(family.constant_discrepancies) == {"x", "y", "z"}
    assert family.constant_discrepancies["z"] == "computed alpha3*b2 ; printed alpha2*b2 - alpha3*b2"
    assert family.constant_discrepancies["y"].startswith("computed 2*alpha2*a1 - alpha2*a5 - alpha2*c3")


def test_derived_family_is_invariant(family):
    for s in backlund_maps().values():
        res = invariance_residual(family.family, s)
        assert all(r.is_zero() for r in res)


def test_printed_family_is_not_invariant():
    fam = printed_family()
    res = invariance_residual(fam, backlund_maps()["s1"])
    assert any(not r.is_zero() for r in res)


def test_core_system_coordinates():
    vec = coefficient_vector(core_field())
    assert len(vec) == 36
    assert vec[:12] == [-1, 0, 0, 0, -2, 0, 1, 0, 0, 1, 0, 0]


# ---------------------------------------------------------------------------
# decoupling and the index at [0:1:0:0]
# ---------------------------------------------------------------------------


def test_decoupling_condition():
    rep = decoupling_check()
    assert str(rep.condition) == "a1 - 1/2*a5"
    assert str(rep.solved["a5"]) == "2*a1"
    assert rep.decoupled is not None
    assert rep.decoupled.names == ("y", "z")


def test_p3_index_after_decoupling():
    idx = p3_index_family()
    assert [str(e) for e in idx.tuple_] == ["-a1", "-a1", "-a1"]
    assert specialize_index(idx, {"a1": -1}) == (1, 1, 1)


def test_p3_index_without_decoupling():
    idx = p3_index_family(impose_decoupling=False)
    assert [str(e) for e in idx.tuple_] == ["-a1", "-3*a1 + a5", "a1 - a5"]


@settings(max_examples=40, deadline=None)
@given(fracs.filter(lambda v: v != 0), fracs)
def test_p3_index_specialisation_is_homogeneous(a1, lam):
    idx = p3_index_family()
    base = specialize_index(idx, {"a1": a1})
    assert base == (-a1, -a1, -a1)
    if lam:
        assert specialize_index(idx, {"a1": a1 * lam}) == tuple(lam * b for b in base)


def test_p3_index_for_the_core_system():
    assert specialize_index(p3_index_family(), {"a1": -1}) == (1, 1, 1)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def test_noumi_yamada_reduction():
    rep = ny_reduction_check()
    assert rep.ok
    assert rep.candidates == 1
    assert rep.renaming == {"y": "x", "z": "y", "w": "z", "beta2": "alpha1", "beta3": "alpha2", "beta4": "alpha3"}
    assert str(rep.residual_symbolic) == "beta1"


def test_riccati_reduction():
    rep = piv_reduction_check()
    assert rep.ok and rep.invariant
    assert {k: str(v) for k, v in rep.riccati.items()} == {2: "-1", 1: "-2*z + t", 0: "alpha1"}
    assert str(rep.residual_symbolic) == "alpha1"
