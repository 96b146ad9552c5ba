from collections import Counter
from fractions import Fraction

import pytest

from phase_atlas.atlas import printed_local_systems
from phase_atlas.singular import (
    BOUNDARY_CHARTS,
    PAPER_TABLE,
    SingularityError,
    boundary_field,
    chart_point,
    find_accessible,
    local_index,
    normalize_homogeneous,
    polar_numerators,
    preferred_chart,
    scan_boundary,
    verify_table,
)

F = Fraction


@pytest.fixture(scope="module")
def table():
    return verify_table()


@pytest.fixture(scope="module")
def scans():
    return scan_boundary()


def test_table_matches(table):
    assert table.ok
    assert len(table.rows) == 7
    assert not table.extra_points


@pytest.mark.parametrize("name", sorted(PAPER_TABLE))
def test_row(table, name):
    row = next(r for r in table.rows if r.name == name)
    h, idx, mark, _ = PAPER_TABLE[name]
    assert row.homogeneous == tuple(map(F, h))
    assert row.index == tuple(map(F, idx))
    assert row.paper_type == mark
    assert row.matched, row.detail


def test_each_boundary_chart_sees_four_points(scans):
    seen = {c: sorted(p.homogeneous for p in s.points) for c, s in scans.items()}
    assert {c: len(v) for c, v in seen.items()} == {"uvw": 4, "pqr": 4, "lmn": 4}
    union = {h for v in seen.values() for h in v}
    assert union == {tuple(map(F, v[0])) for v in PAPER_TABLE.values()}
    for s in scans.values():
        assert not s.unresolved and not s.positive_dimensional


def test_p5_lies_at_l_minus_one(scans):
    p5 = [p for p in scans["lmn"].points if p.homogeneous == (0, -1, 1, 0)]
    assert len(p5) == 1
    assert p5[0].point == {"l": F(-1), "n": F(0)}


def test_normalized_index_is_chart_independent(scans):
    by_point = {}
    for chart, scan in scans.items():
        boundary = BOUNDARY_CHARTS[chart][0]
        for p in scan.points:
            li = local_index(boundary_field(chart), chart_point(chart, p.homogeneous), boundary)
            norm = Counter(e.constant_value() for e in li.normalized)
            by_point.setdefault(p.homogeneous, []).append((chart, norm))
    shared = {h: v for h, v in by_point.items() if len(v) > 1}
    assert len(shared) == 4
    for h, views in shared.items():
        assert all(v[1] == views[0][1] for v in views), (h, views)


def test_normalized_indices_are_integral(table):
    for row in table.rows:
        assert row.normalized[0] == 1
        assert all(c.denominator == 1 for c in row.normalized), row


def test_printed_local_systems_give_the_same_indices():
    printed = printed_local_systems()
    for name in ("P1", "P2", "P4", "P7"):
        f = printed[name]
        li = local_index(f, {n: 0 for n in f.names[:2]}, f.names[2])
        assert li.as_fractions() == tuple(map(F, PAPER_TABLE[name][1])), name
    f = printed["P3"]
    li = local_index(f, {n: 0 for n in f.names[1:]}, f.names[0])
    assert li.as_fractions() == (1, 1, 1)


def test_eigenvalues_used_when_linear_part_is_not_diagonal(table):
    p2 = next(r for r in table.rows if r.name == "P2")
    li = local_index(boundary_field(p2.chart), p2.point, BOUNDARY_CHARTS[p2.chart][0])
    assert not li.strict_form
    assert li.as_fractions() == (1, 3, 1)


def test_polar_numerators_shape():
    nums = dict(polar_numerators(boundary_field("uvw"), "w"))
    assert set(nums) == {"u", "v"}
    assert all(not n.is_zero() for n in nums.values())


def test_not_accessible_point_is_rejected():
    with pytest.raises(SingularityError):
        local_index(boundary_field("uvw"), {"u": 5, "v": 7}, "w")


def test_chart_helpers():
    h = normalize_homogeneous((F(0), F(6), F(2), F(-2)))
    assert h == (0, -3, -1, 1)
    assert preferred_chart(h) == "uvw"
    assert preferred_chart((0, 1, 0, 0)) == "pqr"
    assert preferred_chart((0, -1, 1, 0)) == "lmn"
    assert chart_point("pqr", (0, -3, -1, 1)) == {"q": F(1, 3), "r": F(-1, 3)}


def test_zero_parameters_keep_four_points_in_uvw():
    f = boundary_field("uvw").specialize({"alpha1": 0, "alpha2": 0, "alpha3": 0})
    scan = find_accessible(f, "w", "uvw")
    assert len(scan.points) == 4
