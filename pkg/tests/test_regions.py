from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

import cfextract as cx
from tests.conftest import make_schema, random_subregion

import numpy as np


# -- center --------------------------------------------------------------------


def test_center_of_unit_square():
    sch = cx.FeatureSchema([
        cx.NumericFeature("x1", 0, 1, Fraction(1, 1024)),
        cx.NumericFeature("x2", 0, 1, Fraction(1, 1024)),
    ])
    c = cx.center(cx.full_region(sch))
    assert sch.axis_values(c) == [Fraction(1, 2), Fraction(1, 2)]


def test_center_degenerate_region():
    sch = make_schema("grid10")
    r = cx.Region(((3, 3), (7, 7)), ())
    assert cx.center(r) == sch.point_of("0.3", "0.7")


def test_center_rounds_down_to_grid():
    # [0,1] x [0.4..., 1] on the 2^-10 grid: lower index 410 is the first grid
    # point above 0.4; the midpoint index (410+1024)//2 = 717 is 0.7002 to 4dp
    sch = cx.FeatureSchema([
        cx.NumericFeature("x1", 0, 1, Fraction(1, 1024)),
        cx.NumericFeature("x2", 0, 1, Fraction(1, 1024)),
    ])
    r = cx.Region(((0, 1024), (410, 1024)), ())
    c = cx.center(r)
    assert c.ivals == (512, 717)
    assert sch.axis_values(c)[1] == Fraction(717, 1024)
    assert round(float(Fraction(717, 1024)), 4) == 0.7002


def test_center_binary_and_groups():
    sch = make_schema("mixed")
    r = cx.Region(((0, 64), (0, 1), (2, 5)), (frozenset({1, 2}),))
    c = cx.center(r)
    assert c.ivals[1] == 0  # smaller allowed binary value
    assert c.cats[0] == 1  # lowest allowed category
    assert cx.contains(r, c)


# -- split ---------------------------------------------------------------------


def test_split_single_axis_paper_example(schema_grid10):
    sch = schema_grid10
    full = cx.full_region(sch)
    x, cf = sch.point_of("0.5", "0.5"), sch.point_of("0.5", "0.4")
    pieces, steps = cx.split(full, x, cf, sch)
    assert len(pieces) == 2 and len(steps) == 1
    assert pieces[0].intervals == ((0, 10), (5, 10))  # x side: x2 > 0.4
    assert pieces[1].intervals == ((0, 10), (0, 4))  # counterfactual side
    assert steps[0].axis == 1 and steps[0].threshold == 4  # t = 0.4
    assert sch.interval_axes[1].value(steps[0].threshold) == Fraction(2, 5)


def test_split_two_axes_peel_order(schema_grid10):
    sch = schema_grid10
    full = cx.full_region(sch)
    x, cf = sch.point_of("0.2", "0.2"), sch.point_of("0.6", "0.7")
    pieces, steps = cx.split(full, x, cf, sch)
    assert [p.intervals for p in pieces] == [
        ((0, 5), (0, 10)),  # z1 <= 0.6 - delta
        ((6, 10), (0, 6)),  # z1 >= 0.6, z2 <= 0.7 - delta
        ((6, 10), (7, 10)),  # z1 >= 0.6, z2 >= 0.7
    ]
    assert [(s.axis, s.threshold, s.x_left) for s in steps] == [(0, 5, True), (1, 6, True)]


def test_split_contract_violations(schema_grid10):
    sch = schema_grid10
    full = cx.full_region(sch)
    x = sch.point_of("0.5", "0.5")
    with pytest.raises(cx.ContractViolation):
        cx.split(full, x, x, sch)
    sub = cx.Region(((0, 4), (0, 4)), ())
    with pytest.raises(cx.ContractViolation):
        cx.split(sub, x, sch.point_of("0.1", "0.1"), sch)


def test_split_one_hot_membership():
    sch = make_schema("mixed")
    full = cx.full_region(sch)
    x = sch.point_of("0.5", 0, 3, "p")
    cf = sch.point_of("0.5", 0, 3, "r")
    pieces, steps = cx.split(full, x, cf, sch)
    assert len(pieces) == 3
    assert pieces[0].allowed[0] == {0}  # x's category peeled first
    assert pieces[1].allowed[0] == {1}  # what is neither p nor r
    assert pieces[2].allowed[0] == {2}  # counterfactual side
    assert cx.contains(pieces[0], x) and cx.contains(pieces[-1], cf)
    assert all(s.group == 0 for s in steps)


def test_split_one_hot_two_categories_skips_empty_peel():
    sch = cx.FeatureSchema([cx.CategoricalFeature("g", ("a", "b")), cx.BinaryFeature("z")])
    full = cx.full_region(sch)
    x = sch.point_of("b", 0)
    cf = sch.point_of("a", 0)
    pieces, steps = cx.split(full, x, cf, sch)
    assert len(pieces) == 2 and len(steps) == 1
    assert pieces[0].allowed[0] == {1} and pieces[1].allowed[0] == {0}


# -- grid_volume -----------------------------------------------------------------


def test_grid_volume_endpoints_inclusive():
    sch = cx.FeatureSchema([cx.NumericFeature("x", 0, 1, Fraction(1, 4))])
    assert cx.grid_volume(cx.full_region(sch), sch) == 5


def test_grid_volume_product():
    sch = cx.FeatureSchema([cx.NumericFeature("x", 0, 1, Fraction(1, 4)),
                            cx.BinaryFeature("b")])
    r = cx.Region(((0, 2), (0, 1)), ())
    assert cx.grid_volume(r, sch) == 6


def test_empty_intersection_is_none():
    a = cx.Region(((0, 3),), ())
    b = cx.Region(((5, 7),), ())
    assert cx.intersect(a, b) is None


def test_subtract_partitions():
    a = cx.Region(((0, 9), (0, 9)), ())
    b = cx.Region(((3, 5), (4, 9)), ())
    pieces = cx.subtract(a, b)
    assert sum(p.volume for p in pieces) + cx.intersect(a, b).volume == a.volume
    for i in range(len(pieces)):
        assert cx.intersect(pieces[i], b) is None
        for j in range(i + 1, len(pieces)):
            assert cx.intersect(pieces[i], pieces[j]) is None


# -- properties ------------------------------------------------------------------


@given(st.integers(0, 2**32 - 1))
def test_split_soundness_random(seed):
    sch = make_schema("mixed")
    rng = np.random.default_rng(seed)
    region = random_subregion(sch, rng)
    x = cx.sample_point(region, rng)
    cf = cx.sample_point(region, rng)
    if x == cf:
        return
    pieces, steps = cx.split(region, x, cf, sch)
    assert len(pieces) == len(steps) + 1
    assert sum(p.volume for p in pieces) == region.volume
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            assert cx.intersect(pieces[i], pieces[j]) is None
    assert cx.contains(pieces[0], x)
    assert cx.contains(pieces[-1], cf)
    # determinism
    again, _ = cx.split(region, x, cf, sch)
    assert again == pieces


@given(st.integers(0, 2**32 - 1))
def test_center_containment_random(seed):
    sch = make_schema("mixed")
    rng = np.random.default_rng(seed)
    region = random_subregion(sch, rng)
    assert cx.contains(region, cx.center(region))


def test_region_json_roundtrip():
    sch = make_schema("mixed")
    rng = np.random.default_rng(7)
    for _ in range(25):
        r = random_subregion(sch, rng)
        data = cx.region_json(r, sch)
        assert cx.region_from_json(data, sch) == r
