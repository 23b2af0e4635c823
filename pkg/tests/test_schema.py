import json
from fractions import Fraction

import pytest

import cfextract as cx
from cfextract.schema import exact_number, number_str


def test_axis_accounting_mixed(schema_mixed):
    # numeric + binary + ordinal + 3 one-hot axes
    assert schema_mixed.m == 6
    assert len(schema_mixed.interval_axes) == 3
    assert schema_mixed.group_sizes == (3,)
    assert schema_mixed.axis_names == ("a", "b", "c", "d=p", "d=q", "d=r")


def test_numeric_grid_must_close():
    with pytest.raises(cx.DataFormatError):
        cx.NumericFeature("x", 0, 1, Fraction(3, 10))  # (hi-lo)/delta not integer
    with pytest.raises(cx.DataFormatError):
        cx.NumericFeature("x", 1, 0, Fraction(1, 2))
    with pytest.raises(cx.DataFormatError):
        cx.OrdinalFeature("x", 1)
    with pytest.raises(cx.DataFormatError):
        cx.CategoricalFeature("x", ("only",))


def test_exact_number_float_repr():
    assert exact_number(0.1) == Fraction(1, 10)
    assert exact_number(2**-10) == Fraction(1, 1024)
    assert exact_number("1/3") == Fraction(1, 3)


def test_number_str_roundtrip():
    for v in [Fraction(1, 2), Fraction(7, 10), Fraction(-3, 8), Fraction(5),
              Fraction(1, 3), Fraction(717, 1024)]:
        assert exact_number(number_str(v)) == v
    assert number_str(Fraction(1, 2)) == "0.5"
    assert number_str(Fraction(1, 3)) == "1/3"


def test_point_axis_values_roundtrip(schema_mixed):
    p = schema_mixed.point_of("0.5", 1, 3, "q")
    vals = schema_mixed.axis_values(p)
    assert vals == [Fraction(1, 2), 1, 3, 0, 1, 0]
    assert schema_mixed.point_from_axis_values(vals) == p
    # JSON form keeps numeric axes as strings
    js = schema_mixed.point_json(p)
    assert js == ["0.5", 1, 3, 0, 1, 0]
    assert schema_mixed.point_from_json(js) == p


def test_one_hot_validation(schema_mixed):
    vals = schema_mixed.axis_values(schema_mixed.point_of("0.5", 0, 0, 0))
    vals[3] = 1
    vals[4] = 1
    with pytest.raises(cx.ContractViolation):
        schema_mixed.point_from_axis_values(vals)
    vals[3] = 0
    vals[4] = 0
    with pytest.raises(cx.ContractViolation):
        schema_mixed.point_from_axis_values(vals)


def test_off_grid_point_rejected(schema_grid10):
    with pytest.raises(cx.ContractViolation):
        schema_grid10.point_of("0.55", "0.5")
    with pytest.raises(cx.ContractViolation):
        schema_grid10.point_of("1.1", "0.5")


def test_schema_json_roundtrip(tmp_path, schema_mixed):
    path = tmp_path / "schema.json"
    cx.save_schema(str(path), schema_mixed)
    loaded = cx.load_schema(str(path))
    assert loaded == schema_mixed
    raw = json.loads(path.read_text())
    assert raw["features"][0]["delta"] == number_str(Fraction(1, 64))


def test_lex_key_feature_order(schema_mixed):
    a = schema_mixed.point_of(0, 0, 0, "q")
    b = schema_mixed.point_of(0, 0, 1, "p")
    # feature c comes before d, and a has the smaller c value
    assert schema_mixed.lex_key(a) < schema_mixed.lex_key(b)
