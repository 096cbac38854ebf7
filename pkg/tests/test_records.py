import json
import math

import numpy as np
import pytest

from mesoepr.distributions import SampleRecord, Setting
from mesoepr.errors import SchemaError
from mesoepr.records import (
    RecordTable,
    dumps,
    parse_setting,
    read_records,
    reported_values,
    setting_of_angle,
    write_records,
)

HEADER = "setting_a,setting_b,outcome_a,outcome_b\n"


def test_parse_setting():
    assert parse_setting("x") == 0.0
    assert parse_setting(" P ") == pytest.approx(math.pi / 2)
    assert parse_setting("0.3") == 0.3
    for bad in ("Q", "inf"):
        with pytest.raises(ValueError):
            parse_setting(bad)
    assert setting_of_angle(math.pi / 2) is Setting.P
    assert setting_of_angle(0.4) is None


def test_round_trip_preserves_values(tmp_path):
    table = RecordTable.from_sample_records(
        [SampleRecord("X", "X", 0.1, -1 / 3), SampleRecord("P", "P", 1e-300, 2.5)])
    write_records(tmp_path / "r.csv", table, {"units": "quadrature"})
    back = read_records([tmp_path / "r.csv"])
    np.testing.assert_array_equal(back.outcome_b, table.outcome_b)
    assert back.to_sample_records() == table.to_sample_records()


def test_angles_select_only_matched_pairs(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text(HEADER + "0,0,1,2\n1.5707963267948966,P,3,4\nX,P,5,6\n0.7,0.7,7,8\n")
    t = read_records([p])
    assert t.select("X")[1].tolist() == [2.0]
    assert t.select("P")[1].tolist() == [4.0]


@pytest.mark.parametrize("body, line", [
    ("X,X,1,2\nX,X,1\n", 3),
    ("X,X,1,2\nX,Q,1,2\n", 3),
    ("X,X,abc,2\n", 2),
    ("X,X,1,inf\n", 2),
])
def test_schema_errors_report_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(HEADER + body)
    with pytest.raises(SchemaError) as err:
        read_records([p])
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


def test_negative_counts_rejected(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("setting_a,setting_b,outcome_a,outcome_b,n_plus_a,n_minus_a,n_plus_b,n_minus_b\n"
                 "X,X,0,0,1,1,-1,1\n")
    with pytest.raises(SchemaError):
        read_records([p])


def test_mixed_units_rejected(tmp_path):
    for name, units in (("a.csv", "quadrature"), ("b.csv", "particles")):
        (tmp_path / name).write_text(HEADER + "X,X,1,2\n")
        (tmp_path / (name + ".json")).write_text(json.dumps({"units": units}))
    with pytest.raises(SchemaError):
        read_records([tmp_path / "a.csv", tmp_path / "b.csv"])


def test_bad_sidecar(tmp_path):
    (tmp_path / "a.csv").write_text(HEADER + "X,X,1,2\n")
    (tmp_path / "a.csv.json").write_text("{not json")
    with pytest.raises(SchemaError):
        read_records([tmp_path / "a.csv"])


def test_missing_file(tmp_path):
    with pytest.raises(SchemaError):
        read_records([tmp_path / "nope.csv"])


def test_dumps_is_lossless_and_null_safe():
    x = 0.1 + 0.2
    text = dumps({"b": x, "a": float("nan"), "c": np.float64(1 / 3), "d": np.int64(4)})
    data = json.loads(text)
    assert data == {"a": None, "b": x, "c": 1 / 3, "d": 4}
    assert text.index('"a"') < text.index('"b"')


def test_reported_values_have_sources():
    values = reported_values()
    assert {v.kind for v in values} == {"epsilon", "D"}
    assert all(v.source for v in values)
