import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mefm.io import SeriesFormatError, read_series_csv, rows_to_csv, write_rows_csv, write_series_csv


@settings(max_examples=30, deadline=None)
@given(
    arrays(
        float,
        st.tuples(st.integers(1, 3), st.integers(1, 4), st.integers(1, 4)),
        elements=st.floats(allow_nan=False, allow_infinity=False, width=64),
    )
)
def test_round_trip_is_lossless(tmp_path_factory, Y):
    path = tmp_path_factory.mktemp("rt") / "y.csv"
    write_series_csv(path, Y)
    np.testing.assert_array_equal(read_series_csv(path), Y)


def test_header_and_indexing(tmp_path):
    Y = np.arange(12, dtype=float).reshape(2, 3, 2)
    write_series_csv(tmp_path / "y.csv", Y)
    lines = (tmp_path / "y.csv").read_text().splitlines()
    assert lines[0] == "t,i,j,value"
    assert lines[1] == "1,1,1,0.0"
    assert lines[-1] == "2,3,2,11.0"


def test_any_row_order(tmp_path):
    p = tmp_path / "y.csv"
    p.write_text("t,i,j,value\n1,2,1,4\n1,1,1,3\n")
    np.testing.assert_array_equal(read_series_csv(p), [[[3.0], [4.0]]])


@pytest.mark.parametrize(
    "body,match",
    [
        ("", "line 1"),
        ("a,b,c,d\n", "line 1"),
        ("t,i,j,value\n1,1,1\n", "line 2"),
        ("t,i,j,value\n1,1,1,2\n1,1,2,x\n", "line 3"),
        ("t,i,j,value\n1,1,1,nan\n", "line 2"),
        ("t,i,j,value\n0,1,1,2\n", "line 2"),
        ("t,i,j,value\n1,1,1,2\n1,1,1,3\n", r"line 3: duplicate"),
        ("t,i,j,value\n1,1,1,2\n1,2,2,3\n1,2,1,3\n", r"\(1,1,2\)"),
        ("t,i,j,value\n", "no data"),
    ],
)
def test_malformed(tmp_path, body, match):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(SeriesFormatError, match=match):
        read_series_csv(p)


def test_rows_csv(tmp_path):
    text = rows_to_csv([{"a": 1, "b": 0.1}, {"a": 2}], ["a", "b"])
    assert text == "a,b\n1,0.1\n2,\n"
    write_rows_csv(tmp_path / "sub" / "r.csv", [{"x": 1.5}])
    assert (tmp_path / "sub" / "r.csv").read_text() == "x\n1.5\n"
    assert not list((tmp_path / "sub").glob(".*tmp"))
