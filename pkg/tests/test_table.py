import numpy as np
import pytest

from drilldown import TableError, bucketize, load_csv, load_dataset, scan


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_csv_basic(tmp_path):
    t = load_csv(write(tmp_path, "A,B\na,b\na,c\n"))
    assert t.num_rows == 2
    assert [c.distinct_count for c in t.columns] == [1, 2]
    assert t.columns[1].values == ["b", "c"]  # first-appearance order


def test_load_csv_header_only(tmp_path):
    t = load_csv(write(tmp_path, "A,B\n"))
    assert t.num_rows == 0
    assert all(c.distinct_count == 0 for c in t.columns)


def test_load_csv_round_trip(tmp_path):
    raw = [["x", "1"], ["y", "2"], ["x", "2"]]
    body = "\n".join(",".join(r) for r in raw)
    t = load_csv(write(tmp_path, f"A,B\n{body}\n"))
    decoded = [t.decode_row(i) for i in range(t.num_rows)]
    assert decoded == raw


def test_load_csv_ragged_row_fails(tmp_path):
    with pytest.raises(TableError, match="ragged"):
        load_csv(write(tmp_path, "A,B\na\n"))


def test_na_policies(tmp_path):
    text = "A,B\na,\nb,x\nNA,y\n"
    keep = load_csv(write(tmp_path, text))
    assert keep.num_rows == 3
    assert "NA" in keep.columns[0].values
    assert "NA" in keep.columns[1].values
    drop = load_csv(write(tmp_path, text), na_policy="drop")
    assert drop.num_rows == 1
    assert drop.decode_row(0) == ["b", "x"]


def test_measure_columns(tmp_path):
    t = load_csv(write(tmp_path, "A,Sales\nx,5\ny,7.5\n"), measure_columns=["Sales"])
    assert list(t.measures) == ["Sales"]
    assert t.measures["Sales"].tolist() == [5.0, 7.5]
    assert t.num_cols == 1  # measure is not a categorical column


def test_measure_non_numeric_fails(tmp_path):
    with pytest.raises(TableError, match="non-numeric"):
        load_csv(write(tmp_path, "A,Sales\nx,oops\n"), measure_columns=["Sales"])


def test_bucketize_equi_width(tmp_path):
    body = "\n".join(f"r,{v}" for v in range(1, 101))
    t = load_csv(write(tmp_path, f"A,V\n{body}\n"), measure_columns=["V"])
    b = bucketize(t, "V", "equi-width", 4)
    col = b.columns[b.column_index("V")]
    assert col.values == [
        "[1,25.75]",
        "(25.75,50.5]",
        "(50.5,75.25]",
        "(75.25,100]",
    ]
    assert col.kind == "bucketized-numeric"
    assert col.bucket_edges == [1.0, 25.75, 50.5, 75.25, 100.0]
    assert b.num_rows == t.num_rows


def test_bucketize_equi_depth(tmp_path):
    body = "\n".join(f"r,{v}" for v in [1, 1, 1, 2, 3, 100])
    t = load_csv(write(tmp_path, f"A,V\n{body}\n"), measure_columns=["V"])
    b = bucketize(t, "V", "equi-depth", 2)
    codes = b.codes[:, b.column_index("V")]
    assert (codes == 0).sum() == 3
    assert (codes == 1).sum() == 3


def test_bucketize_non_numeric_fails(tmp_path):
    t = load_csv(write(tmp_path, "Age\n18-24\n25-34\n"))
    with pytest.raises(TableError, match="not numeric"):
        bucketize(t, "Age", "equi-width", 2)


def test_bucketize_numeric_categorical(tmp_path):
    t = load_csv(write(tmp_path, "V\n1\n2\n3\n4\n"))
    b = bucketize(t, "V", "equi-width", 2)
    assert b.columns[0].distinct_count == 2
    # other columns untouched, row count preserved
    assert b.num_rows == 4


def test_bucketize_preserves_other_columns(tmp_path):
    t = load_csv(write(tmp_path, "A,V\nx,1\ny,9\n"))
    b = bucketize(t, "V", "equi-width", 2)
    a = b.column_index("A")
    assert np.array_equal(b.codes[:, a], t.codes[:, t.column_index("A")])


def test_scan_order(f2):
    rows = list(scan(f2))
    assert [r[0] for r in rows] == list(range(8))
    assert [tuple(r[1]) for r in rows] == [
        (0, 0, 0),
        (0, 0, 0),
        (0, 0, 0),
        (0, 1, 1),
        (0, 1, 1),
        (1, 1, 1),
        (1, 1, 1),
        (1, 0, 0),
    ]


def test_scan_empty(tmp_path):
    t = load_csv(write(tmp_path, "A,B\n"))
    assert list(scan(t)) == []


def test_codes_dense(tmp_path):
    t = load_csv(write(tmp_path, "A\nx\ny\nx\nz\n"))
    col = t.codes[:, 0]
    assert sorted(set(col.tolist())) == list(range(t.columns[0].distinct_count))


def test_restrict_columns(tmp_path):
    t = load_csv(write(tmp_path, "A,B,C\n1,2,3\n"))
    r = t.restrict_columns(2)
    assert r.column_names == ["A", "B"]
    with pytest.raises(TableError):
        t.restrict_columns(9)


def test_sidecar_schema(tmp_path):
    csv_path = write(tmp_path, "A,V\nx,1\ny,2\nz,3\nw,4\n")
    schema = write(tmp_path, "V = measure\nV = bucketize:equi-width:2\n", "schema.txt")
    t = load_dataset(csv_path, schema)
    assert "V" not in t.measures  # bucketized back into a categorical
    assert t.columns[t.column_index("V")].kind == "bucketized-numeric"
