from __future__ import annotations

import numpy as np
import pytest

from drilldown import ColumnSchema, Rule, Table


def make_table(rows, names=None, nvals=None):
    """Table from a list of code tuples; dictionaries get synthetic labels."""
    rows = np.asarray(rows, dtype=np.int32)
    if rows.size == 0:
        rows = rows.reshape(0, len(nvals) if nvals else len(names or ()))
    else:
        rows = rows.reshape(len(rows), -1)
    ncols = rows.shape[1]
    names = names or [chr(ord("A") + i) for i in range(ncols)]
    columns = []
    for c in range(ncols):
        distinct = nvals[c] if nvals else (int(rows[:, c].max()) + 1 if len(rows) else 0)
        columns.append(ColumnSchema(names[c], values=[f"{names[c]}{v}" for v in range(distinct)]))
    return Table(columns, rows)


@pytest.fixture
def f1():
    """1000 rows: 100 x (a,b1) plus 900 x (a, b_i) with distinct b_i."""
    codes = np.zeros((1000, 2), np.int32)
    codes[:100, 1] = 0
    codes[100:, 1] = np.arange(1, 901)
    columns = [
        ColumnSchema("A", values=["a"]),
        ColumnSchema("B", values=[f"b{i}" for i in range(1, 902)]),
    ]
    return Table(columns, codes)


F2_ROWS = [(0, 0, 0)] * 3 + [(0, 1, 1)] * 2 + [(1, 1, 1)] * 2 + [(1, 0, 0)]


@pytest.fixture
def f2():
    """8 rows over binary X,Y,Z with correlated Y=Z."""
    return make_table(F2_ROWS, names=["X", "Y", "Z"])


def all_rules(table: Table):
    """Every rule assembled from value combinations present in the table,
    plus the trivial rule."""
    import itertools

    seen = {Rule.trivial(table.num_cols)}
    for row in table.codes:
        for r in range(1, table.num_cols + 1):
            for cols in itertools.combinations(range(table.num_cols), r):
                seen.add(Rule.of(table.num_cols, {c: int(row[c]) for c in cols}))
    return sorted(seen, key=lambda r: r.sort_key())


def random_tiny_table(rng):
    nrows = int(rng.integers(3, 13))
    ncols = 3
    nval = int(rng.integers(2, 4))
    codes = rng.integers(0, nval, size=(nrows, ncols)).astype(np.int32)
    return make_table(codes, nvals=[nval] * ncols)
