"""Columnar tables: CSV loading, dictionary encoding, bucketization, scans."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

NA_TOKENS = frozenset({"", "NA"})


class TableError(ValueError):
    pass


@dataclass
class ColumnSchema:
    name: str
    kind: str = "categorical"  # categorical | bucketized-numeric
    values: list = field(default_factory=list)  # code = list index
    bucket_edges: list | None = None

    @property
    def distinct_count(self) -> int:
        return len(self.values)

    def code_of(self, raw):
        try:
            return self.values.index(raw)
        except ValueError:
            raise TableError(f"value {raw!r} not in column {self.name!r}")

    def validate(self) -> None:
        if self.kind not in ("categorical", "bucketized-numeric"):
            raise TableError(f"bad column kind {self.kind!r}")
        if self.bucket_edges is not None:
            edges = self.bucket_edges
            if any(a >= b for a, b in zip(edges, edges[1:])):
                raise TableError("bucket_edges must be strictly ascending")


@dataclass
class Table:
    """Dictionary-encoded relation: codes[i, c] indexes columns[c].values."""

    columns: list[ColumnSchema]
    codes: np.ndarray  # (|T|, |C|) int32
    measures: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.codes = np.ascontiguousarray(self.codes, dtype=np.int32)
        if self.codes.ndim != 2 or self.codes.shape[1] != len(self.columns):
            raise TableError("codes shape does not match column list")
        for name, vec in self.measures.items():
            if len(vec) != self.num_rows:
                raise TableError(f"measure {name!r} length mismatch")
            self.measures[name] = np.asarray(vec, dtype=np.float64)
        for c, col in enumerate(self.columns):
            col.validate()
            if self.num_rows and (
                self.codes[:, c].min() < 0
                or self.codes[:, c].max() >= col.distinct_count
            ):
                raise TableError(f"code out of range in column {col.name!r}")

    @property
    def num_rows(self) -> int:
        return self.codes.shape[0]

    @property
    def num_cols(self) -> int:
        return len(self.columns)

    @property
    def row_ids(self) -> np.ndarray:
        return np.arange(self.num_rows, dtype=np.int64)

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise TableError(f"unknown column {name!r}")

    def decode_row(self, i: int) -> list:
        return [col.values[self.codes[i, c]] for c, col in enumerate(self.columns)]

    def restrict_columns(self, n: int) -> "Table":
        """Keep the first n columns (measures are preserved)."""
        if not 0 < n <= self.num_cols:
            raise TableError(f"cannot restrict to {n} of {self.num_cols} columns")
        return Table(self.columns[:n], self.codes[:, :n].copy(), dict(self.measures))


def load_csv(
    path,
    *,
    header: bool = True,
    measure_columns: tuple | list = (),
    na_policy: str = "keep",
    delimiter: str = ",",
) -> Table:
    """Load an RFC-4180 CSV into a dictionary-encoded Table.

    Codes are assigned in first-appearance order.  Cells equal to "" or "NA"
    follow na_policy: "keep" turns them into the distinct value "NA",
    "drop" removes the whole row.
    """
    if na_policy not in ("keep", "drop"):
        raise TableError(f"bad na_policy {na_policy!r}")
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = [r for r in reader if r]
    if not rows:
        raise TableError(f"{path}: empty file")
    if header:
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
    else:
        names = [f"c{i}" for i in range(len(rows[0]))]
        body = rows
    width = len(names)
    for ln, r in enumerate(body, start=2 if header else 1):
        if len(r) != width:
            raise TableError(f"{path}:{ln}: ragged row ({len(r)} != {width} cells)")
    measure_set = set(measure_columns)
    unknown = measure_set - set(names)
    if unknown:
        raise TableError(f"declared measure columns not present: {sorted(unknown)}")

    if na_policy == "drop":
        body = [r for r in body if not any(cell in NA_TOKENS for cell in r)]

    cat_idx = [i for i, n in enumerate(names) if n not in measure_set]
    columns = [ColumnSchema(names[i]) for i in cat_idx]
    dicts: list[dict] = [{} for _ in cat_idx]
    codes = np.empty((len(body), len(cat_idx)), dtype=np.int32)
    measures = {n: np.empty(len(body), dtype=np.float64) for n in names if n in measure_set}
    for rix, r in enumerate(body):
        for k, i in enumerate(cat_idx):
            cell = r[i]
            if cell in NA_TOKENS:
                cell = "NA"
            code = dicts[k].get(cell)
            if code is None:
                code = len(dicts[k])
                dicts[k][cell] = code
                columns[k].values.append(cell)
            codes[rix, k] = code
        for n in measures:
            cell = r[names.index(n)]
            try:
                measures[n][rix] = float(cell)
            except ValueError:
                raise TableError(f"non-numeric value {cell!r} in measure column {n!r}")
    return Table(columns, codes, measures)


def _fmt_edge(x: float) -> str:
    return f"{x:g}"


def bucketize(table: Table, column: str, strategy: str = "equi-width", bins: int = 4) -> Table:
    """Replace a numeric column by a bucketized categorical with <= bins codes."""
    if bins < 1:
        raise TableError("bins must be >= 1")
    if strategy not in ("equi-width", "equi-depth"):
        raise TableError(f"bad strategy {strategy!r}")
    if column in table.measures:
        vals = table.measures[column]
        # promote the measure into a new categorical column at the end
        insert_at = table.num_cols
        base_codes = np.hstack([table.codes, np.zeros((table.num_rows, 1), np.int32)])
        columns = [
            ColumnSchema(c.name, c.kind, list(c.values), c.bucket_edges)
            for c in table.columns
        ] + [ColumnSchema(column)]
        measures = {n: v for n, v in table.measures.items() if n != column}
    else:
        insert_at = table.column_index(column)
        col = table.columns[insert_at]
        try:
            lut = np.array([float(v) for v in col.values], dtype=np.float64)
        except ValueError:
            raise TableError(f"column {column!r} is not numeric")
        vals = lut[table.codes[:, insert_at]]
        base_codes = table.codes.copy()
        columns = [
            ColumnSchema(c.name, c.kind, list(c.values), c.bucket_edges)
            for c in table.columns
        ]
        measures = dict(table.measures)

    if len(vals) == 0:
        new_col = ColumnSchema(column, "bucketized-numeric", [], [])
    elif float(vals.min()) == float(vals.max()):
        lo = float(vals.min())
        new_col = ColumnSchema(column, "bucketized-numeric", [f"[{_fmt_edge(lo)},{_fmt_edge(lo)}]"], [lo])
        base_codes[:, insert_at] = 0
    else:
        lo, hi = float(vals.min()), float(vals.max())
        if strategy == "equi-width":
            edges = [lo + (hi - lo) * i / bins for i in range(bins + 1)]
        else:
            qs = np.quantile(vals, np.linspace(0.0, 1.0, bins + 1))
            edges = [float(q) for q in qs]
        # collapse duplicate edges so buckets stay non-degenerate
        uniq = [edges[0]]
        for e in edges[1:]:
            if e > uniq[-1]:
                uniq.append(e)
        edges = uniq
        nb = max(1, len(edges) - 1)
        # bucket b covers (edges[b], edges[b+1]], first bucket closed below
        bcodes = np.searchsorted(np.asarray(edges[1:-1]), vals, side="left") if nb > 1 else np.zeros(len(vals), np.int64)
        keep = sorted(set(int(b) for b in bcodes))
        remap = {b: i for i, b in enumerate(keep)}
        final = np.array([remap[int(b)] for b in bcodes], dtype=np.int32)
        labels = []
        kept_edges = []
        for i, b in enumerate(keep):
            blo, bhi = edges[b], edges[b + 1]
            open_lo = "(" if b > 0 else "["
            labels.append(f"{open_lo}{_fmt_edge(blo)},{_fmt_edge(bhi)}]")
            if not kept_edges:
                kept_edges.append(blo)
            kept_edges.append(bhi)
        new_col = ColumnSchema(column, "bucketized-numeric", labels, kept_edges)
        base_codes[:, insert_at] = final
    columns[insert_at] = new_col
    return Table(columns, base_codes, measures)


def scan(table: Table):
    """Yield (row_id, code vector) for every row in row_id order."""
    for i in range(table.num_rows):
        yield i, table.codes[i]


def parse_schema_file(path) -> dict:
    """Sidecar schema: plain 'key = value' lines.

    Recognized keys: '<column> = measure' and
    '<column> = bucketize:<equi-width|equi-depth>:<bins>'.
    """
    measures: list[str] = []
    buckets: list[tuple[str, str, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise TableError(f"{path}:{ln}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if val == "measure":
                measures.append(key)
            elif val.startswith("bucketize:"):
                parts = val.split(":")
                if len(parts) != 3:
                    raise TableError(f"{path}:{ln}: bad bucketize spec {val!r}")
                buckets.append((key, parts[1], int(parts[2])))
            elif val == "categorical":
                pass
            else:
                raise TableError(f"{path}:{ln}: unknown schema value {val!r}")
    return {"measures": measures, "buckets": buckets}


def load_dataset(csv_path, schema_path=None, **kwargs) -> Table:
    """load_csv + sidecar schema application (measures, bucket specs)."""
    if schema_path is not None:
        spec = parse_schema_file(schema_path)
        measures = list(kwargs.pop("measure_columns", ()))
        for name in spec["measures"]:
            if name not in measures:
                measures.append(name)
        table = load_csv(csv_path, measure_columns=measures, **kwargs)
        for column, strategy, bins in spec["buckets"]:
            table = bucketize(table, column, strategy, bins)
        return table
    return load_csv(csv_path, **kwargs)
