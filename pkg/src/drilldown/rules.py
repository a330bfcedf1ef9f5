"""Rules, weight functions, and exact Count/MCount/Score evaluation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .table import Table, TableError

STAR = None


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class Rule:
    """Per-column pattern: a value code or None (the wildcard)."""

    pattern: tuple

    @property
    def size(self) -> int:
        return sum(1 for v in self.pattern if v is not None)

    @property
    def arity(self) -> int:
        return len(self.pattern)

    def instantiated(self):
        return tuple(c for c, v in enumerate(self.pattern) if v is not None)

    def with_value(self, col: int, code: int) -> "Rule":
        pat = list(self.pattern)
        pat[col] = code
        return Rule(tuple(pat))

    @staticmethod
    def trivial(ncols: int) -> "Rule":
        return Rule((None,) * ncols)

    @staticmethod
    def of(ncols: int, assignments: dict) -> "Rule":
        pat = [None] * ncols
        for c, v in assignments.items():
            pat[c] = int(v)
        return Rule(tuple(pat))

    def sort_key(self):
        # stars sort after concrete codes, column by column
        return tuple((1,) if v is None else (0, v) for v in self.pattern)


def covers(rule: Rule, row) -> bool:
    """True iff every non-star entry of rule equals the row's code."""
    return all(v is None or row[c] == v for c, v in enumerate(rule.pattern))


def is_subrule(r1: Rule, r2: Rule) -> bool:
    """True iff r2 agrees with r1 wherever r1 is instantiated."""
    if r1.arity != r2.arity:
        raise RuleError("arity mismatch")
    return all(v is None or r2.pattern[c] == v for c, v in enumerate(r1.pattern))


def rule_to_text(rule: Rule, table: Table) -> str:
    cells = []
    for c, v in enumerate(rule.pattern):
        cells.append("*" if v is None else str(table.columns[c].values[v]))
    out = io.StringIO()
    csv.writer(out, lineterminator="").writerow(cells)
    return out.getvalue()


def rule_from_text(text: str, table: Table) -> Rule:
    cells = next(csv.reader([text]))
    if len(cells) != table.num_cols:
        raise RuleError(
            f"rule {text!r} has {len(cells)} cells, table has {table.num_cols} columns"
        )
    pat = []
    for c, cell in enumerate(cells):
        if cell == "*":
            pat.append(None)
        else:
            pat.append(table.columns[c].code_of(cell))
    return Rule(tuple(pat))


# ---------------------------------------------------------------------------
# weight functions

VALID_KINDS = ("size", "bits", "size-minus-one", "parametric")


@dataclass(frozen=True)
class WeightConfig:
    """Monotone non-negative rule weighting.

    Per-column contributions are 1 (size), ceil(log2 |c|) (bits) or w_c
    (parametric); favored columns multiply their contribution, ignored ones
    zero it.  size-minus-one aggregates to max(0, total - 1); parametric
    raises the total to the exponent.  star_column forces weight 0 on rules
    leaving that column wild (the one sanctioned monotonicity exception,
    used by star drill-down).
    """

    kind: str = "size"
    column_weights: dict = field(default_factory=dict)  # by column name
    exponent: float = 1.0
    favored: dict = field(default_factory=dict)  # name -> multiplier > 1
    ignored: frozenset = frozenset()
    star_column: str | None = None

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise RuleError(f"unknown weight kind {self.kind!r}")
        if self.exponent < 1.0:
            raise RuleError("exponent must be >= 1")
        if any(w < 0 for w in self.column_weights.values()):
            raise RuleError("column weights must be non-negative")
        if any(m <= 1 for m in self.favored.values()):
            raise RuleError("favored multipliers must exceed 1")
        object.__setattr__(self, "ignored", frozenset(self.ignored))

    @staticmethod
    def size(**kw) -> "WeightConfig":
        return WeightConfig(kind="size", **kw)

    @staticmethod
    def bits(**kw) -> "WeightConfig":
        return WeightConfig(kind="bits", **kw)

    @staticmethod
    def size_minus_one(**kw) -> "WeightConfig":
        return WeightConfig(kind="size-minus-one", **kw)

    @staticmethod
    def parametric(column_weights: dict, exponent: float = 1.0, **kw) -> "WeightConfig":
        return WeightConfig(
            kind="parametric", column_weights=dict(column_weights), exponent=exponent, **kw
        )

    def column_contributions(self, table: Table) -> np.ndarray:
        out = np.zeros(table.num_cols, dtype=np.float64)
        for c, col in enumerate(table.columns):
            if col.name in self.ignored:
                continue
            if self.kind == "bits":
                w = float(math.ceil(math.log2(col.distinct_count))) if col.distinct_count > 1 else 0.0
            elif self.kind == "parametric":
                w = float(self.column_weights.get(col.name, 0.0))
            else:  # size and size-minus-one count columns
                w = 1.0
            w *= self.favored.get(col.name, 1.0)
            out[c] = w
        return out

    def aggregate(self, total: float) -> float:
        if self.kind == "size-minus-one":
            return max(0.0, total - 1.0)
        if self.kind == "parametric" and self.exponent != 1.0:
            return total**self.exponent
        return total

    def max_weight(self, table: Table) -> float:
        """Weight of the fully instantiated rule (the uncapped m_w substitute)."""
        return self.aggregate(float(self.column_contributions(table).sum()))


def weight(config: WeightConfig, rule: Rule, table: Table) -> float:
    if rule.arity != table.num_cols:
        raise RuleError("rule arity does not match table")
    if config.star_column is not None:
        c = table.column_index(config.star_column)
        if rule.pattern[c] is None:
            return 0.0
    contrib = config.column_contributions(table)
    total = sum(contrib[c] for c in rule.instantiated())
    return config.aggregate(float(total))


# ---------------------------------------------------------------------------
# data views: a uniform coverage surface over tables and samples

@dataclass
class DataView:
    """Rows visible to a scan, restricted to the free (non-fixed) columns.

    `fixed` maps column index -> code for columns pinned by a drill-down
    base rule; those columns are elided from `codes`.  `scale` is the
    sample scale factor applied to displayed aggregates.
    """

    table: Table
    free_cols: tuple  # column indices into table, in ascending order
    codes: np.ndarray  # (n, len(free_cols)) int32
    row_ids: np.ndarray
    fixed: dict = field(default_factory=dict)
    scale: float = 1.0
    row_weights: np.ndarray | None = None  # measure values when aggregating sums

    @property
    def num_rows(self) -> int:
        return self.codes.shape[0]

    def free_position(self, col: int) -> int:
        return self.free_cols.index(col)

    def effective_weights(self) -> np.ndarray:
        if self.row_weights is None:
            return np.ones(self.num_rows, dtype=np.float64)
        return self.row_weights

    def mask_for(self, rule: Rule) -> np.ndarray | None:
        """Boolean cover mask, or None when the rule contradicts fixed columns."""
        mask = np.ones(self.num_rows, dtype=bool)
        for c, v in enumerate(rule.pattern):
            if v is None:
                continue
            if c in self.fixed:
                if self.fixed[c] != v:
                    return None
                continue
            mask &= self.codes[:, self.free_cols.index(c)] == v
        return mask

    def narrowed(self, base: Rule) -> "DataView":
        """Restrict to rows covered by base and pin its columns."""
        mask = self.mask_for(base)
        if mask is None:
            raise RuleError("base rule contradicts the view's fixed columns")
        new_fixed = dict(self.fixed)
        drop = []
        for c, v in enumerate(base.pattern):
            if v is not None and c not in self.fixed:
                new_fixed[c] = v
                drop.append(self.free_cols.index(c))
        keep = [i for i in range(len(self.free_cols)) if i not in drop]
        return DataView(
            table=self.table,
            free_cols=tuple(self.free_cols[i] for i in keep),
            codes=self.codes[np.ix_(mask, keep)] if self.num_rows else self.codes[:, keep],
            row_ids=self.row_ids[mask],
            fixed=new_fixed,
            scale=self.scale,
            row_weights=None if self.row_weights is None else self.row_weights[mask],
        )

    def with_measure(self, measure: str | None) -> "DataView":
        if measure is None:
            return replace(self, row_weights=None)
        if measure not in self.table.measures:
            raise TableError(f"unknown measure column {measure!r}")
        return replace(self, row_weights=self.table.measures[measure][self.row_ids])


def as_view(data) -> DataView:
    if isinstance(data, DataView):
        return data
    if isinstance(data, Table):
        return DataView(
            table=data,
            free_cols=tuple(range(data.num_cols)),
            codes=data.codes,
            row_ids=data.row_ids,
        )
    view = getattr(data, "as_view", None)
    if view is not None:
        return view()
    raise TypeError(f"cannot view {type(data).__name__} as coverage data")


def _resolve_aggregate(view: DataView, aggregate) -> DataView:
    """aggregate: 'count' or ('sum', measure_name)."""
    if aggregate in (None, "count"):
        return view.with_measure(None)
    if isinstance(aggregate, tuple) and len(aggregate) == 2 and aggregate[0] == "sum":
        return view.with_measure(aggregate[1])
    raise RuleError(f"bad aggregate {aggregate!r}")


def count(data, rule: Rule, aggregate="count") -> float:
    """Exact aggregate of tuples covered by rule, scaled for samples."""
    view = _resolve_aggregate(as_view(data), aggregate)
    mask = view.mask_for(rule)
    if mask is None:
        return 0.0
    return float(view.effective_weights()[mask].sum()) * view.scale


def marginal_counts(data, rules, aggregate="count") -> list:
    """MCount (or MSum) per rule: each tuple credits its first covering rule."""
    view = _resolve_aggregate(as_view(data), aggregate)
    w = view.effective_weights()
    taken = np.zeros(view.num_rows, dtype=bool)
    out = []
    for rule in rules:
        mask = view.mask_for(rule)
        if mask is None:
            out.append(0.0)
            continue
        fresh = mask & ~taken
        out.append(float(w[fresh].sum()) * view.scale)
        taken |= mask
    return out


def weight_sorted(rules, config: WeightConfig, table: Table) -> list:
    """Non-increasing weight; ties by pattern codes with stars last."""
    return sorted(rules, key=lambda r: (-weight(config, r, table), r.sort_key()))


@dataclass
class ScoredRule:
    rule: Rule
    weight: float
    count: float
    marginal_count: float
    sum: float | None = None
    marginal_sum: float | None = None


@dataclass
class ScoredRuleList:
    rules: list  # of ScoredRule, ordered by non-increasing weight
    score: float

    def patterns(self):
        return [s.rule for s in self.rules]

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)


def list_score(data, rules_in_order, config: WeightConfig, aggregate="count") -> float:
    """Score of a rule list taken in the given order (no re-sorting)."""
    table = as_view(data).table
    mcounts = marginal_counts(data, rules_in_order, aggregate)
    return float(
        sum(m * weight(config, r, table) for r, m in zip(rules_in_order, mcounts))
    )


def score(data, rules, config: WeightConfig, aggregate="count") -> ScoredRuleList:
    """Weight-sorted ScoredRuleList over a set of distinct rules."""
    view = as_view(data)
    ordered = weight_sorted(set(rules), config, view.table)
    mcounts = marginal_counts(view, ordered, aggregate)
    counts = [count(view, r, "count") for r in ordered]
    sums = None
    msums = None
    if aggregate not in (None, "count"):
        sums = [count(view, r, aggregate) for r in ordered]
        msums = mcounts
        mcounts = marginal_counts(view, ordered, "count")
    total = 0.0
    scored = []
    for i, r in enumerate(ordered):
        w = weight(config, r, view.table)
        credited = msums[i] if msums is not None else mcounts[i]
        total += w * credited
        scored.append(
            ScoredRule(
                rule=r,
                weight=w,
                count=counts[i],
                marginal_count=mcounts[i],
                sum=None if sums is None else sums[i],
                marginal_sum=None if msums is None else msums[i],
            )
        )
    return ScoredRuleList(scored, total)
