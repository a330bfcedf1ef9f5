"""Per-rule uniform samples under a memory budget: Find / Combine / Create."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import kernels
from .rules import DataView, Rule, RuleError, is_subrule
from .table import Table, TableError


@dataclass
class Sample:
    """Uniform sample of the tuples covered by filter_rule.

    Columns instantiated in the filter are elided from codes; scale is the
    factor N_s that turns raw sample aggregates into table-level estimates.
    """

    filter_rule: Rule
    scale: float
    row_ids: np.ndarray
    codes: np.ndarray  # (size, len(free_cols)) int32
    free_cols: tuple
    capacity: int
    table: Table

    @property
    def size(self) -> int:
        return int(self.row_ids.size)

    def as_view(self) -> DataView:
        fixed = {
            c: v for c, v in enumerate(self.filter_rule.pattern) if v is not None
        }
        return DataView(
            table=self.table,
            free_cols=self.free_cols,
            codes=self.codes,
            row_ids=self.row_ids,
            fixed=fixed,
            scale=self.scale,
        )

    def validate(self) -> None:
        if self.scale < 1.0 - 1e-9:
            raise RuleError("sample scale must be >= 1")
        if len(np.unique(self.row_ids)) != self.size:
            raise RuleError("duplicate row ids in sample")
        if self.size > self.capacity:
            raise RuleError("sample exceeds its capacity")


def _free_cols_of(table: Table, rule: Rule) -> tuple:
    return tuple(c for c, v in enumerate(rule.pattern) if v is None)


def _build_sample(table: Table, rule: Rule, rows: np.ndarray, count: int, capacity: int) -> Sample:
    free = _free_cols_of(table, rule)
    size = rows.size
    scale = 1.0 if size == 0 or size == count else count / size
    return Sample(
        filter_rule=rule,
        scale=max(1.0, scale),
        row_ids=rows.astype(np.int64),
        codes=table.codes[rows][:, free] if size else np.empty((0, len(free)), np.int32),
        free_cols=free,
        capacity=capacity,
        table=table,
    )


def create_pass(table: Table, plan, displayed=(), seed: int = 0):
    """One scan: an independent uniform reservoir per budgeted rule, plus
    exact cover counts for every budgeted or displayed rule.

    plan maps Rule -> tuple budget (an AllocationPlan's budgets also work).
    Returns (samples keyed by rule, exact counts keyed by rule).
    """
    budgets = dict(getattr(plan, "budgets", plan))
    rules = list(budgets)
    for r in displayed:
        if r not in budgets:
            budgets[r] = 0
            rules.append(r)
    filters = np.full((len(rules), table.num_cols), -1, dtype=np.int32)
    caps = np.zeros(len(rules), dtype=np.int64)
    for i, r in enumerate(rules):
        for c, v in enumerate(r.pattern):
            if v is not None:
                filters[i, c] = v
        caps[i] = max(0, int(budgets[r]))
    chosen, counts = kernels.sample_pool_pass(table.codes, filters, caps, seed)
    samples = {}
    exact = {}
    for i, r in enumerate(rules):
        exact[r] = int(counts[i])
        if caps[i] > 0:
            samples[r] = _build_sample(table, r, chosen[i], int(counts[i]), int(caps[i]))
    return samples, exact


def find(pool, rule: Rule, min_ss: int) -> Sample | None:
    """The pooled sample filtered exactly by rule with at least min_ss tuples."""
    s = pool.get(rule) if hasattr(pool, "get") else None
    if s is None and not hasattr(pool, "get"):
        for cand in pool:
            if cand.filter_rule == rule:
                s = cand
                break
    if s is not None and s.size >= min_ss:
        return s
    return None


def combine(pool, rule: Rule, min_ss: int) -> Sample | None:
    """Union (deduplicated by row id) of rule-covered tuples drawn from all
    pooled samples whose filter is a sub-rule of rule.

    The combined scale is estimated-count / union-size.  The estimate comes
    from a scale-1 contributor when one exists (zero variance: it holds the
    full cover of its filter), else from the largest contributing sample
    (the lowest-variance estimator among the rest).
    """
    samples = pool.values() if hasattr(pool, "values") else pool
    contributors = []
    for s in samples:
        if s.filter_rule.arity != rule.arity:
            continue
        if is_subrule(s.filter_rule, rule):
            contributors.append(s)
    if not contributors:
        return None
    ids: set[int] = set()
    best = None  # (preference, raw_match count, scale)
    for s in contributors:
        mask = np.ones(s.size, dtype=bool)
        for c, v in enumerate(rule.pattern):
            if v is None or s.filter_rule.pattern[c] is not None:
                continue
            mask &= s.codes[:, s.free_cols.index(c)] == v
        matched = s.row_ids[mask]
        ids.update(int(i) for i in matched)
        preference = (s.scale == 1.0, s.size)
        if best is None or preference > best[0]:
            best = (preference, matched.size, s.scale)
    if len(ids) < min_ss or len(ids) == 0:
        return None
    est_count = best[1] * best[2]
    rows = np.array(sorted(ids), dtype=np.int64)
    table = contributors[0].table
    free = _free_cols_of(table, rule)
    scale = max(1.0, est_count / rows.size)
    if best[0][0]:
        # an exact contributor certifies the union as the full cover
        scale = 1.0
    return Sample(
        filter_rule=rule,
        scale=scale,
        row_ids=rows,
        codes=table.codes[rows][:, free],
        free_cols=free,
        capacity=rows.size,
        table=table,
    )


def selectivity_ratio(count_sub: float, count_super: float) -> float:
    """Fraction of a sub-rule's cover that the super-rule keeps."""
    if count_sub <= 0:
        raise RuleError("count_sub must be positive")
    if count_super < 0 or count_super > count_sub:
        raise RuleError("need count_sub >= count_super >= 0")
    return count_super / count_sub


def suggest_min_ss(table: Table, rho: float) -> int:
    """rho * |C| * |c_min|: scale of the worst-case selectivity of the top
    rule under size weighting."""
    if rho <= 0:
        raise RuleError("rho must be positive")
    if table.num_cols == 0:
        raise TableError("empty table")
    c_min = min(c.distinct_count for c in table.columns)
    return int(math.ceil(rho * table.num_cols * c_min))


def confidence_interval(estimate: float, sample: Sample, z: float):
    """Normal-approximation interval around a scaled count estimate.

    A scale-1 sample is the whole population: no estimation error, zero
    width.
    """
    if sample.size == 0:
        raise RuleError("sample is empty")
    if sample.scale == 1.0:
        return estimate, estimate
    n = sample.size
    raw = estimate / sample.scale
    p = min(1.0, max(0.0, raw / n))
    half = z * sample.scale * math.sqrt(n * p * (1.0 - p))
    hi_cap = sample.scale * n
    lo = min(max(estimate - half, 0.0), hi_cap)
    hi = min(max(estimate + half, 0.0), hi_cap)
    return lo, hi


@dataclass
class PoolStats:
    samples: int
    tuples: int
    memory: int
    find_hits: int
    combine_hits: int
    create_passes: int


class SampleHandler:
    """Single-writer sample store.

    Readers observe an atomic snapshot (the pool dict is replaced, never
    mutated in place); create_pass installs run one at a time under the
    owning session's serialization.
    """

    def __init__(self, table: Table, memory: int, min_ss: int, seed: int = 0):
        if min_ss <= 0 or memory < min_ss:
            raise RuleError("need 0 < minSS <= M")
        self.table = table
        self.memory = int(memory)
        self.min_ss = int(min_ss)
        self._seed = int(seed)
        self._pool: dict[Rule, Sample] = {}
        self._write_lock = threading.Lock()
        self.find_hits = 0
        self.combine_hits = 0
        self.create_passes = 0

    @property
    def pool(self) -> dict:
        return self._pool

    def next_seed(self) -> int:
        self._seed += 1
        return self._seed

    def lookup(self, rule: Rule) -> Sample | None:
        """find(), plus the exact-view fast path: a full (scale 1) sample of
        the rule's entire cover is usable below minSS."""
        hit = find(self._pool, rule, self.min_ss)
        if hit is not None:
            self.find_hits += 1
            return hit
        s = self._pool.get(rule)
        if s is not None and s.scale == 1.0:
            self.find_hits += 1
            return s
        return None

    def combine_for(self, rule: Rule) -> Sample | None:
        s = combine(self._pool, rule, self.min_ss)
        if s is None and any(
            other.scale == 1.0
            and other.filter_rule.arity == rule.arity
            and is_subrule(other.filter_rule, rule)
            for other in self._pool.values()
        ):
            # an exact pooled sub-rule sample means the union is the node's
            # whole data view: usable below minSS, counts stay exact
            s = combine(self._pool, rule, 1)
        if s is not None:
            self.combine_hits += 1
        return s

    def run_create_pass(self, plan, displayed=(), keep_priority=()):
        """Scan, then atomically publish the merged pool.

        keep_priority lists (rule, priority) for retained old samples; stale
        samples (absent from the list) are evicted first, then lowest
        priority, until the new pool fits the memory budget.
        """
        with self._write_lock:  # one scan/install at a time
            samples, exact = create_pass(self.table, plan, displayed, self.next_seed())
            self.create_passes += 1
            priority = dict(keep_priority)
            new_pool = dict(samples)
            used = sum(s.size for s in new_pool.values())
            old = [s for r, s in self._pool.items() if r not in new_pool]
            old.sort(key=lambda s: (s.filter_rule not in priority, -priority.get(s.filter_rule, 0.0)))
            for s in old:
                if used + s.size <= self.memory:
                    new_pool[s.filter_rule] = s
                    used += s.size
            self._pool = new_pool
            return samples, exact

    def stats(self) -> PoolStats:
        pool = self._pool
        return PoolStats(
            samples=len(pool),
            tuples=sum(s.size for s in pool.values()),
            memory=self.memory,
            find_hits=self.find_hits,
            combine_hits=self.combine_hits,
            create_passes=self.create_passes,
        )
