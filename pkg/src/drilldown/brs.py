"""Greedy best-rule-set search with a-priori style candidate pruning.

The marginal value of a candidate R against the current solution S is
sum over covered tuples of max(0, W(R) - W(top rule of S covering t)),
which is exactly the score gain of adding R.  Candidates are counted in
passes by size; pass j candidates are one-column extensions of the rules
counted in pass j-1, restricted to (column, value) pairs observed
co-occurring inside the parent's cover.  Before each counting pass a
candidate is dropped when its upper bound (derived from counted
sub-rules) cannot beat the best marginal value found so far.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .rules import (
    DataView,
    Rule,
    RuleError,
    ScoredRuleList,
    WeightConfig,
    _resolve_aggregate,
    as_view,
    score,
    weight,
)
from .table import Table


@dataclass(frozen=True)
class DrillConstraint:
    """Search restricted to strict super-rules of base; star_column, when
    set, must be instantiated by every result."""

    base: Rule
    star_column: int | None = None

    def __post_init__(self):
        if self.star_column is not None and self.base.pattern[self.star_column] is not None:
            raise RuleError("star_column must be wild in the base rule")


@dataclass
class CandidateEntry:
    rule: Rule
    count: float
    marginal_value: float
    upper_bound: float
    weight: float = 0.0


@dataclass
class SearchStats:
    passes: int = 0
    counted: list = field(default_factory=list)  # CandidateEntry per counted rule
    pruned: list = field(default_factory=list)  # CandidateEntry, NaN marginal


class _MaskCache:
    def __init__(self, codes):
        self.codes = codes
        self._cache = {}

    def single(self, pos, val):
        key = (pos, val)
        m = self._cache.get(key)
        if m is None:
            m = self.codes[:, pos] == val
            self._cache[key] = m
        return m

    def mask(self, extras):
        m = self.single(*extras[0])
        for e in extras[1:]:
            m = m & self.single(*e)
        return m


def _merged_rule(view: DataView, extras) -> Rule:
    pat = [None] * view.table.num_cols
    for c, v in view.fixed.items():
        pat[c] = v
    for pos, v in extras:
        pat[view.free_cols[pos]] = int(v)
    return Rule(tuple(pat))


def find_best_marginal_rule(
    data,
    config: WeightConfig,
    m_w: float,
    constraint: DrillConstraint | None = None,
    top_weights=None,
    stats: SearchStats | None = None,
    deadline: float | None = None,
) -> CandidateEntry | None:
    """Best marginal rule among strict super-rules of the constraint base
    with weight <= m_w, or None when nothing can be counted."""
    view = as_view(data)
    if constraint is None:
        constraint = DrillConstraint(Rule.trivial(view.table.num_cols))
    if m_w <= 0:
        raise RuleError("m_w must be positive")
    codes = view.codes
    n = view.num_rows
    row_w = view.effective_weights()
    topw = np.zeros(n) if top_weights is None else top_weights

    contrib = config.column_contributions(view.table)
    base_total = float(sum(contrib[c] for c in view.fixed))
    star_pos = None
    if constraint.star_column is not None:
        if constraint.star_column not in view.free_cols:
            raise RuleError("star column is fixed in this view")
        star_pos = view.free_cols.index(constraint.star_column)
    # zero-contribution extensions cannot raise weight and only shrink
    # coverage, so they are never worth instantiating
    ext_positions = [
        p for p, c in enumerate(view.free_cols) if contrib[c] > 0 or p == star_pos
    ]

    def rule_weight(extras) -> float:
        return config.aggregate(
            base_total + float(sum(contrib[view.free_cols[p]] for p, _ in extras))
        )

    def feasible(extras) -> bool:
        return star_pos is None or any(p == star_pos for p, _ in extras)

    masks = _MaskCache(codes)
    counted: dict = {}  # extras -> CandidateEntry
    prev_pass: list = []
    H = 0.0

    for j in range(1, len(ext_positions) + 1):
        if deadline is not None and time.monotonic() > deadline:
            break
        if j == 1:
            first_positions = [star_pos] if star_pos is not None else ext_positions
            cands = []
            for p in first_positions:
                values = np.unique(codes[:, p]) if n else ()
                for v in values:
                    cands.append(((p, int(v)),))
        else:
            cands = _extend_candidates(view, masks, prev_pass, counted, ext_positions, feasible)
        survivors = []
        for extras in cands:
            w = rule_weight(extras)
            if w > m_w:
                continue
            bound = np.inf
            for r in range(1, len(extras)):
                for sub in itertools.combinations(extras, r):
                    e = counted.get(sub)
                    if e is not None:
                        bound = min(bound, e.marginal_value + e.count * (m_w - e.weight))
            if bound < H:
                if stats is not None:
                    stats.pruned.append(
                        CandidateEntry(_merged_rule(view, extras), -1.0, float("nan"), bound, w)
                    )
                continue
            survivors.append((extras, w, bound))
        if not survivors:
            break

        cand_mat = np.full((len(survivors), codes.shape[1]), -1, dtype=np.int32)
        cand_w = np.empty(len(survivors))
        for i, (extras, w, _) in enumerate(survivors):
            for p, v in extras:
                cand_mat[i, p] = v
            cand_w[i] = w
        counts, marginals = kernels.count_marginals(codes, row_w, topw, cand_mat, cand_w)

        prev_pass = []
        for i, (extras, w, bound) in enumerate(survivors):
            entry = CandidateEntry(
                _merged_rule(view, extras), float(counts[i]), float(marginals[i]), bound, w
            )
            counted[extras] = entry
            prev_pass.append(extras)
            if stats is not None:
                stats.counted.append(entry)
        if stats is not None:
            stats.passes += 1
        H = max(H, max(e.marginal_value for e in counted.values()))

    best = None
    for extras, entry in counted.items():
        if not feasible(extras):
            continue
        if best is None or _pick_key(entry, extras) < _pick_key(*best):
            best = (entry, extras)
    return None if best is None else best[0]


def _pick_key(entry: CandidateEntry, extras):
    # deterministic argmax: marginal value, then fewer columns, then pattern
    return (-entry.marginal_value, len(extras), entry.rule.sort_key())


def _extend_candidates(view, masks, prev_pass, counted, ext_positions, feasible):
    out = []
    seen = set()
    for extras in prev_pass:
        cover = masks.mask(extras)
        rows = np.flatnonzero(cover)
        if rows.size == 0:
            continue
        used = {p for p, _ in extras}
        sub_codes = view.codes[rows]
        for p in ext_positions:
            if p in used:
                continue
            for v in np.unique(sub_codes[:, p]):
                cand = tuple(sorted(extras + ((p, int(v)),)))
                if cand in seen:
                    continue
                seen.add(cand)
                # a-priori closure: every feasible one-smaller sub-pattern
                # must have been counted (absence means a pruned ancestor)
                ok = True
                for drop in range(len(cand)):
                    sub = cand[:drop] + cand[drop + 1 :]
                    if feasible(sub) and sub not in counted:
                        ok = False
                        break
                if ok:
                    out.append(cand)
    return out


def best_rule_set(
    data,
    config: WeightConfig,
    k: int,
    m_w: float,
    constraint: DrillConstraint | None = None,
    emit=None,
    time_limit: float | None = 5.0,
    aggregate="count",
    stats: SearchStats | None = None,
) -> ScoredRuleList:
    """Greedy k-step augmentation; each found rule is emitted immediately.

    Stops early at the time limit (default 5 seconds; pass None for no
    limit) or when no rule adds positive marginal value.  When m_w is at
    least the maximum weight in the optimal set the result score is within
    1 - ((k-1)/k)^k of the optimum.
    """
    if k < 0:
        raise RuleError("k must be non-negative")
    view = _resolve_aggregate(as_view(data), aggregate)
    if constraint is None:
        constraint = DrillConstraint(Rule.trivial(view.table.num_cols))
    elif constraint.base.instantiated() and any(
        c not in view.fixed for c in constraint.base.instantiated()
    ):
        view = view.narrowed(constraint.base)
    deadline = None if time_limit is None else time.monotonic() + time_limit
    topw = np.zeros(view.num_rows)
    chosen: list[Rule] = []
    for _ in range(k):
        if deadline is not None and time.monotonic() > deadline:
            break
        entry = find_best_marginal_rule(
            view, config, m_w, constraint, topw, stats=stats, deadline=deadline
        )
        if entry is None or entry.marginal_value <= 0:
            break
        chosen.append(entry.rule)
        mask = view.mask_for(entry.rule)
        np.maximum(topw, np.where(mask, entry.weight, 0.0), out=topw)
        if emit is not None:
            emit(
                CandidateEntry(
                    entry.rule,
                    entry.count * view.scale,
                    entry.marginal_value * view.scale,
                    entry.upper_bound,
                    entry.weight,
                )
            )
    return score(view, chosen, config, aggregate)


def drill_reduce(data, base: Rule, star_column: int | None = None, config: WeightConfig | None = None):
    """Filter to tuples covered by base and pin its columns.

    Returns (view, effective weight config, constraint).  Star drill-down
    is realized by candidate filtering: the constraint carries the column
    so the search only generates feasible rules, and the effective config
    zeroes rules that leave it wild (the two agree on every feasible rule).
    """
    view = as_view(data).narrowed(base)
    constraint = DrillConstraint(base, star_column)
    effective = config
    if config is not None and star_column is not None:
        effective = replace(config, star_column=view.table.columns[star_column].name)
    return view, effective, constraint


def brute_force_best_set(data, config: WeightConfig, k: int, aggregate="count") -> ScoredRuleList:
    """Exact optimum over k-subsets of the observed-pattern rule universe.

    Test oracle: enumerates every rule assembled from value combinations
    present in at least one tuple (plus the trivial rule) and maximizes the
    set score exhaustively.  Dominated rules (same-or-smaller cover at
    same-or-lower weight) are removed first; removal preserves the optimum
    by an exchange argument.
    """
    view = _resolve_aggregate(as_view(data), aggregate)
    ncols = len(view.free_cols)
    n = view.num_rows
    if n * (2**ncols) > 200_000:
        raise RuleError("instance too large for the brute-force oracle")
    table = view.table
    universe = {}
    for t in range(n):
        row = view.codes[t]
        bit = 1 << t
        for r in range(1, ncols + 1):
            for cols in itertools.combinations(range(ncols), r):
                pat = tuple((p, int(row[p])) for p in cols)
                universe[pat] = universe.get(pat, 0) | bit
    if len(universe) > 5000:
        raise RuleError("instance too large for the brute-force oracle")
    cands = []
    for pat, mask in universe.items():
        rule = _merged_rule(view, pat)
        w = weight(config, rule, table)
        if w > 0:
            cands.append((rule, w, mask))
    # domination prune
    kept = []
    for i, (r_i, w_i, m_i) in enumerate(cands):
        dominated = False
        for j, (r_j, w_j, m_j) in enumerate(cands):
            if i == j:
                continue
            if w_j >= w_i and (m_i & ~m_j) == 0 and (w_j > w_i or m_j != m_i or j < i):
                dominated = True
                break
        if not dominated:
            kept.append((r_i, w_i, m_i))
    kept.sort(key=lambda x: (-x[1], x[0].sort_key()))
    weights = view.effective_weights()

    def exact_score(subset) -> float:
        total = 0.0
        covered = 0
        for r, w, m in subset:  # already weight-sorted
            fresh = m & ~covered
            if fresh:
                idx = np.array([t for t in range(n) if fresh >> t & 1])
                total += w * float(weights[idx].sum())
                covered |= m
        return total

    take = min(k, len(kept))
    best_rules: list[Rule] = []
    best_score = 0.0
    for combo in itertools.combinations(kept, take):
        s = exact_score(combo)
        if s > best_score + 1e-12:
            best_score = s
            best_rules = [c[0] for c in combo]
    return score(view, best_rules, config, aggregate)


def estimate_mw(
    table: Table,
    config: WeightConfig,
    k: int,
    probe_size: int = 2000,
    seed: int = 0,
) -> float:
    """Probe-sample doubling heuristic: run the search uncapped on a small
    uniform sample and return twice the maximum output weight."""
    if probe_size < 1:
        raise RuleError("probe_size must be >= 1")
    view = as_view(table)
    n = view.num_rows
    take = min(probe_size, n)
    if take < n:
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(n, size=take, replace=False))
        probe = DataView(
            table=view.table,
            free_cols=view.free_cols,
            codes=view.codes[rows],
            row_ids=view.row_ids[rows],
            fixed=dict(view.fixed),
            scale=view.scale * n / take,
        )
    else:
        probe = view
    uncapped = max(config.max_weight(table), 1.0)
    result = best_rule_set(probe, config, k, uncapped)
    x = max((s.weight for s in result), default=0.0)
    return max(1.0, 2.0 * x)
