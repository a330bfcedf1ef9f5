"""Drill-tree sessions: expand, star-expand, collapse, prefetch, refresh."""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .allocation import AllocationPlan, AllocationProblem, allocate_dp
from .brs import best_rule_set, drill_reduce, estimate_mw
from .rules import (
    Rule,
    RuleError,
    WeightConfig,
    count,
    is_subrule,
    rule_from_text,
    rule_to_text,
    weight,
)
from .sampler import Sample, SampleHandler
from .table import Table, TableError


class SessionError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class SessionConfig:
    k: int = 4
    m_w: float | None = None  # None: estimate before the first expansion
    min_ss: int = 5000
    memory: int = 50000
    weight: WeightConfig = field(default_factory=WeightConfig.size)
    aggregate: object = "count"  # "count" | ("sum", measure)
    time_limit: float | None = 5.0
    seed: int = 0
    probe_size: int = 2000

    def __post_init__(self):
        if self.k < 1:
            raise SessionError("bad_config", "k must be >= 1")
        if not 0 < self.min_ss <= self.memory:
            raise SessionError("bad_config", "need 0 < minSS <= M")


@dataclass
class DrillNode:
    rule: Rule
    displayed_count: float
    count_is_exact: bool
    weight: float
    children: list = field(default_factory=list)
    leaf_probability: float = 0.0

    @property
    def expanded(self) -> bool:
        return bool(self.children)


class Session:
    """One analyst's exploration state.

    Mutations (expand / star / collapse / config changes) serialize on the
    session lock; the prefetch worker scans outside the lock and installs
    its results atomically between gestures.
    """

    def __init__(self, table: Table, config: SessionConfig, leaf_probability_fn=None):
        if table.num_cols == 0:
            raise TableError("table has no columns")
        if isinstance(config.aggregate, tuple):
            measure = table.measures.get(config.aggregate[1])
            if measure is None:
                raise SessionError("bad_config", f"unknown measure {config.aggregate[1]!r}")
            if np.any(measure < 0):
                raise SessionError(
                    "bad_config", "sum aggregation requires non-negative measure values"
                )
        self.table = table
        self.config = config
        self.lock = threading.RLock()
        self._leaf_probability_fn = leaf_probability_fn or _uniform_leaf_probabilities
        self.handler = SampleHandler(table, config.memory, config.min_ss, config.seed)
        self.counters = {"expands": 0, "table_scans": 0, "prefetches": 0}
        self.timings: dict = {}
        self._prefetch_thread: threading.Thread | None = None
        self._prefetch_again = False
        root_rule = Rule.trivial(table.num_cols)
        self.root = DrillNode(
            rule=root_rule,
            displayed_count=self._exact_aggregate(root_rule),
            count_is_exact=True,
            weight=weight(config.weight, root_rule, table),
        )
        self._renormalize()
        if table.num_rows:
            self.handler.run_create_pass(
                {root_rule: min(config.memory, table.num_rows)}
            )
        if config.m_w is None:
            self.m_w = estimate_mw(
                table, config.weight, config.k, config.probe_size, config.seed
            )
        else:
            self.m_w = float(config.m_w)

    # -- tree access --------------------------------------------------------

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self):
        return [n for n in self.nodes() if not n.children]

    def find_node(self, rule: Rule) -> DrillNode:
        for node in self.nodes():
            if node.rule == rule:
                return node
        raise SessionError("unknown_node", f"no displayed node for rule {rule.pattern}")

    def node_by_text(self, text: str) -> DrillNode:
        try:
            rule = rule_from_text(text, self.table)
        except (RuleError, TableError) as e:
            raise SessionError("unknown_node", str(e))
        return self.find_node(rule)

    def _parent_of(self, node: DrillNode) -> DrillNode | None:
        for cand in self.nodes():
            if node in cand.children:
                return cand
        return None

    def _renormalize(self):
        self._leaf_probability_fn(self)

    def _exact_aggregate(self, rule: Rule) -> float:
        return count(self.table, rule, self.config.aggregate)

    # -- gestures ------------------------------------------------------------

    def expand(self, rule: Rule, star_column: str | None = None, emit=None):
        with self.lock:
            return self._expand(rule, star_column, self.config.k, self.config.weight, emit)

    def expand_star(self, rule: Rule, column: str, emit=None):
        return self.expand(rule, star_column=column, emit=emit)

    def _expand(self, rule: Rule, star_column, k: int, wconfig: WeightConfig, emit=None):
        node = self.find_node(rule)
        if node.expanded:
            raise SessionError("already_expanded", "node already has children")
        star_idx = None
        if star_column is not None:
            star_idx = self.table.column_index(star_column)
            if node.rule.pattern[star_idx] is not None:
                raise SessionError(
                    "bad_column", f"column {star_column!r} is already instantiated"
                )
        started = time.monotonic()
        data = self._data_for(node)
        view, wconfig, constraint = drill_reduce(data, node.rule, star_idx, wconfig)
        exact = data.scale == 1.0 if hasattr(data, "scale") else True
        result = best_rule_set(
            view,
            wconfig,
            k,
            self.m_w,
            constraint,
            emit=emit,
            time_limit=self.config.time_limit,
            aggregate=self.config.aggregate,
        )
        node.children = [
            DrillNode(
                rule=s.rule,
                displayed_count=(s.sum if s.sum is not None else s.count),
                count_is_exact=exact,
                weight=s.weight,
            )
            for s in result
        ]
        self._renormalize()
        self.counters["expands"] += 1
        self.timings["last_expand_seconds"] = time.monotonic() - started
        self.prefetch()
        return result

    def collapse(self, rule: Rule) -> None:
        with self.lock:
            node = self.find_node(rule)
            if not node.expanded:
                raise SessionError("not_expanded", "node has no children to collapse")
            node.children = []
            self._renormalize()

    def emulate_regular_drilldown(self, rule: Rule, column: str):
        """Classic one-column drill down: k = number of distinct values in
        the node's data view, weight 1 iff the column is instantiated."""
        with self.lock:
            node = self.find_node(rule)
            if node.expanded:
                raise SessionError("already_expanded", "node already has children")
            col = self.table.column_index(column)
            if node.rule.pattern[col] is not None:
                raise SessionError("bad_column", f"column {column!r} is already instantiated")
            data = self._data_for(node)
            view = data.as_view() if isinstance(data, Sample) else data
            narrowed = view.narrowed(node.rule)
            pos = narrowed.free_cols.index(col)
            n_distinct = len(np.unique(narrowed.codes[:, pos])) if narrowed.num_rows else 0
            if n_distinct == 0:
                return best_rule_set(narrowed, self.config.weight, 0, 1.0)
            indicator = WeightConfig.parametric({column: 1.0})
            return self._expand(rule, column, n_distinct, indicator)

    # -- sample acquisition ---------------------------------------------------

    def _data_for(self, node: DrillNode):
        """find -> combine -> create, in cost order."""
        rule = node.rule
        sample = self.handler.lookup(rule)
        if sample is not None:
            return sample
        sample = self.handler.combine_for(rule)
        if sample is not None:
            return sample
        self.counters["table_scans"] += 1
        plan = self._plan_with_required(rule, node.displayed_count)
        samples, exact = self.handler.run_create_pass(
            plan, displayed=[n.rule for n in self.nodes()], keep_priority=self._priorities()
        )
        self._apply_exact_counts(exact)
        return self.handler.pool[rule]

    def _plan_with_required(self, rule: Rule, est_count: float) -> dict:
        cfg = self.config
        est = int(math.ceil(est_count)) if est_count > 0 else cfg.min_ss
        if est <= cfg.memory:
            required = max(cfg.min_ss, est)
        else:
            required = cfg.min_ss
        required = min(cfg.memory, required)
        plan = dict(self._allocation_plan().budgets)
        plan[rule] = max(plan.get(rule, 0), required)
        # trim lowest-priority budgets until the plan fits
        total = sum(plan.values())
        if total > cfg.memory:
            prio = dict(self._priorities())
            for r in sorted(plan, key=lambda r: prio.get(r, 0.0)):
                if total <= cfg.memory:
                    break
                if r == rule:
                    continue
                total -= plan.pop(r)
        return plan

    def _priorities(self):
        out = []
        for node in self.nodes():
            out.append((node.rule, node.leaf_probability if not node.children else 0.5))
        return out

    def _allocation_problem(self):
        nodes = list(self.nodes())
        index = {id(n): i for i, n in enumerate(nodes)}
        parents = [None] * len(nodes)
        for i, n in enumerate(nodes):
            for child in n.children:
                parents[index[id(child)]] = i
        leaves = [i for i, n in enumerate(nodes) if not n.children]
        p = {i: nodes[i].leaf_probability for i in leaves}
        selectivity = {}
        for i, a in enumerate(nodes):
            for j, b in enumerate(nodes):
                if i == j:
                    continue
                if is_subrule(a.rule, b.rule) and a.displayed_count > 0:
                    selectivity[(i, j)] = min(
                        1.0, b.displayed_count / a.displayed_count
                    )
        problem = AllocationProblem(
            parents=parents,
            leaves=leaves,
            p=p,
            selectivity=selectivity,
            memory=self.config.memory,
            min_ss=self.config.min_ss,
            root=0,
        )
        return problem, nodes

    def _allocation_plan(self) -> AllocationPlan:
        problem, nodes = self._allocation_problem()
        plan = allocate_dp(problem)
        budgets = {nodes[i].rule: n for i, n in plan.budgets.items() if n > 0}
        return AllocationPlan(budgets, plan.objective_value)

    def _apply_exact_counts(self, exact: dict) -> None:
        for node in self.nodes():
            if node.rule in exact:
                if self.config.aggregate == "count":
                    node.displayed_count = float(exact[node.rule])
                else:
                    node.displayed_count = self._exact_aggregate(node.rule)
                node.count_is_exact = True

    # -- prefetch -------------------------------------------------------------

    def prefetch(self):
        """Background allocation + scan; a newer request supersedes a queued
        one.  Returns the running job thread (join it to wait)."""
        with self.lock:
            if self._prefetch_thread is not None and self._prefetch_thread.is_alive():
                self._prefetch_again = True
                return self._prefetch_thread
            thread = threading.Thread(target=self._prefetch_worker, daemon=True)
            self._prefetch_thread = thread
            thread.start()
            return thread

    def _prefetch_worker(self):
        while True:
            with self.lock:
                self._prefetch_again = False
                plan = self._allocation_plan()
                displayed = [n.rule for n in self.nodes()]
                priorities = self._priorities()
            # the scan itself runs without blocking gestures
            samples, exact = self.handler.run_create_pass(
                plan, displayed=displayed, keep_priority=priorities
            )
            with self.lock:
                self._apply_exact_counts(exact)
                self.counters["prefetches"] += 1
                if not self._prefetch_again:
                    return

    def wait_for_prefetch(self, timeout: float | None = None) -> None:
        t = self._prefetch_thread
        if t is not None:
            t.join(timeout)

    # -- serialization ---------------------------------------------------------

    def serialize_node(self, node: DrillNode) -> dict:
        return {
            "rule": rule_to_text(node.rule, self.table),
            "count": node.displayed_count,
            "exact": node.count_is_exact,
            "weight": node.weight,
            "children": [self.serialize_node(c) for c in node.children],
        }

    def serialize(self) -> dict:
        return {
            "columns": self.table.column_names,
            "aggregate": "count"
            if self.config.aggregate == "count"
            else f"sum({self.config.aggregate[1]})",
            "tree": self.serialize_node(self.root),
        }

    def serialize_json(self) -> str:
        return json.dumps(self.serialize(), sort_keys=True)


def _uniform_leaf_probabilities(session: Session) -> None:
    leaves = session.leaves()
    share = 1.0 / len(leaves) if leaves else 0.0
    for node in session.nodes():
        node.leaf_probability = share if not node.children else 0.0


def new_session(table: Table, config: SessionConfig | None = None, **kw) -> Session:
    return Session(table, config or SessionConfig(), **kw)
