"""Sample-memory allocation over the drill tree.

Two allocators: an exact-by-category dynamic program under the
parent-child simplification (a leaf's effective sample size draws only on
itself and its parent), and a projected-subgradient optimizer of the
hinge-relaxed objective that accepts arbitrary selectivity structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .rules import RuleError

ENUM_GUARD = 12  # max leaf children per category enumeration


@dataclass
class AllocationProblem:
    """Node ids are 0..n-1; parents[i] is None for the root.  p holds leaf
    probabilities summing to 1; selectivity[(a, b)] is the fraction of a's
    cover kept by b (only sub-rule pairs should appear, and (i, i) is
    implicitly 1)."""

    parents: list
    leaves: list
    p: dict
    selectivity: dict
    memory: int
    min_ss: int
    root: int = 0

    def __post_init__(self):
        if self.min_ss <= 0:
            raise RuleError("minSS must be positive")
        if self.memory < 0:
            raise RuleError("memory must be non-negative")
        total = sum(self.p.get(l, 0.0) for l in self.leaves)
        if self.leaves and abs(total - 1.0) > 1e-6:
            raise RuleError(f"leaf probabilities sum to {total}, expected 1")

    @property
    def num_nodes(self) -> int:
        return len(self.parents)

    def ratio(self, a: int, b: int) -> float:
        if a == b:
            return 1.0
        return float(self.selectivity.get((a, b), 0.0))

    def ess(self, budgets, leaf: int) -> float:
        total = 0.0
        for r in range(self.num_nodes):
            s = self.ratio(r, leaf)
            if s > 0.0:
                total += s * budgets.get(r, 0)
        return total

    def step_objective(self, budgets) -> float:
        return sum(
            self.p.get(l, 0.0)
            for l in self.leaves
            if self.ess(budgets, l) >= self.min_ss - 1e-9
        )

    def hinge_objective(self, budgets) -> float:
        return sum(
            self.p.get(l, 0.0) * max(-1.0, -self.ess(budgets, l) / self.min_ss)
            for l in self.leaves
        )


@dataclass
class AllocationPlan:
    budgets: dict  # node id -> n_r >= 0
    objective_value: float

    def total(self) -> int:
        return int(sum(self.budgets.values()))


def _quant(min_ss: int) -> int:
    # coarse memory quanta keep the knapsack small at <1% of minSS error
    return max(1, min_ss // 100)


def group_options(problem: AllocationProblem, r0: int, children: list):
    """Locally optimal (cost, value, budgets) triples for one parent and its
    leaf children.

    Every child falls in one of three categories: fed entirely by the
    parent sample, unsatisfied, or topped up by its own sample of size
    minSS - n_parent * S(parent, child).  Enumerating category assignments
    covers all non-dominated local solutions.
    """
    d = len(children)
    if d > ENUM_GUARD:
        raise RuleError(f"too many children to enumerate ({d} > {ENUM_GUARD})")
    min_ss = problem.min_ss
    options = {}
    for cats in product((0, 1, 2), repeat=d):  # 0 parent-fed, 1 unsat, 2 top-up
        fed = [c for c, cat in zip(children, cats) if cat == 0]
        if fed:
            s_min = min(problem.ratio(r0, c) for c in fed)
            if s_min <= 0.0:
                continue
            n0 = math.ceil(min_ss / s_min)
        else:
            n0 = 0
        budgets = {r0: n0} if n0 else {}
        cost = n0
        value = sum(problem.p.get(c, 0.0) for c in fed)
        for c, cat in zip(children, cats):
            if cat != 2:
                continue
            top = max(0, math.ceil(min_ss - n0 * problem.ratio(r0, c)))
            if top:
                budgets[c] = top
                cost += top
            value += problem.p.get(c, 0.0)
        key = options.get(cost)
        if key is None or value > key[0] + 1e-12:
            options[cost] = (value, budgets)
    out = [(cost, value, budgets) for cost, (value, budgets) in options.items()]
    out.append((0, 0.0, {}))
    # drop dominated options (higher cost, no more value)
    out.sort(key=lambda o: (o[0], -o[1]))
    kept = []
    best = -1.0
    for cost, value, budgets in out:
        if value > best + 1e-12:
            kept.append((cost, value, budgets))
            best = value
    return kept


def _groups(problem: AllocationProblem):
    children = {}
    for l in problem.leaves:
        parent = problem.parents[l]
        if parent is None:
            # a leaf with no parent is its own provider
            children.setdefault(("self", l), []).append(l)
        else:
            children.setdefault(("node", parent), []).append(l)
    groups = []
    for (kind, node), leafs in children.items():
        groups.append((node, leafs))
    return groups


def allocate_dp(problem: AllocationProblem) -> AllocationPlan:
    """Knapsack over per-parent locally optimal assignments, memory measured
    in quanta.  Falls back to the convex allocator when a node has too many
    leaf children to enumerate."""
    try:
        groups = [
            (r0, group_options(problem, r0, leafs))
            for r0, leafs in _groups(problem)
        ]
    except RuleError:
        return allocate_convex(problem)
    quant = _quant(problem.min_ss)
    cap = problem.memory // quant
    G = len(groups)
    NEG = -1.0
    value_tab = np.full((G + 1, cap + 1), NEG)
    value_tab[0, :] = 0.0
    pick_tab = np.full((G, cap + 1), -1, dtype=np.int64)
    qcosts = []
    for gi, (r0, options) in enumerate(groups):
        qs = [-(-cost // quant) for cost, _, _ in options]  # ceil: real bound stays sound
        qcosts.append(qs)
        for j in range(cap + 1):
            best_v, best_o = NEG, -1
            for oi, (cost, value, _) in enumerate(options):
                q = qs[oi]
                if q > j:
                    continue
                prev = value_tab[gi, j - q]
                if prev >= 0 and prev + value > best_v:
                    best_v = prev + value
                    best_o = oi
            value_tab[gi + 1, j] = best_v
            pick_tab[gi, j] = best_o
    j = int(np.argmax(value_tab[G]))
    objective = float(max(0.0, value_tab[G, j]))
    budgets: dict = {}
    for gi in range(G - 1, -1, -1):
        oi = int(pick_tab[gi, j])
        cost, value, opt_budgets = groups[gi][1][oi]
        for node, n in opt_budgets.items():
            budgets[node] = budgets.get(node, 0) + n
        j -= qcosts[gi][oi]
    spent = sum(budgets.values())
    if spent > problem.memory:
        raise RuleError("internal: allocation exceeded the memory budget")
    # leftover memory goes to the root: a bigger root sample serves every
    # future combine
    leftover = problem.memory - spent
    if leftover > 0:
        budgets[problem.root] = budgets.get(problem.root, 0) + leftover
    return AllocationPlan(budgets, objective)


def evaluate_hinge(problem: AllocationProblem, budgets) -> float:
    return problem.hinge_objective(budgets)


def allocate_convex(
    problem: AllocationProblem,
    iterations: int = 2000,
    step: float | None = None,
) -> AllocationPlan:
    """Projected subgradient descent on the hinge relaxation.

    Real-valued budgets start at zero and stay inside the scaled simplex
    {n >= 0, sum n <= M}.  By default steps follow the Polyak rule with an
    estimated target (the classical M/(100 sqrt(iterations)) constant
    cannot cross the feasible region at these gradient scales; pass `step`
    to force the plain step/sqrt(t) schedule).  The best iterate is kept,
    exact line-search polishing sharpens the corner the subgradient
    orbits, and the result is rounded up then trimmed (largest round-up
    gain first) back under the budget.
    """
    n_nodes = problem.num_nodes
    M = float(problem.memory)
    min_ss = float(problem.min_ss)
    leaves = list(problem.leaves)
    probs = np.array([problem.p.get(l, 0.0) for l in leaves])
    # contribution matrix: ess(leaf) = ratios @ n
    ratios = np.zeros((len(leaves), n_nodes))
    for li, l in enumerate(leaves):
        for r in range(n_nodes):
            ratios[li, r] = problem.ratio(r, l)

    def objective(vec) -> float:
        ess = ratios @ vec
        return float(np.sum(probs * np.maximum(-1.0, -ess / min_ss)))

    sum_p = float(probs.sum())
    x = np.zeros(n_nodes)
    best = x.copy()
    best_f = objective(x)
    for t in range(1, iterations + 1):
        ess = ratios @ x
        active = ess < min_ss
        grad = -(ratios[active].T @ (probs[active] / min_ss))
        norm_sq = float(grad @ grad)
        if norm_sq == 0.0:
            break
        f = objective(x)
        if step is not None:
            move = (step / math.sqrt(t)) * grad / math.sqrt(norm_sq)
        else:
            # Polyak step toward an estimated target below the best seen
            target = best_f - sum_p / math.sqrt(t)
            move = ((f - target) / norm_sq) * grad
        x = _project_capped_simplex(x - move, M)
        f = objective(x)
        if f < best_f - 1e-15:
            best_f = f
            best = x.copy()
    # polish both the subgradient iterate and a greedy saturation seed;
    # the hinge surface is polyhedral and line searches alone can stall in
    # a corner that a different basin avoids
    candidates = [
        _coordinate_polish(best, ratios, probs, min_ss, M, objective),
        _coordinate_polish(
            _greedy_saturation_start(ratios, probs, min_ss, M),
            ratios,
            probs,
            min_ss,
            M,
            objective,
        ),
    ]
    best = min(candidates, key=objective)
    best_f = objective(best)

    budgets_f = best
    ceiled = np.ceil(budgets_f - 1e-9)
    excess = ceiled.sum() - M
    if excess > 0:
        # trim the largest round-up gains first
        gain = ceiled - budgets_f
        for i in np.argsort(-gain):
            if excess <= 0:
                break
            drop = min(ceiled[i] - math.floor(budgets_f[i]), excess)
            ceiled[i] -= drop
            excess -= drop
    # rounding can land one tuple short of a saturation threshold; unit
    # exchanges recover it without touching the budget
    ceiled = _integer_exchange_polish(ceiled, objective)
    budgets = {i: int(v) for i, v in enumerate(ceiled) if v > 0}
    return AllocationPlan(budgets, problem.hinge_objective(budgets))


def _greedy_saturation_start(ratios, probs, min_ss, M):
    """Saturate leaves in probability order via their cheapest contributor."""
    n_leaves, n_nodes = ratios.shape
    x = np.zeros(n_nodes)
    for li in np.argsort(-probs):
        ess = float(ratios[li] @ x)
        if ess >= min_ss:
            continue
        need = min_ss - ess
        with np.errstate(divide="ignore"):
            costs = np.where(ratios[li] > 0, need / np.maximum(ratios[li], 1e-12), np.inf)
        i = int(np.argmin(costs))
        if np.isfinite(costs[i]) and x.sum() + costs[i] <= M:
            x[i] += costs[i]
    return x


def _integer_exchange_polish(x, objective, rounds: int = 4):
    x = x.copy()
    n = x.size
    for _ in range(rounds):
        f0 = objective(x)
        best_pair, best_f = None, f0
        for i in range(n):
            if x[i] <= 0:
                continue
            for j in range(n):
                if i == j:
                    continue
                x[i] -= 1
                x[j] += 1
                f = objective(x)
                x[i] += 1
                x[j] -= 1
                if f < best_f - 1e-15:
                    best_f, best_pair = f, (i, j)
        if best_pair is None:
            break
        x[best_pair[0]] -= 1
        x[best_pair[1]] += 1
    return x


def _coordinate_polish(x, ratios, probs, min_ss, M, objective, rounds: int = 8):
    """Exact line searches along single coordinates and budget-neutral
    pairwise exchanges.

    The objective is piecewise linear along any such line, with breakpoints
    where a leaf's ess crosses minSS, so evaluating the breakpoints and the
    interval ends is an exact minimization.  Pairwise exchanges escape the
    simplex corners plain coordinate descent gets stuck in.
    """
    x = x.copy()
    n = x.size

    def line_minimize(direction, lo, hi):
        nonlocal x
        if hi - lo <= 1e-12:
            return False
        d_ess = ratios @ direction
        ess0 = ratios @ x
        cands = {lo, hi, 0.0}
        with np.errstate(divide="ignore", invalid="ignore"):
            bp = (min_ss - ess0) / np.where(d_ess != 0.0, d_ess, np.nan)
        for b in bp[np.isfinite(bp)]:
            if lo < b < hi:
                cands.add(float(b))
        base_f = objective(x)
        best_t, best_f = 0.0, base_f
        for t in sorted(cands):
            f = objective(x + t * direction)
            if f < best_f - 1e-15:
                best_f, best_t = f, t
        if best_t != 0.0:
            x = x + best_t * direction
            np.clip(x, 0.0, None, out=x)
            return True
        return False

    for _ in range(rounds):
        changed = False
        for i in range(n):
            if not np.any(ratios[:, i] > 0):
                continue
            e = np.zeros(n)
            e[i] = 1.0
            slack = M - x.sum()
            changed |= line_minimize(e, -x[i], slack)
        for i in range(n):
            if x[i] <= 0:
                continue
            for j in range(n):
                if i == j:
                    continue
                d = np.zeros(n)
                d[i], d[j] = -1.0, 1.0
                if not np.any(ratios @ d):
                    continue
                changed |= line_minimize(d, 0.0, x[i])
        if not changed:
            break
    return x


def _project_capped_simplex(v, cap: float):
    """Euclidean projection onto {x >= 0, sum x <= cap}."""
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= cap:
        return clipped
    # project onto the simplex scaled to cap
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - cap
    ks = np.arange(1, v.size + 1)
    valid = u - css / ks > 0
    rho = int(np.max(np.nonzero(valid))) if np.any(valid) else 0
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)
