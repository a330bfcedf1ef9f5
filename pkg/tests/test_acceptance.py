"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

The survey golden runs execute against the bundled deterministic fixture
(see survey_fixture.py).  Setting MARKETING_CSV to the public 14-column
whitespace-separated survey file additionally runs the real-data golden
test in its degraded form: expected rule patterns, with counts checked
against an independent exact-count oracle on the loaded table.
"""

import os
import time

import numpy as np
import pytest

from conftest import F2_ROWS, all_rules, make_table, random_tiny_table
from test_allocation import oracle_best, random_tree
from test_brs import unpruned_best_rule_set
from survey_fixture import (
    AGE_TOTALS,
    BITS_EXPANSION,
    FEMALE_EDUCATION_STAR,
    MALE_EXPANSION,
    ROOT_EXPANSION,
    rule_of,
    survey_table,
)

import drilldown as dd
from drilldown import (
    Rule,
    SessionConfig,
    WeightConfig,
    allocate_convex,
    allocate_dp,
    best_rule_set,
    brute_force_best_set,
    confidence_interval,
    count,
    create_pass,
    evaluate_hinge,
    list_score,
    new_session,
    score,
)

SIZE = WeightConfig.size()


def report(name: str, ok: bool, detail: str = ""):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"{name} failed: {detail}"


def oracle_count(table, rule, weights=None):
    """Independent exact counter: plain row scan, no engine code paths."""
    total = 0.0
    for i, row in dd.scan(table):
        if all(v is None or row[c] == v for c, v in enumerate(rule.pattern)):
            total += 1.0 if weights is None else weights[i]
    return total


# -- criterion 1: survey golden run ----------------------------------------------


def patterns_of(result):
    return set(result.patterns())


def golden_run(table, degrade_counts: bool):
    """Runs the golden drill scenarios; returns (ok, detail)."""
    session = new_session(
        table,
        SessionConfig(k=4, m_w=5.0, min_ss=5000, memory=50000, time_limit=None),
    )
    timings = []

    def timed_expand(fn):
        started = time.monotonic()
        out = fn()
        timings.append(time.monotonic() - started)
        return out

    # expanding the root
    root = timed_expand(lambda: session.expand(session.root.rule))
    expected_root = {rule_of(table, a) for a in ROOT_EXPANSION}
    if patterns_of(root) != expected_root:
        return False, f"root patterns {sorted(str(p.pattern) for p in patterns_of(root))}"
    for entry in root:
        if entry.count != oracle_count(table, entry.rule):
            return False, f"count mismatch for {entry.rule.pattern}"
    if not degrade_counts:
        counts = sorted(e.count for e in root)
        if counts != [980.0, 2100.0, 4075.0, 4918.0]:
            return False, f"root counts {counts}"
    if session.root.displayed_count != table.num_rows:
        return False, "root count is not |T|"

    # star expansion of Education under Female
    female = rule_of(table, {"Gender": "Female"})
    edu_star = timed_expand(lambda: session.expand_star(female, "Education"))
    if patterns_of(edu_star) != {rule_of(table, a) for a in FEMALE_EDUCATION_STAR}:
        return False, "education star patterns"
    for entry in edu_star:
        if entry.count != oracle_count(table, entry.rule):
            return False, "education star count vs oracle"

    # expanding Male with k=3
    male = rule_of(table, {"Gender": "Male"})
    session.config.k = 3
    male_exp = timed_expand(lambda: session.expand(male))
    session.config.k = 4
    if patterns_of(male_exp) != {rule_of(table, a) for a in MALE_EXPANSION}:
        return False, "male expansion patterns"
    for entry in male_exp:
        if entry.count != oracle_count(table, entry.rule):
            return False, "male expansion count vs oracle"

    # bits weighting with m_w = 20 (fresh session)
    bits_session = new_session(
        table,
        SessionConfig(
            k=4, m_w=20.0, min_ss=5000, memory=50000,
            weight=WeightConfig.bits(), time_limit=None,
        ),
    )
    bits_exp = timed_expand(lambda: bits_session.expand(bits_session.root.rule))
    if patterns_of(bits_exp) != {rule_of(table, a) for a in BITS_EXPANSION}:
        return False, "bits expansion patterns"
    for entry in bits_exp:
        if entry.count != oracle_count(table, entry.rule):
            return False, "bits count vs oracle"

    # regular drill-down emulation on Age
    drill_session = new_session(
        table, SessionConfig(k=4, m_w=5.0, min_ss=5000, memory=50000, time_limit=None)
    )
    age_drill = timed_expand(
        lambda: drill_session.emulate_regular_drilldown(drill_session.root.rule, "Age")
    )
    age_idx = table.column_index("Age")
    got_ages = {
        table.columns[age_idx].values[e.rule.pattern[age_idx]]: e.count for e in age_drill
    }
    for value, cnt in got_ages.items():
        if cnt != oracle_count(table, rule_of(table, {"Age": value})):
            return False, "age drill count vs oracle"
    if len(got_ages) != 7:
        return False, f"age drill yielded {len(got_ages)} rules"
    if not degrade_counts and got_ages != {k: float(v) for k, v in AGE_TOTALS.items()}:
        return False, f"age drill counts {got_ages}"

    worst = max(timings)
    if worst >= 5.0:
        return False, f"slowest expansion {worst:.2f}s"
    return True, f"slowest expansion {worst:.2f}s"


def test_criterion_survey_golden_run():
    table = survey_table()
    assert table.num_rows == 8993
    ok, detail = golden_run(table, degrade_counts=False)
    report("survey-golden-run", ok, detail)


@pytest.mark.skipif(
    not os.environ.get("MARKETING_CSV"), reason="MARKETING_CSV not provided"
)
def test_criterion_marketing_real_data():
    path = os.environ["MARKETING_CSV"]
    table = dd.load_csv(path, header=False, delimiter=" ", na_policy="keep")
    table = table.restrict_columns(7)
    degrade = table.num_rows != 8993
    ok, detail = golden_run(table, degrade_counts=degrade)
    report("marketing-real-data", ok, detail)


# -- criteria 2 + 3: greedy bound and pruning soundness ----------------------------


def test_criterion_greedy_bound_and_pruning():
    rng = np.random.default_rng(90125)
    started = time.monotonic()
    bound_violations = 0
    pruning_violations = 0
    tables = 0
    for _ in range(200):
        t = random_tiny_table(rng)
        tables += 1
        m_max = SIZE.max_weight(t)
        for k in (1, 2, 3):
            opt = brute_force_best_set(t, SIZE, k).score
            got = best_rule_set(t, SIZE, k, m_max).score
            factor = 1.0 - ((k - 1) / k) ** k
            if got + 1e-9 < factor * opt:
                bound_violations += 1
            ref = unpruned_best_rule_set(t, SIZE, k).score
            if abs(got - ref) > 1e-9:
                pruning_violations += 1
    elapsed = time.monotonic() - started
    report(
        "greedy-approximation",
        bound_violations == 0 and elapsed < 60.0,
        f"{tables} tables, {bound_violations} violations, {elapsed:.1f}s",
    )
    report(
        "pruning-soundness",
        pruning_violations == 0,
        f"{pruning_violations} violations",
    )


# -- criterion 4: order and submodularity properties --------------------------------


def test_criterion_order_and_submodularity():
    f2 = make_table(F2_ROWS, names=["X", "Y", "Z"])
    universe = all_rules(f2)
    rng = np.random.default_rng(1859)
    violations = 0
    for _ in range(5000):  # sorted order dominates any permutation
        size = int(rng.integers(2, 5))
        pick = [universe[i] for i in rng.choice(len(universe), size=size, replace=False)]
        sorted_score = score(f2, set(pick), SIZE).score
        perm = list(pick)
        rng.shuffle(perm)
        if sorted_score + 1e-9 < list_score(f2, perm, SIZE):
            violations += 1
    for _ in range(5000):  # submodularity of the set score
        idx = rng.choice(len(universe), size=4, replace=False)
        s_small = {universe[i] for i in idx[:2]}
        s_big = s_small | {universe[int(idx[2])]}
        extra = universe[int(idx[3])]
        if extra in s_big:
            continue
        gain_small = (
            score(f2, s_small | {extra}, SIZE).score - score(f2, s_small, SIZE).score
        )
        gain_big = score(f2, s_big | {extra}, SIZE).score - score(f2, s_big, SIZE).score
        if gain_small + 1e-9 < gain_big:
            violations += 1
    report("order-and-submodularity", violations == 0, f"{violations} violations / 10000")


# -- criterion 5: sampling error trend ------------------------------------------------


def test_criterion_sampling_error_trend():
    rng = np.random.default_rng(27)
    rows = 100_000
    codes = np.column_stack(
        [
            rng.integers(0, 4, size=rows),
            rng.integers(0, 6, size=rows),
            rng.integers(0, 3, size=rows),
            rng.integers(0, 8, size=rows),
        ]
    ).astype(np.int32)
    table = make_table(codes, nvals=[4, 6, 3, 8])
    displayed = best_rule_set(table, SIZE, 4, 4.0).patterns()
    exact = {r: count(table, r) for r in displayed}
    trivial = Rule.trivial(4)

    def trial_errors(min_ss, trials=50, z=3.0):
        errs = []
        covered = 0
        total = 0
        for seed in range(trials):
            samples, _ = create_pass(table, {trivial: min_ss}, seed=7919 * min_ss + seed)
            s = samples[trivial]
            for r in displayed:
                est = count(s.as_view(), r)
                errs.append(100.0 * abs(est - exact[r]) / exact[r])
                lo, hi = confidence_interval(est, s, z)
                covered += 1 if lo <= exact[r] <= hi else 0
                total += 1
        return float(np.mean(errs)), covered / total

    err_small, cover_small = trial_errors(1000)
    err_big, cover_big = trial_errors(4000)
    coverage = (cover_small + cover_big) / 2
    report(
        "sampling-error-trend",
        err_big < err_small and coverage >= 0.95,
        f"err@1000={err_small:.2f}% err@4000={err_big:.2f}% ci-coverage={coverage:.3f}",
    )


# -- criterion 6: allocation correctness ------------------------------------------------


def test_criterion_allocation():
    rng = np.random.default_rng(4242)
    dp_mismatches = 0
    convex_violations = 0
    infeasible = 0
    for _ in range(100):
        problem = random_tree(rng)
        plan = allocate_dp(problem)
        if plan.total() > problem.memory:
            infeasible += 1
        if abs(plan.objective_value - oracle_best(problem)) > 1e-9:
            dp_mismatches += 1
        cv = allocate_convex(problem)
        if cv.total() > problem.memory:
            infeasible += 1
        tol = 1e-6 * sum(problem.p.values())
        if evaluate_hinge(problem, cv.budgets) > evaluate_hinge(problem, plan.budgets) + tol:
            convex_violations += 1
    report(
        "allocation-correctness",
        dp_mismatches == 0 and convex_violations == 0 and infeasible == 0,
        f"dp-mismatches={dp_mismatches} convex-violations={convex_violations}",
    )


# -- criterion 7: interaction path -------------------------------------------------------


def test_criterion_interaction_path():
    rng = np.random.default_rng(31)
    rows = 60_000  # >= 10x the 5000-tuple budget
    memory, min_ss = 5000, 500
    codes = np.column_stack(
        [
            rng.integers(0, 3, size=rows),
            rng.integers(0, 4, size=rows),
            rng.integers(0, 5, size=rows),
        ]
    ).astype(np.int32)
    table = make_table(codes, nvals=[3, 4, 5])
    session = new_session(
        table,
        SessionConfig(k=3, m_w=3.0, min_ss=min_ss, memory=memory, time_limit=None),
    )
    session.expand(session.root.rule)
    session.wait_for_prefetch()
    problem, _ = session._allocation_problem()
    plan = allocate_dp(problem)
    objective_one = abs(plan.objective_value - 1.0) < 1e-9
    scans_before = session.counters["table_scans"]
    for child in list(session.root.children):
        session.expand(child.rule)
    no_scans = session.counters["table_scans"] == scans_before
    report(
        "interaction-path",
        objective_one and no_scans,
        f"objective={plan.objective_value:.3f} scans_added="
        f"{session.counters['table_scans'] - scans_before}",
    )


# -- fixture structural self-checks (guards the golden run's premises) -------------------


def test_survey_fixture_targets():
    t = survey_table()
    checks = {
        ("Gender", "Female"): 4918,
        ("Gender", "Male"): 4075,
        ("Occupation", "Professional/Managerial"): 2820,
        ("Marital status", "Never married"): 3497,
        ("Marital status", "Married"): 2868,
    }
    for (col, value), expected in checks.items():
        assert oracle_count(t, rule_of(t, {col: value})) == expected
    for value, expected in AGE_TOTALS.items():
        assert oracle_count(t, rule_of(t, {"Age": value})) == expected
    edu_star = {"1-3 years college": 1712, "High school": 1149, "College graduate": 771, "Grades 9-11": 605}
    for value, expected in edu_star.items():
        assert (
            oracle_count(t, rule_of(t, {"Gender": "Female", "Education": value}))
            == expected
        )
    assert (
        oracle_count(
            t,
            rule_of(
                t,
                {
                    "Gender": "Male",
                    "Marital status": "Never married",
                    "Time in Bay Area": ">10 years",
                },
            ),
        )
        == 980
    )
    assert (
        oracle_count(
            t,
            rule_of(
                t,
                {
                    "Marital status": "Never married",
                    "Occupation": "Student",
                    "Time in Bay Area": ">10 years",
                },
            ),
        )
        == 742
    )
    assert (
        oracle_count(
            t,
            rule_of(
                t,
                {
                    "Marital status": "Married",
                    "Occupation": "Professional/Managerial",
                    "Time in Bay Area": ">10 years",
                },
            ),
        )
        == 825
    )
