"""Smart drill-down: approximately optimal rule-list summaries of relational
tables, interactive drill gestures, and dynamically allocated sample memory."""

from .allocation import (
    AllocationPlan,
    AllocationProblem,
    allocate_convex,
    allocate_dp,
    evaluate_hinge,
)
from .brs import (
    CandidateEntry,
    DrillConstraint,
    SearchStats,
    best_rule_set,
    brute_force_best_set,
    drill_reduce,
    estimate_mw,
    find_best_marginal_rule,
)
from .rules import (
    DataView,
    Rule,
    RuleError,
    ScoredRule,
    ScoredRuleList,
    WeightConfig,
    as_view,
    count,
    covers,
    is_subrule,
    list_score,
    marginal_counts,
    rule_from_text,
    rule_to_text,
    score,
    weight,
)
from .sampler import (
    Sample,
    SampleHandler,
    combine,
    confidence_interval,
    create_pass,
    find,
    selectivity_ratio,
    suggest_min_ss,
)
from .session import DrillNode, Session, SessionConfig, SessionError, new_session
from .table import (
    ColumnSchema,
    Table,
    TableError,
    bucketize,
    load_csv,
    load_dataset,
    parse_schema_file,
    scan,
)

__version__ = "0.1.0"
