"""Deterministic synthetic demographic-survey table for golden tests.

8993 rows over the 7 leading survey columns.  The joint distribution is
engineered so the exact greedy search returns known rule sets for the
size, bits, size-minus-one and regular-drill-down scenarios, while per
column marginals stay close to the public survey data this mimics.
Construction is fully deterministic: quota streams (largest-deficit
apportionment) interleave values so conditionals stay near-independent.
"""

from __future__ import annotations

import csv
from functools import lru_cache

import numpy as np

from drilldown import ColumnSchema, Table

INCOME = [
    "<$10k",
    "$10-15k",
    "$15-20k",
    "$20-25k",
    "$25-30k",
    "$30-40k",
    "$40-50k",
    "$50-75k",
    "$75k+",
]
GENDER = ["Male", "Female"]
MARITAL = [
    "Married",
    "Living together",
    "Divorced/separated",
    "Widowed",
    "Never married",
]
AGE = ["14-17", "18-24", "25-34", "35-44", "45-54", "55-64", "64+"]
EDUCATION = [
    "Grade 8 or less",
    "Grades 9-11",
    "High school",
    "1-3 years college",
    "College graduate",
    "Grad study",
]
OCCUPATION = [
    "Professional/Managerial",
    "Sales",
    "Laborer",
    "Clerical",
    "Homemaker",
    "Student",
    "Military",
    "Retired",
    "Unemployed",
]
TIME_IN_BAY = ["<1 year", "1-3 years", "4-6 years", "7-10 years", ">10 years"]

COLUMNS = [
    ("Income", INCOME),
    ("Gender", GENDER),
    ("Marital status", MARITAL),
    ("Age", AGE),
    ("Education", EDUCATION),
    ("Occupation", OCCUPATION),
    ("Time in Bay Area", TIME_IN_BAY),
]

# core cells: (gender, marital group, lived in the bay area > 10 years)
CORE = [
    (("Male", "NM", True), 980),
    (("Male", "NM", False), 917),
    (("Male", "MA", True), 250),
    (("Male", "MA", False), 1118),
    (("Male", "OTH", True), 650),
    (("Male", "OTH", False), 160),
    (("Female", "NM", True), 700),
    (("Female", "NM", False), 900),
    (("Female", "MA", True), 800),
    (("Female", "MA", False), 700),
    (("Female", "OTH", True), 600),
    (("Female", "OTH", False), 1218),
]

PROFESSIONAL = {
    ("Male", "MA", True): 175,
    ("Female", "MA", True): 650,
    ("Male", "NM", True): 150,
    ("Female", "NM", True): 100,
    ("Male", "OTH", True): 250,
    ("Female", "OTH", True): 175,
    ("Male", "MA", False): 225,
    ("Female", "MA", False): 50,
    ("Male", "NM", False): 200,
    ("Female", "NM", False): 50,
    ("Male", "OTH", False): 130,
    ("Female", "OTH", False): 665,
}

STUDENT = {
    ("Male", "NM", True): 450,
    ("Female", "NM", True): 292,
    ("Male", "NM", False): 60,
    ("Female", "NM", False): 80,
    ("Male", "MA", False): 10,
    ("Female", "MA", False): 20,
    ("Male", "OTH", True): 20,
    ("Female", "OTH", True): 20,
    ("Male", "OTH", False): 10,
    ("Female", "OTH", False): 40,
}

OTHER_OCCUPATIONS = [
    ("Sales", 0.22),
    ("Clerical", 0.18),
    ("Laborer", 0.16),
    ("Homemaker", 0.16),
    ("Retired", 0.14),
    ("Unemployed", 0.10),
    ("Military", 0.04),
]

MARITAL_GROUPS = {
    "MA": [("Married", 1.0)],
    "NM": [("Never married", 1.0)],
    "OTH": [
        ("Divorced/separated", 0.60),
        ("Widowed", 0.25),
        ("Living together", 0.15),
    ],
}

SHORT_TIME_SHARES = [
    ("<1 year", 0.18),
    ("1-3 years", 0.28),
    ("4-6 years", 0.30),
    ("7-10 years", 0.24),
]

EDU_TOTALS = {
    "Female": {
        "1-3 years college": 1712,
        "High school": 1149,
        "College graduate": 771,
        "Grades 9-11": 605,
        "Grade 8 or less": 300,
        "Grad study": 381,
    },
    "Male": {
        "1-3 years college": 1200,
        "High school": 900,
        "College graduate": 700,
        "Grades 9-11": 500,
        "Grade 8 or less": 375,
        "Grad study": 400,
    },
}

AGE_TOTALS = {
    "14-17": 878,
    "18-24": 2129,
    "25-34": 2249,
    "35-44": 1615,
    "45-54": 922,
    "55-64": 640,
    "64+": 560,
}

INCOME_TOTALS = {name: (1000 if i < 8 else 993) for i, name in enumerate(INCOME)}

TOTAL_ROWS = 8993


def _apportion(total: int, weighted: list) -> list:
    """Largest-remainder split of total over (value, weight) pairs."""
    weights = [w for _, w in weighted]
    scale = sum(weights)
    raw = [total * w / scale for w in weights]
    floors = [int(x) for x in raw]
    short = total - sum(floors)
    order = sorted(range(len(raw)), key=lambda i: (floors[i] - raw[i], i))
    for i in order[:short]:
        floors[i] += 1
    return [(v, n) for (v, _), n in zip(weighted, floors)]


class _QuotaStream:
    """Yields values so every prefix tracks the target proportions."""

    def __init__(self, targets: dict):
        self.keys = [k for k, n in targets.items() if n > 0]
        self.targets = {k: targets[k] for k in self.keys}
        self.total = sum(self.targets.values())
        self.assigned = {k: 0 for k in self.keys}
        self.step = 0

    def __next__(self):
        self.step += 1
        best, best_deficit = None, None
        for k in self.keys:
            if self.assigned[k] >= self.targets[k]:
                continue
            deficit = self.targets[k] * self.step / self.total - self.assigned[k]
            if best_deficit is None or deficit > best_deficit:
                best, best_deficit = k, deficit
        self.assigned[best] += 1
        return best


def _occupation_targets(cell, size: int) -> dict:
    targets = {
        "Professional/Managerial": PROFESSIONAL.get(cell, 0),
        "Student": STUDENT.get(cell, 0),
    }
    rest = size - sum(targets.values())
    for name, n in _apportion(rest, OTHER_OCCUPATIONS):
        targets[name] = n
    return targets


@lru_cache(maxsize=1)
def survey_rows() -> list:
    """All 8993 rows as value-name tuples in column order."""
    partial = []  # (gender, marital, time, occupation)
    for cell, size in CORE:
        gender, group, over10 = cell
        occ = _QuotaStream(_occupation_targets(cell, size))
        for marital, msize in _apportion(size, MARITAL_GROUPS[group]):
            if over10:
                time_split = [(">10 years", msize)]
            else:
                time_split = _apportion(msize, SHORT_TIME_SHARES)
            for time_value, tsize in time_split:
                for _ in range(tsize):
                    partial.append((gender, marital, time_value, next(occ)))
    assert len(partial) == TOTAL_ROWS
    edu_streams = {g: _QuotaStream(dict(EDU_TOTALS[g])) for g in GENDER}
    age_stream = _QuotaStream(dict(AGE_TOTALS))
    income_stream = _QuotaStream(dict(INCOME_TOTALS))
    rows = []
    for gender, marital, time_value, occupation in partial:
        rows.append(
            (
                next(income_stream),
                gender,
                marital,
                next(age_stream),
                edu_streams[gender].__next__(),
                occupation,
                time_value,
            )
        )
    return rows


@lru_cache(maxsize=1)
def survey_table() -> Table:
    columns = [ColumnSchema(name, values=list(values)) for name, values in COLUMNS]
    code_of = [
        {v: i for i, v in enumerate(values)} for _, values in COLUMNS
    ]
    rows = survey_rows()
    codes = np.empty((len(rows), len(COLUMNS)), dtype=np.int32)
    for r, row in enumerate(rows):
        for c, v in enumerate(row):
            codes[r, c] = code_of[c][v]
    return Table(columns, codes)


def write_survey_csv(path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([name for name, _ in COLUMNS])
        writer.writerows(survey_rows())


# expected greedy outputs (patterns as value-name dicts by column name)

ROOT_EXPANSION = [
    {"Gender": "Female"},
    {"Gender": "Male"},
    {"Gender": "Female", "Time in Bay Area": ">10 years"},
    {"Gender": "Male", "Marital status": "Never married", "Time in Bay Area": ">10 years"},
]

MALE_EXPANSION = [
    {"Gender": "Male", "Marital status": "Never married"},
    {"Gender": "Male", "Marital status": "Married"},
    {"Gender": "Male", "Time in Bay Area": ">10 years"},
]

FEMALE_EDUCATION_STAR = [
    {"Gender": "Female", "Education": "1-3 years college"},
    {"Gender": "Female", "Education": "High school"},
    {"Gender": "Female", "Education": "College graduate"},
    {"Gender": "Female", "Education": "Grades 9-11"},
]

BITS_EXPANSION = [
    {"Time in Bay Area": ">10 years"},
    {"Occupation": "Professional/Managerial"},
    {
        "Marital status": "Never married",
        "Occupation": "Student",
        "Time in Bay Area": ">10 years",
    },
    {
        "Marital status": "Married",
        "Occupation": "Professional/Managerial",
        "Time in Bay Area": ">10 years",
    },
]


def rule_of(table: Table, assignment: dict):
    from drilldown import Rule

    pat = [None] * table.num_cols
    for name, value in assignment.items():
        c = table.column_index(name)
        pat[c] = table.columns[c].values.index(value)
    return Rule(tuple(pat))
