"""Command line driver: ingest, summarize, replay, bench, serve."""

from __future__ import annotations

import argparse
import csv
import json
import shlex
import sys
import time

import numpy as np

from .brs import best_rule_set, estimate_mw
from .rules import Rule, RuleError, WeightConfig, rule_to_text
from .sampler import create_pass
from .session import Session, SessionConfig, SessionError
from .table import Table, TableError, load_dataset


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("dataset", help="CSV file to load")
    p.add_argument("--schema", help="sidecar schema file (key = value lines)")
    p.add_argument("--cols", type=int, help="restrict to the first N columns")
    p.add_argument("--na-policy", choices=["keep", "drop"], default="keep")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--measure", action="append", default=[], help="declare a measure column")


def _add_engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=4)
    p.add_argument(
        "--weight",
        choices=["size", "bits", "size-minus-one", "parametric"],
        default="size",
    )
    p.add_argument("--mw", default="auto", help="max-weight cap, a number or 'auto'")
    p.add_argument("--minss", type=int, default=5000)
    p.add_argument("--mem", type=int, default=50000)
    p.add_argument("--sum", metavar="COL", help="aggregate a measure column instead of counting")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", choices=["table", "json", "csv"], default="table")
    p.add_argument("--time-limit", type=float, default=5.0)
    p.add_argument(
        "--col-weight",
        action="append",
        default=[],
        metavar="NAME=W",
        help="parametric per-column weight (repeatable)",
    )
    p.add_argument("--exponent", type=float, default=1.0)
    p.add_argument("--favor", action="append", default=[], metavar="NAME=MULT")
    p.add_argument("--ignore", action="append", default=[], metavar="NAME")


def _load_table(args) -> Table:
    table = load_dataset(
        args.dataset,
        schema_path=args.schema,
        header=not args.no_header,
        measure_columns=args.measure,
        na_policy=args.na_policy,
        delimiter=args.delimiter,
    )
    if args.cols:
        table = table.restrict_columns(args.cols)
    return table


def _weight_config(args) -> WeightConfig:
    favored = {}
    for item in args.favor:
        name, mult = item.rsplit("=", 1)
        favored[name] = float(mult)
    kwargs = {"favored": favored, "ignored": frozenset(args.ignore)}
    if args.weight == "parametric":
        weights = {}
        for item in args.col_weight:
            name, w = item.rsplit("=", 1)
            weights[name] = float(w)
        return WeightConfig.parametric(weights, args.exponent, **kwargs)
    return WeightConfig(kind=args.weight, **kwargs)


def _aggregate(args):
    return ("sum", args.sum) if args.sum else "count"


def _resolve_mw(args, table, config) -> float:
    if args.mw == "auto":
        return estimate_mw(table, config, args.k, seed=args.seed)
    return float(args.mw)


def _format_rules(table: Table, scored, aggregate, out: str, file) -> None:
    agg_name = "Sum" if aggregate != "count" else "Count"
    header = [c.name for c in table.columns] + [agg_name, "Weight"]
    rows = []
    for s in scored:
        cells = [
            "*" if v is None else str(table.columns[c].values[v])
            for c, v in enumerate(s.rule.pattern)
        ]
        value = s.sum if (aggregate != "count" and s.sum is not None) else s.count
        rows.append(cells + [_fmt_num(value), _fmt_num(s.weight)])
    if out == "json":
        json.dump(
            [
                {
                    "rule": rule_to_text(s.rule, table),
                    "count": s.count,
                    "sum": s.sum,
                    "weight": s.weight,
                    "marginal": s.marginal_count,
                }
                for s in scored
            ],
            file,
            indent=2,
        )
        file.write("\n")
    elif out == "csv":
        w = csv.writer(file)
        w.writerow(header)
        w.writerows(rows)
    else:
        _print_aligned([header] + rows, file)


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.2f}"


def _print_aligned(rows, file) -> None:
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        file.write("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")


def cmd_ingest(args) -> int:
    table = _load_table(args)
    info = {
        "rows": table.num_rows,
        "columns": [
            {"name": c.name, "kind": c.kind, "distinct": c.distinct_count}
            for c in table.columns
        ],
        "measures": list(table.measures),
    }
    json.dump(info, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_summarize(args) -> int:
    table = _load_table(args)
    config = _weight_config(args)
    aggregate = _aggregate(args)
    if aggregate != "count":
        if args.sum not in table.measures:
            raise TableError(f"unknown measure column {args.sum!r}")
        if np.any(table.measures[args.sum] < 0):
            raise TableError("sum aggregation requires non-negative measure values")
    m_w = _resolve_mw(args, table, config)
    result = best_rule_set(
        table, config, args.k, m_w, time_limit=args.time_limit, aggregate=aggregate
    )
    _format_rules(table, result, aggregate, args.out, sys.stdout)
    return 0


def cmd_replay(args) -> int:
    table = _load_table(args)
    config = _weight_config(args)
    session = Session(
        table,
        SessionConfig(
            k=args.k,
            m_w=None if args.mw == "auto" else float(args.mw),
            min_ss=min(args.minss, max(1, table.num_rows or args.minss)),
            memory=args.mem,
            weight=config,
            aggregate=_aggregate(args),
            time_limit=args.time_limit,
            seed=args.seed,
        ),
    )
    if args.script == "-":
        lines = sys.stdin.read().splitlines()
    else:
        with open(args.script, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    for ln, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            tokens = shlex.split(line)
            gesture = tokens[0]
            if gesture == "expand" and len(tokens) == 2:
                session.expand(session.node_by_text(tokens[1]).rule)
            elif gesture == "star" and len(tokens) == 3:
                session.expand_star(session.node_by_text(tokens[1]).rule, tokens[2])
            elif gesture == "collapse" and len(tokens) == 2:
                session.collapse(session.node_by_text(tokens[1]).rule)
            elif gesture == "drill" and len(tokens) == 3:
                session.emulate_regular_drilldown(
                    session.node_by_text(tokens[1]).rule, tokens[2]
                )
            else:
                raise SessionError("bad_gesture", f"cannot parse gesture {line!r}")
        except (SessionError, RuleError, TableError, ValueError) as e:
            sys.stderr.write(f"{args.script}:{ln}: {e}\n")
            return 1
    session.wait_for_prefetch()
    json.dump(session.serialize(), sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_bench(args) -> int:
    table = _load_table(args)
    config = _weight_config(args)
    values = [int(v) for v in args.values.split(",")]
    writer = csv.writer(sys.stdout)
    writer.writerow(["param", "value", "mean_seconds", "mean_pct_error", "mean_wrong_rules"])
    exact = best_rule_set(
        table, config, args.k, config.max_weight(table), time_limit=None
    )
    exact_rules = {s.rule: s.count for s in exact}
    for value in values:
        seconds = []
        errors = []
        wrong = []
        for trial in range(args.trials):
            if args.sweep == "mw":
                started = time.perf_counter()
                result = best_rule_set(table, config, args.k, float(value), time_limit=None)
                seconds.append(time.perf_counter() - started)
                displayed = {s.rule: s.count for s in result}
            else:
                min_ss = min(value, table.num_rows)
                plan = {Rule.trivial(table.num_cols): min_ss}
                samples, _ = create_pass(table, plan, seed=args.seed + trial * 7919 + value)
                sample = samples[Rule.trivial(table.num_cols)]
                started = time.perf_counter()
                result = best_rule_set(
                    sample.as_view(),
                    config,
                    args.k,
                    _resolve_mw(args, table, config),
                    time_limit=None,
                )
                seconds.append(time.perf_counter() - started)
                displayed = {s.rule: s.count for s in result}
            pct = [
                100.0 * abs(est - exact_rules[r]) / exact_rules[r]
                for r, est in displayed.items()
                if r in exact_rules and exact_rules[r] > 0
            ]
            errors.append(sum(pct) / len(pct) if pct else 0.0)
            wrong.append(len(set(displayed) - set(exact_rules)))
        writer.writerow(
            [
                args.sweep,
                value,
                f"{sum(seconds) / len(seconds):.4f}",
                f"{sum(errors) / len(errors):.3f}",
                f"{sum(wrong) / len(wrong):.2f}",
            ]
        )
    return 0


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    config = ServiceConfig.load(args.config)
    if args.port:
        config.port = args.port
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drilldown")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a dataset and print its schema")
    _add_dataset_args(p)
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("summarize", help="one-shot best rule list")
    _add_dataset_args(p)
    _add_engine_args(p)
    p.set_defaults(fn=cmd_summarize)

    p = sub.add_parser("replay", help="run a gesture script against a fresh session")
    _add_dataset_args(p)
    _add_engine_args(p)
    p.add_argument("script", help="gesture file: expand/star/collapse lines, '-' for stdin")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("bench", help="sweep m_w or minSS and emit timing/error CSV")
    _add_dataset_args(p)
    _add_engine_args(p)
    p.add_argument("--sweep", choices=["mw", "minss"], required=True)
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.add_argument("--trials", type=int, default=10)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--port", type=int)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (TableError, RuleError, SessionError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
