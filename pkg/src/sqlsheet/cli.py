"""Command-line interface: compile, explain, run, verify, gen.

Exit codes: 0 success, 1 internal error, 2 user or input error, 3 verification mismatch.
Results go to standard output, diagnostics to standard error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import algebra as ra
from .codegen import (
    DataError, LayoutError, WorksheetPlan, check_capacity, decode_output, emit_plan, input_column_names, plan_from_workbook,
)
from .evaluator import CircularReference, evaluate_workbook
from .formula import FormulaSyntaxError, NotationStyle, RenderError, UnknownFunction
from .fuzz import verify
from .grid import BoundsError, Workbook, column_letters
from .sheetio import GridFormatError, load_csv, parse_csv, read_grid, write_grid, write_xlsx
from .special import bfs_levels, dfs_order, gen_bfs, gen_dfs, gen_merge_sort, load_sort_input, merge_sort
from .sql import SqlError, parse_ddl, parse_sql
from .translate import translate

EXIT_OK, EXIT_INTERNAL, EXIT_USER, EXIT_MISMATCH = 0, 1, 2, 3

USER_ERRORS = (
    SqlError, DataError, LayoutError, BoundsError, GridFormatError, FormulaSyntaxError, UnknownFunction,
    RenderError, CircularReference, OSError,
)


class UsageError(Exception):
    """Bad command-line input detected after argument parsing."""


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _locate(text: str, pos: int) -> str:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return f"line {line}, column {col}"


def _compile(args) -> tuple[WorksheetPlan, ra.RAExpr, dict]:
    ddl_text = Path(args.ddl).read_text(encoding="utf-8")
    sql_text = Path(args.sql).read_text(encoding="utf-8")
    try:
        schemas = parse_ddl(ddl_text)
    except SqlError as exc:
        raise SqlError(f"{args.ddl}: {_where(exc, ddl_text)}") from None
    try:
        q = parse_sql(sql_text, schemas)
        e = translate(q)
    except SqlError as exc:
        raise SqlError(f"{args.sql}: {_where(exc, sql_text)}") from None
    names = {s.name: list(s.columns) for s in schemas}
    plan = emit_plan(e, args.rows, names, q.output_names)
    return plan, e, names


def _where(exc: SqlError, text: str) -> str:
    return exc.message if exc.pos is None else f"{_locate(text, exc.pos)}: {exc.message}"


def _write(wb: Workbook, out: str, notation: str) -> None:
    if out.lower().endswith(".xlsx"):
        write_xlsx(wb, out)
    elif out.lower().endswith(".grid"):
        write_grid(wb, out, NotationStyle[notation.upper()])
    else:
        raise UsageError(f"--out must end in .xlsx or .grid: {out}")


def cmd_compile(args) -> int:
    plan, _, _ = _compile(args)
    _write(plan.workbook, args.out, args.notation)
    first, last = plan.output_cols[0], plan.output_cols[-1]
    print(f"wrote {args.out}: {plan.height} rows, {plan.width} columns "
          f"({len(plan.blocks)} blocks), output columns {column_letters(first)}:{column_letters(last)}")
    return EXIT_OK


def cmd_explain(args) -> int:
    ddl_text = Path(args.ddl).read_text(encoding="utf-8")
    sql_text = Path(args.sql).read_text(encoding="utf-8")
    q = parse_sql(sql_text, parse_ddl(ddl_text))
    print(ra.pretty_print(translate(q)))
    return EXIT_OK


def _data_args(pairs: Sequence[str]) -> dict[str, str]:
    out = {}
    for p in pairs:
        table, sep, path = p.partition("=")
        if not sep or not table or not path:
            raise UsageError(f"--data expects table=path.csv, got {p!r}")
        out[table.lower()] = path
    return out


def cmd_run(args) -> int:
    if args.plan:
        plan = plan_from_workbook(read_grid(args.plan))
        names = input_column_names(plan)
    elif args.sql and args.ddl:
        plan, _, names = _compile(args)
    else:
        raise UsageError("run needs --plan FILE.grid or both --sql and --ddl")
    data = _data_args(args.data)
    for table in data:
        if table not in plan.inputs:
            raise UsageError(f"plan has no input table {table!r} (inputs: {', '.join(plan.inputs) or 'none'})")
    header = {"auto": "auto", "yes": True, "no": False}[args.header]
    sizes = {}
    for table in plan.inputs:
        if table in data:
            sizes[table] = load_csv(data[table], plan, table, names.get(table, ()), header)
        else:
            sizes[table] = load_csv("", plan, table, is_text=True)
    check_capacity(plan, sizes)
    started = time.perf_counter()
    rows = decode_output(evaluate_workbook(plan.workbook), plan)
    if args.names and plan.output_names:
        print("\t".join(plan.output_names))
    for row in rows:
        print("\t".join(_show(v) for v in row))
    _err(f"{len(rows)} rows in {time.perf_counter() - started:.3f}s")
    return EXIT_OK


def _show(v: object) -> str:
    if v is None:
        return "NULL"
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def cmd_verify(args) -> int:
    started = time.perf_counter()
    report = verify(args.cases, args.seed, args.rows)
    elapsed = time.perf_counter() - started
    passed = report.checked - len(report.failures)
    print(f"{passed}/{report.checked} cases passed (seed {args.seed}, H={args.rows}, "
          f"{report.skipped} skipped for size) in {elapsed:.1f}s")
    if report.ok:
        return EXIT_OK
    out = report.failures[0]
    _err("counterexample (minimized):")
    _err(out.case.describe())
    _err(f"-- oracle: {sorted(out.expected, key=repr)}")
    _err(f"-- sheet:  {sorted(out.actual, key=repr)}")
    return EXIT_MISMATCH


def _edges(path: str) -> list[tuple]:
    rows = parse_csv(Path(path).read_text(encoding="utf-8"))
    if rows and all(isinstance(v, str) for v in rows[0]) and [str(v).lower() for v in rows[0]] in (
        ["from", "to"], ["source", "target"], ["src", "dst"],
    ):
        rows = rows[1:]
    for i, r in enumerate(rows, 1):
        if len(r) != 2 or None in r:
            raise DataError(f"{path}: edge row {i} must have exactly two non-empty fields")
    return [tuple(r) for r in rows]


def _vertex(text: str, edges: list[tuple]) -> object:
    try:
        num = float(text)
    except ValueError:
        return text
    return num if any(isinstance(v, float) for e in edges for v in e) else text


def cmd_gen(args) -> int:
    if args.algorithm == "sort":
        values = None
        if args.values:
            values = [r[0] for r in parse_csv(Path(args.values).read_text(encoding="utf-8"))]
            if any(not isinstance(v, float) for v in values):
                raise DataError(f"{args.values}: sort input must be one number per line")
        n = args.n if args.n is not None else (len(values) if values is not None else None)
        if n is None:
            raise UsageError("gen sort needs --n or --values")
        plan = gen_merge_sort(n, args.layout)
        if values is not None:
            load_sort_input(plan, values)
            for v in merge_sort(values, args.layout):
                print(_show(v))
        if args.out:
            _write(plan.workbook, args.out, args.notation)
        _err(f"{plan.levels} merge levels, {plan.generated_columns} generated columns ({args.layout})")
        return EXIT_OK
    if not args.edges or args.start is None:
        raise UsageError(f"gen {args.algorithm} needs --edges and --start")
    edges = _edges(args.edges)
    start = _vertex(args.start, edges)
    if args.algorithm == "bfs":
        graph = gen_bfs(edges, start)
        for v, level in bfs_levels(edges, start):
            print(f"{_show(v)}\t{_show(level)}")
    else:
        graph = gen_dfs(edges, start)
        for v in dfs_order(edges, start):
            print(_show(v))
    if args.out:
        _write(graph.workbook, args.out, args.notation)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sqlsheet", description="Compile SQL queries into spreadsheet formulas.")
    sub = p.add_subparsers(dest="command", required=True)

    def sql_args(sp, rows: int) -> None:
        sp.add_argument("--sql", required=True, help="file with one SELECT query")
        sp.add_argument("--ddl", required=True, help="file with CREATE TABLE statements")
        sp.add_argument("--rows", type=int, default=rows, help=f"sheet height H (default {rows})")

    c = sub.add_parser("compile", help="compile a query into a .xlsx or .grid workbook")
    sql_args(c, 256)
    c.add_argument("--out", required=True, help="output path (.xlsx or .grid)")
    c.add_argument("--notation", choices=["a1", "r1c1"], default="r1c1", help="formula notation in .grid output")
    c.set_defaults(func=cmd_compile)

    e = sub.add_parser("explain", help="print the relational algebra plan")
    e.add_argument("--sql", required=True)
    e.add_argument("--ddl", required=True)
    e.set_defaults(func=cmd_explain)

    r = sub.add_parser("run", help="evaluate a plan on CSV data and print the result as TSV")
    r.add_argument("--plan", help="compiled .grid plan")
    r.add_argument("--sql")
    r.add_argument("--ddl")
    r.add_argument("--rows", type=int, default=256)
    r.add_argument("--data", action="append", default=[], metavar="TABLE=CSV", help="input table (repeatable)")
    r.add_argument("--header", choices=["auto", "yes", "no"], default="auto", help="CSV header row handling")
    r.add_argument("--names", action="store_true", help="print a header line with output column names")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="differential test against the relational oracle")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cases", type=int, default=100)
    v.add_argument("--rows", type=int, default=64)
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="generate a merge-sort, BFS or DFS worksheet")
    g.add_argument("algorithm", choices=["sort", "bfs", "dfs"])
    g.add_argument("--n", type=int, help="number of items to sort")
    g.add_argument("--values", help="CSV with one number per line to sort")
    g.add_argument("--layout", choices=["expanded", "condensed"], default="expanded")
    g.add_argument("--edges", help="CSV of directed edges (from,to)")
    g.add_argument("--start", help="start vertex")
    g.add_argument("--out", help="output path (.xlsx or .grid)")
    g.add_argument("--notation", choices=["a1", "r1c1"], default="r1c1")
    g.set_defaults(func=cmd_gen)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, *USER_ERRORS) as exc:
        _err(f"error: {exc}")
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001 - last-resort report
        _err(f"internal error: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
