"""Compile SQL queries into spreadsheet formulas.

Pipeline: :func:`parse_sql` -> :func:`translate` (relational algebra) ->
:func:`emit_plan` (worksheet of formulas) -> :func:`evaluate_workbook`.
:func:`oracle_eval` evaluates the algebra directly and is the reference the
generated worksheets are checked against.
"""

from .algebra import pretty_print
from .codegen import WorksheetPlan, decode_output, emit_plan, load_table, run_plan
from .evaluator import CircularReference, evaluate_formula, evaluate_workbook
from .formula import parse_formula, render
from .grid import ErrorKind, Workbook
from .oracle import oracle_eval, relation
from .sql import parse_ddl, parse_sql
from .translate import translate

__version__ = "0.1.0"

__all__ = [
    "CircularReference", "ErrorKind", "Workbook", "WorksheetPlan", "decode_output", "emit_plan",
    "evaluate_formula", "evaluate_workbook", "load_table", "oracle_eval", "parse_ddl", "parse_formula",
    "parse_sql", "pretty_print", "relation", "render", "run_plan", "translate",
]
