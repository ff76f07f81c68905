import itertools

import pytest

import sqlref
from sqlsheet import algebra as ra
from sqlsheet.codegen import (
    DataError, LayoutError, decode_output, emit_plan, load_table, plan_from_workbook, run_plan,
)
from sqlsheet.evaluator import evaluate_workbook
from sqlsheet.fuzz import random_case
from sqlsheet.grid import ErrorKind, Formula
from sqlsheet.oracle import OracleError, aggregate, eval_predicate, oracle_eval, oracle_rows, relation
from sqlsheet.sql import parse_ddl, parse_sql
from sqlsheet.translate import translate

T = ra.Reference("t", 2)
U = ra.Reference("u", 1)
TV = [None, True, False]


def db_of(**tables):
    return {k: relation(v) for k, v in tables.items()}


def both(e, db, height=None):
    """Run ``e`` through the sheet and the oracle; return (sheet rows, oracle relation)."""
    height = height or max(4, ra.row_bound(e, {t: len(set(rows)) for t, rows in db.items()}))
    plan = emit_plan(e, height)
    rows = run_plan(plan, db)
    return rows, oracle_eval(e, db_of(**db))


# --- oracle ------------------------------------------------------------------------


def _pred_of(v):
    return ra.Truth(v) if v is not None else ra.Cmp("=", ra.Col(1), ra.Const(1.0))


@pytest.mark.parametrize("a,b", list(itertools.product(TV, TV)))
def test_kleene_truth_tables(a, b):
    row = (None,)  # Col(1) is NULL, so the comparison stands for UNKNOWN
    pa, pb = _pred_of(a), _pred_of(b)
    expect_and = False if False in (a, b) else (None if None in (a, b) else True)
    expect_or = True if True in (a, b) else (None if None in (a, b) else False)
    assert eval_predicate(ra.And(pa, pb), row, {}) is expect_and
    assert eval_predicate(ra.Or(pa, pb), row, {}) is expect_or
    assert eval_predicate(ra.Not(pa), row, {}) is (None if a is None else not a)


@pytest.mark.parametrize(
    "x,sub,expected",
    [
        (1.0, [], False),
        (None, [], False),
        (None, [(1.0,)], None),
        (1.0, [(1.0,), (None,)], True),
        (2.0, [(1.0,), (None,)], None),
        (2.0, [(1.0,)], False),
    ],
)
def test_in_subquery_semantics(x, sub, expected):
    p = ra.InSub(ra.Col(1), U)
    assert eval_predicate(p, (x,), db_of(u=sub)) is expected


def test_aggregates_follow_sql_null_rules():
    rows = [(1.0,), (None,), (3.0,), (3.0,)]
    assert aggregate(ra.Agg("COUNT_STAR"), rows) == 4.0
    assert aggregate(ra.Agg("COUNT", 1), rows) == 3.0
    assert aggregate(ra.Agg("SUM", 1), rows) == 7.0
    assert aggregate(ra.Agg("AVG", 1), rows) == 7.0 / 3
    assert aggregate(ra.Agg("MIN", 1), rows) == 1.0
    assert aggregate(ra.Agg("COUNT_DISTINCT", 1), rows) == 2.0
    assert aggregate(ra.Agg("SUM", 1), [(None,)]) is None


def test_sort_puts_nulls_last_both_directions():
    rows = [(2.0, "a"), (None, "b"), (1.0, "c"), (2.0, "d")]
    asc = oracle_rows(ra.Sort(T, 1), db_of(t=rows))
    desc = oracle_rows(ra.Sort(T, 1, True), db_of(t=rows))
    assert [r[0] for r in asc] == [1.0, 2.0, 2.0, None]
    assert [r[0] for r in desc] == [2.0, 2.0, 1.0, None]


def test_oracle_rejects_bad_databases():
    with pytest.raises(OracleError):
        oracle_eval(T, {})
    with pytest.raises(OracleError):
        oracle_eval(T, db_of(t=[(1.0,)]))


def test_oracle_agrees_with_independent_sql_interpreter():
    for seed in range(300):
        case = random_case(seed)
        q = parse_sql(case.sql, parse_ddl(case.ddl))
        expected = relation(sqlref.run(q, case.db))
        assert oracle_eval(translate(q), db_of(**case.db)) == expected, case.describe()


# --- code generation: per operator against the oracle ---------------------------------

DATA = {
    "t": [(1, "a"), (2, "b"), (2, "c"), (None, "d"), (3, None), (1, "a")],
    "u": [(2,), (3,), (None,), (5,)],
}

OPERATORS = [
    ra.DeDup(T),
    ra.Project(T, (2, 1)),
    ra.Project(T, (ra.Arith("*", ra.Col(1), ra.Const(2.0)), ra.Arith("/", ra.Const(1.0), ra.Arith("-", ra.Col(1), ra.Const(1.0))))),
    ra.Select(T, ra.Cmp(">", ra.Col(1), ra.Const(1.0))),
    ra.Select(T, ra.Or(ra.Cmp("=", ra.Col(2), ra.Const("a")), ra.IsNull(ra.Col(1)))),
    ra.Select(T, ra.Not(ra.InSub(ra.Col(1), U))),
    ra.Select(T, ra.InSub(ra.Col(1), U)),
    ra.Select(T, ra.Exists(ra.Select(U, ra.Cmp(">", ra.Col(1), ra.Const(4.0))))),
    ra.Select(T, ra.And(ra.Not(ra.IsNull(ra.Col(2))), ra.Truth(True))),
    ra.Semijoin(T, U, 1, 1),
    ra.EqJoin(T, T, 1, 1),
    ra.EqJoin(T, U, 1, 1),
    ra.Product(T, U),
    ra.UnionSet(ra.Project(T, (1,)), U),
    ra.DiffSet(ra.Project(T, (1,)), U),
    ra.IntersectSet(ra.Project(T, (1,)), U),
    ra.Sort(T, 1),
    ra.Sort(T, 2, True),
    ra.GroupAgg(T, (1,), (ra.Agg("COUNT_STAR"), ra.Agg("COUNT", 2), ra.Agg("COUNT_DISTINCT", 2))),
    ra.GroupAgg(ra.Reference("u", 1), (), (ra.Agg("SUM", 1), ra.Agg("AVG", 1), ra.Agg("MIN", 1), ra.Agg("MAX", 1))),
    ra.GroupAgg(T, (2,), (ra.Agg("SUM", 1), ra.Agg("MIN", 1), ra.Agg("MAX", 1), ra.Agg("AVG", 1))),
    ra.ErrorTrap(ra.Project(T, (ra.Arith("/", ra.Col(1), ra.Const(0.0)),))),
    ra.Standardize(ra.Select(T, ra.Cmp("<", ra.Col(1), ra.Const(3.0)))),
]


@pytest.mark.parametrize("e", OPERATORS, ids=lambda e: ra.compact(e)[:60])
def test_operator_matches_oracle(e):
    rows, expected = both(e, DATA)
    assert relation(rows) == expected
    if isinstance(e, ra.Sort):
        assert [r[e.col - 1] for r in rows] == [r[e.col - 1] for r in oracle_rows(e, db_of(**DATA))]


@pytest.mark.parametrize("e", OPERATORS[:12], ids=lambda e: ra.compact(e)[:60])
def test_operator_on_empty_inputs(e):
    rows, expected = both(e, {"t": [], "u": []})
    assert relation(rows) == expected


def test_group_without_keys_on_empty_input_is_empty():
    e = ra.GroupAgg(U, (), (ra.Agg("COUNT_STAR"),))
    rows, expected = both(e, {"u": []})
    assert rows == [] and expected == frozenset()


def test_full_height_inputs():
    full = [(float(i), "x" if i % 2 else "y") for i in range(8)]
    rows, expected = both(ra.Sort(ra.DeDup(T), 1, True), {"t": full}, height=8)
    assert relation(rows) == expected and len(rows) == 8


# --- code generation: structure ---------------------------------------------------------


def _connections_plan(height=10):
    s = parse_ddl("CREATE TABLE connections (departure text, arrival text, price int);")
    q = parse_sql(
        "SELECT c1.departure, c2.arrival FROM connections c1 JOIN connections c2 ON c1.arrival = c2.departure "
        "EXCEPT SELECT departure, arrival FROM connections", s)
    return emit_plan(translate(q), height, {"connections": s[0].columns}, q.output_names)


def test_two_row_pattern_shares_formula_objects():
    plan = _connections_plan()
    wb = plan.workbook
    for c in range(4, wb.used_columns + 1):
        body = [wb.cells.get((r, c)) for r in range(2, wb.height + 1)]
        formulas = [x for x in body if x is not None]
        assert len({id(x) for x in formulas}) <= 1, f"column {c}"


def test_layout_inputs_left_outputs_right_intermediates_hidden():
    plan = _connections_plan()
    wb = plan.workbook
    assert plan.inputs == {"connections": (1, 3)}
    assert plan.output_cols == [wb.used_columns - 1, wb.used_columns]
    assert wb.hidden_columns == set(range(4, wb.used_columns - 1))
    assert all((1, c) in wb.comments for c in range(1, wb.used_columns + 1))
    assert "EqJoin" in " ".join(wb.comments.values())


def test_every_input_cell_defaults_to_no_data():
    plan = _connections_plan(5)
    for r in range(1, 6):
        for c in range(1, 4):
            cell = plan.workbook.cells[(r, c)]
            assert isinstance(cell, Formula)


def test_capacity_check_refuses_overflowing_inputs():
    plan = emit_plan(ra.Product(T, U), 6)
    with pytest.raises(DataError):
        run_plan(plan, {"t": [(1, "a"), (2, "b")], "u": [(1,), (2,), (3,), (4,)]})
    assert len(run_plan(plan, {"t": [(1, "a"), (2, "b")], "u": [(1,), (2,), (3,)]})) == 6


def test_layout_error_when_columns_run_out():
    with pytest.raises(LayoutError):
        emit_plan(ra.EqJoin(T, T, 1, 1), 8, max_col=10)


def test_load_table_checks_arity_and_capacity():
    plan = emit_plan(ra.DeDup(T), 3)
    with pytest.raises(DataError):
        load_table(plan, "t", [(1, 2, 3)])
    with pytest.raises(DataError):
        load_table(plan, "t", [(i, "x") for i in range(4)])
    with pytest.raises(DataError):
        load_table(plan, "nope", [])


def test_decode_maps_value_errors_to_null_and_drops_na_rows():
    plan = emit_plan(ra.Project(T, (1, 2)), 4)
    load_table(plan, "t", [(None, "a"), (1, None)])
    state = evaluate_workbook(plan.workbook)
    assert state.get(1, plan.output_cols[0]) is ErrorKind.VALUE
    assert state.get(3, plan.output_cols[0]) is ErrorKind.NA
    assert sorted(decode_output(state, plan), key=repr) == [(1.0, None), (None, "a")]


def test_output_is_standard_form():
    plan = emit_plan(ra.Select(T, ra.Cmp("=", ra.Col(2), ra.Const("b"))), 6)
    load_table(plan, "t", [(1, "a"), (2, "b"), (3, "a"), (4, "b")])
    state = evaluate_workbook(plan.workbook)
    col = [state.get(r, plan.output_cols[0]) for r in range(1, 7)]
    assert col == [2.0, 4.0] + [ErrorKind.NA] * 4


def test_plan_metadata_round_trip():
    plan = _connections_plan()
    again = plan_from_workbook(plan.workbook)
    assert again.inputs == plan.inputs and again.output_cols == plan.output_cols
    assert again.output_names == ["departure", "arrival"]
