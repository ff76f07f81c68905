"""Naive set-semantics evaluator for the RA IR with SQL three-valued logic.

Relations are frozensets of tuples whose cells are ``float``, ``str``,
``bool`` or ``None`` (SQL NULL). This is the ground truth the generated
worksheets are checked against.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Mapping, Optional

from .algebra import (
    Agg, And, Arith, Cmp, Col, Const, DeDup, DiffSet, EqJoin, ErrorTrap, Exists, GroupAgg,
    InSub, IntersectSet, IsNull, Not, Or, Predicate, Product, Project, RAExpr, Reference,
    Scalar, Select, Semijoin, Sort, Standardize, Truth, UnionSet, arity,
)

Value = Optional[object]
Row = tuple
Relation = frozenset

UNKNOWN = None  # third truth value


class OracleError(ValueError):
    """Unknown table or a table whose arity disagrees with the expression."""


def relation(rows: Iterable[Iterable[object]]) -> Relation:
    """Build a relation, normalising ints to floats."""
    return frozenset(tuple(_norm(v) for v in row) for row in rows)


def _norm(v: object) -> Value:
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, (int, float)):
        return float(v)
    raise TypeError(f"not a relational value: {v!r}")


# --- value semantics -----------------------------------------------------

_RANK = {float: 0, str: 1, bool: 2}


def compare(a: Value, b: Value) -> int | None:
    """Three-way comparison; ``None`` if either side is NULL."""
    if a is None or b is None:
        return None
    ra, rb = _RANK[type(a)], _RANK[type(b)]
    if ra != rb:
        return -1 if ra < rb else 1
    return (a > b) - (a < b)


def sort_key(v: Value) -> tuple:
    """Total order used by Sort: values by type then value, NULLs last."""
    if v is None:
        return (1, 0, 0)
    return (0, _RANK[type(v)], v)


_TESTS = {
    "=": lambda k: k == 0,
    "<>": lambda k: k != 0,
    "<": lambda k: k < 0,
    "<=": lambda k: k <= 0,
    ">": lambda k: k > 0,
    ">=": lambda k: k >= 0,
}


def eval_scalar(s: Scalar, row: Row) -> Value:
    if isinstance(s, Col):
        return row[s.index - 1]
    if isinstance(s, Const):
        return _norm(s.value)
    a = _numeric(eval_scalar(s.left, row))
    b = _numeric(eval_scalar(s.right, row))
    if a is None or b is None:
        return None
    if s.op == "+":
        out = a + b
    elif s.op == "-":
        out = a - b
    elif s.op == "*":
        out = a * b
    elif b == 0:
        return None  # division by zero reads back as NULL
    else:
        out = a / b
    return out if math.isfinite(out) else None


def _numeric(v: Value) -> float | None:
    if isinstance(v, bool):
        return 1.0 if v else 0.0
    if isinstance(v, float):
        return v
    return None  # NULL or text: arithmetic yields NULL


def eval_predicate(p: Predicate, row: Row, db: Mapping[str, Relation]) -> bool | None:
    if isinstance(p, Cmp):
        k = compare(eval_scalar(p.left, row), eval_scalar(p.right, row))
        return None if k is None else _TESTS[p.op](k)
    if isinstance(p, And):
        a = eval_predicate(p.left, row, db)
        if a is False:
            return False
        b = eval_predicate(p.right, row, db)
        if b is False:
            return False
        return True if a and b else UNKNOWN
    if isinstance(p, Or):
        a = eval_predicate(p.left, row, db)
        if a is True:
            return True
        b = eval_predicate(p.right, row, db)
        if b is True:
            return True
        return False if a is False and b is False else UNKNOWN
    if isinstance(p, Not):
        a = eval_predicate(p.operand, row, db)
        return None if a is None else not a
    if isinstance(p, IsNull):
        return eval_scalar(p.operand, row) is None
    if isinstance(p, InSub):
        x = eval_scalar(p.operand, row)
        values = [r[0] for r in oracle_eval(p.sub, db)]
        if not values:
            return False
        if x is None:
            return UNKNOWN
        if any(compare(x, v) == 0 for v in values if v is not None):
            return True
        return UNKNOWN if any(v is None for v in values) else False
    if isinstance(p, Exists):
        return bool(oracle_eval(p.sub, db))
    if isinstance(p, Truth):
        return p.value
    raise TypeError(f"not a predicate: {p!r}")


# --- operators -----------------------------------------------------------


def oracle_eval(e: RAExpr, db: Mapping[str, Relation]) -> Relation:
    return frozenset(_eval(e, db))


def oracle_rows(e: RAExpr, db: Mapping[str, Relation]) -> list[Row]:
    """Evaluate with a deterministic row order (only meaningful under Sort)."""
    return _eval(e, db)


def _eval(e: RAExpr, db: Mapping[str, Relation]) -> list[Row]:
    t = type(e)
    if t is Reference:
        if e.table not in db:
            raise OracleError(f"unknown table {e.table}")
        rows = sorted(db[e.table], key=lambda r: tuple(map(sort_key, r)))
        for r in rows:
            if len(r) != e.width:
                raise OracleError(f"table {e.table} has arity {len(r)}, expected {e.width}")
        return rows
    if t is Project:
        items = [Col(i) if isinstance(i, int) else i for i in e.items]
        return _distinct(tuple(eval_scalar(s, r) for s in items) for r in _eval(e.child, db))
    if t is Select:
        return [r for r in _eval(e.child, db) if eval_predicate(e.predicate, r, db) is True]
    if t is EqJoin:
        right = _eval(e.right, db)
        out = []
        for l in _eval(e.left, db):
            for r in right:
                if compare(l[e.left_col - 1], r[e.right_col - 1]) == 0:
                    rest_l = l[: e.left_col - 1] + l[e.left_col:]
                    rest_r = r[: e.right_col - 1] + r[e.right_col:]
                    out.append((l[e.left_col - 1],) + rest_l + rest_r)
        return _distinct(out)
    if t is Semijoin:
        keys = [r[e.right_col - 1] for r in _eval(e.right, db)]
        return [l for l in _eval(e.left, db) if any(compare(l[e.left_col - 1], k) == 0 for k in keys)]
    if t is Product:
        right = _eval(e.right, db)
        return _distinct(l + r for l in _eval(e.left, db) for r in right)
    if t is UnionSet:
        return _distinct(_eval(e.left, db) + _eval(e.right, db))
    if t is DiffSet:
        right = set(_eval(e.right, db))
        return _distinct(r for r in _eval(e.left, db) if r not in right)
    if t is IntersectSet:
        right = set(_eval(e.right, db))
        return _distinct(r for r in _eval(e.left, db) if r in right)
    if t in (DeDup, Standardize, ErrorTrap):
        return _distinct(_eval(e.child, db))
    if t is Sort:
        rows = _eval(e.child, db)
        if e.descending:
            return _sort_desc(rows, e.col)
        return sorted(rows, key=lambda r: sort_key(r[e.col - 1]))
    if t is GroupAgg:
        return _group(e, _eval(e.child, db))
    raise TypeError(f"not an RA expression: {e!r}")


def _sort_desc(rows: list[Row], col: int) -> list[Row]:
    # Stable descending order with NULLs still last.
    data = [r for r in rows if r[col - 1] is not None]
    nulls = [r for r in rows if r[col - 1] is None]
    data.sort(key=lambda r: sort_key(r[col - 1])[1:], reverse=True)  # reverse sorts stay stable
    return data + nulls


def _distinct(rows: Iterable[Row]) -> list[Row]:
    return list(dict.fromkeys(rows))


def _group(e: GroupAgg, rows: list[Row]) -> list[Row]:
    groups: dict[tuple, list[Row]] = {}
    for r in rows:
        groups.setdefault(tuple(r[c - 1] for c in e.group), []).append(r)
    return [key + tuple(aggregate(a, members) for a in e.aggs) for key, members in groups.items()]


def aggregate(a: Agg, rows: list[Row]) -> Value:
    if a.op == "COUNT_STAR":
        return float(len(rows))
    vals = [r[a.col - 1] for r in rows if r[a.col - 1] is not None]
    if a.op == "COUNT":
        return float(len(vals))
    if a.op == "COUNT_DISTINCT":
        return float(len(Counter(vals)))
    if not vals:
        return None
    if a.op == "SUM":
        return _sum(vals)
    if a.op == "AVG":
        s = _sum(vals)
        return None if s is None else s / len(vals)
    best = vals[0]
    for v in vals[1:]:
        k = compare(v, best)
        if (a.op == "MIN" and k < 0) or (a.op == "MAX" and k > 0):
            best = v
    return best


def _sum(vals: list[Value]) -> float | None:
    total = 0.0
    for v in vals:
        if isinstance(v, float):
            total += v
    return total if math.isfinite(total) else None


def check_database(e: RAExpr, db: Mapping[str, Relation]) -> None:
    from .algebra import tables

    for ref in tables(e):
        if ref.table not in db:
            raise OracleError(f"unknown table {ref.table}")
        for r in db[ref.table]:
            if len(r) != ref.width:
                raise OracleError(f"table {ref.table} has arity {len(r)}, expected {ref.width}")


__all__ = [
    "OracleError", "Relation", "aggregate", "arity", "check_database", "compare",
    "eval_predicate", "eval_scalar", "oracle_eval", "oracle_rows", "relation", "sort_key",
]
