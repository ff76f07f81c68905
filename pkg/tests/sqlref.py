"""Reference SQL interpreter over the parsed AST (no relational algebra involved).

Set semantics at every query result, SQL three-valued logic, SQL aggregate
NULL rules. An aggregate query without GROUP BY over zero rows yields no
rows (the convention the compiler follows).
"""

from __future__ import annotations

import itertools
import math

from sqlsheet.sql import (
    AggCall, BinOp, BoolOp, ColumnRef, Comparison, ExistsExpr, InExpr, IsNullExpr, Literal, NotExpr, Query,
    SelectCore, SetQuery,
)

_RANK = {float: 0, str: 1, bool: 2}


def _norm(v):
    if isinstance(v, int) and not isinstance(v, bool):
        return float(v)
    return v


def cmp(a, b):
    if a is None or b is None:
        return None
    if _RANK[type(a)] != _RANK[type(b)]:
        return -1 if _RANK[type(a)] < _RANK[type(b)] else 1
    return (a > b) - (a < b)


def _num(v):
    if isinstance(v, bool):
        return float(v)
    return v if isinstance(v, float) else None


def scalar(e, env, db):
    if isinstance(e, ColumnRef):
        return env[e.item][e.ordinal - 1]
    if isinstance(e, Literal):
        return _norm(e.value)
    if isinstance(e, BinOp):
        a, b = _num(scalar(e.left, env, db)), _num(scalar(e.right, env, db))
        if a is None or b is None:
            return None
        if e.op == "/":
            if b == 0:
                return None
            out = a / b
        else:
            out = {"+": a + b, "-": a - b, "*": a * b}[e.op]
        return out if math.isfinite(out) else None
    raise TypeError(e)


def truth(e, env, db):
    if isinstance(e, Comparison):
        k = cmp(scalar(e.left, env, db), scalar(e.right, env, db))
        if k is None:
            return None
        return {"=": k == 0, "<>": k != 0, "<": k < 0, "<=": k <= 0, ">": k > 0, ">=": k >= 0}[e.op]
    if isinstance(e, BoolOp):
        a, b = truth(e.left, env, db), truth(e.right, env, db)
        if e.op == "AND":
            if a is False or b is False:
                return False
            return True if a and b else None
        if a is True or b is True:
            return True
        return False if a is False and b is False else None
    if isinstance(e, NotExpr):
        a = truth(e.operand, env, db)
        return None if a is None else not a
    if isinstance(e, IsNullExpr):
        isnull = scalar(e.operand, env, db) is None
        return not isnull if e.negated else isnull
    if isinstance(e, InExpr):
        x = scalar(e.operand, env, db)
        vals = [r[0] for r in run(e.query, db)]
        if not vals:
            out = False
        elif x is None:
            out = None
        elif any(cmp(x, v) == 0 for v in vals if v is not None):
            out = True
        else:
            out = None if any(v is None for v in vals) else False
        if e.negated and out is not None:
            out = not out
        return out
    if isinstance(e, ExistsExpr):
        return bool(run(e.query, db))
    if isinstance(e, Literal) and isinstance(e.value, bool):
        return e.value
    raise TypeError(e)


def _has_agg(e):
    if isinstance(e, AggCall):
        return True
    if isinstance(e, BinOp):
        return _has_agg(e.left) or _has_agg(e.right)
    return False


def _agg(e: AggCall, envs, db):
    if e.arg is None:
        return float(len(envs))
    vals = [v for v in (scalar(e.arg, env, db) for env in envs) if v is not None]
    if e.distinct:
        vals = list(dict.fromkeys(vals))
    if e.func == "COUNT":
        return float(len(vals))
    if not vals:
        return None
    if e.func == "SUM":
        return float(sum(v for v in vals if isinstance(v, float)))
    if e.func == "AVG":
        return float(sum(v for v in vals if isinstance(v, float))) / len(vals)
    best = vals[0]
    for v in vals[1:]:
        k = cmp(v, best)
        if (e.func == "MIN" and k < 0) or (e.func == "MAX" and k > 0):
            best = v
    return best


def _group_value(e, envs, db):
    if isinstance(e, AggCall):
        return _agg(e, envs, db)
    if isinstance(e, BinOp):
        a, b = _num(_group_value(e.left, envs, db)), _num(_group_value(e.right, envs, db))
        return scalar(BinOp(e.op, Literal(a), Literal(b)), [], db) if a is not None and b is not None else None
    return scalar(e, envs[0], db)


def core(c: SelectCore, db):
    tables = [[tuple(_norm(v) for v in r) for r in db[f.table.name]] for f in c.from_items]
    envs = []
    for combo in itertools.product(*tables):
        env = list(combo)
        if all(cond is None or truth(cond, env, db) is True for cond in c.joins):
            if c.where is None or truth(c.where, env, db) is True:
                envs.append(env)
    if c.group_by or any(_has_agg(it.expr) for it in c.items):
        groups = {}
        for env in envs:
            groups.setdefault(tuple(scalar(g, env, db) for g in c.group_by), []).append(env)
        return {tuple(_group_value(it.expr, members, db) for it in c.items) for members in groups.values()}
    return {tuple(scalar(it.expr, env, db) for it in c.items) for env in envs}


def body(b, db):
    if isinstance(b, SetQuery):
        left, right = body(b.left, db), body(b.right, db)
        return {"UNION": left | right, "EXCEPT": left - right, "INTERSECT": left & right}[b.op]
    return core(b, db)


def run(q: Query, db) -> list[tuple]:
    """Result rows; ordered by ORDER BY keys (NULLs last) when present."""
    rows = sorted(body(q.body, db), key=repr)
    for col, desc in reversed(q.order_by):
        data = [r for r in rows if r[col - 1] is not None]
        nulls = [r for r in rows if r[col - 1] is None]
        data.sort(key=lambda r: (_RANK[type(r[col - 1])], r[col - 1]), reverse=desc)
        rows = data + nulls
    return rows
