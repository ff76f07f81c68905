"""SQL AST -> relational algebra under set semantics."""

from __future__ import annotations

from typing import Optional

from . import algebra as ra
from .sql import (
    AggCall, BinOp, Body, BoolOp, ColumnRef, Comparison, ExistsExpr, Expr, InExpr,
    IsNullExpr, Literal, NotExpr, Query, SelectCore, SetQuery, UnsupportedFeature, is_text_type,
)

_SET_OPS = {"UNION": ra.UnionSet, "EXCEPT": ra.DiffSet, "INTERSECT": ra.IntersectSet}
_NUMERIC_AGGS = ("SUM", "AVG", "MIN", "MAX")

Layout = dict[tuple[int, int], int]  # (FROM item, ordinal) -> current RA ordinal


def translate(q: Query) -> ra.RAExpr:
    """Translate a parsed query; the result is duplicate-free at the root."""
    e = _body(q.body)
    if not isinstance(e, ra.SET_OPS + (ra.GroupAgg, ra.DeDup)):
        e = ra.DeDup(e)
    for col, desc in reversed(q.order_by):  # successive stable sorts, primary key last
        e = ra.Sort(e, col, desc)
    return e


def _body(b: Body) -> ra.RAExpr:
    if isinstance(b, SetQuery):
        return _SET_OPS[b.op](_body(b.left), _body(b.right))
    return _core(b)


def _conjuncts(e: Optional[Expr]) -> list[Expr]:
    if e is None:
        return []
    if isinstance(e, BoolOp) and e.op == "AND":
        return _conjuncts(e.left) + _conjuncts(e.right)
    return [e]


def _core(c: SelectCore) -> ra.RAExpr:
    first = c.from_items[0].table
    acc: ra.RAExpr = ra.Reference(first.name, first.arity)
    layout: Layout = {(0, k): k for k in range(1, first.arity + 1)}
    for i in range(1, len(c.from_items)):
        table = c.from_items[i].table
        ref = ra.Reference(table.name, table.arity)
        rest = _conjuncts(c.joins[i])
        key = _join_key(rest, i, layout)
        if key is None:
            base = ra.arity(acc)
            acc = ra.Product(acc, ref)
            for k in range(1, table.arity + 1):
                layout[(i, k)] = base + k
        else:
            conj, lcol, rcol = key
            rest.remove(conj)
            width = ra.arity(acc)
            acc = ra.EqJoin(acc, ref, lcol, rcol)
            layout = {pos: 1 if p == lcol else p + 1 if p < lcol else p for pos, p in layout.items()}
            for k in range(1, table.arity + 1):
                layout[(i, k)] = 1 if k == rcol else width + (k if k < rcol else k - 1)
        if rest:
            acc = ra.Select(acc, _and([_predicate(p, layout) for p in rest]))
    preds = []
    for p in _conjuncts(c.where):
        if isinstance(p, InExpr) and not p.negated and isinstance(p.operand, ColumnRef):
            acc = ra.Semijoin(acc, translate(p.query), layout[(p.operand.item, p.operand.ordinal)], 1)
        else:
            preds.append(_predicate(p, layout))
    if preds:
        acc = ra.Select(acc, _and(preds))
    if c.group_by or any(_has_agg(it.expr) for it in c.items):
        return _grouped(c, acc, layout)
    items = [_item(it.expr, layout) for it in c.items]
    return _project(acc, items)


def _project(acc: ra.RAExpr, items: list) -> ra.RAExpr:
    if items == list(range(1, ra.arity(acc) + 1)):
        return acc
    return ra.Project(acc, tuple(items))


def _join_key(conds: list[Expr], item: int, layout: Layout) -> Optional[tuple[Expr, int, int]]:
    for cond in conds:
        if isinstance(cond, Comparison) and cond.op == "=":
            a, b = cond.left, cond.right
            if isinstance(a, ColumnRef) and isinstance(b, ColumnRef):
                if a.item == item and b.item < item:
                    a, b = b, a
                if a.item < item and b.item == item:
                    return cond, layout[(a.item, a.ordinal)], b.ordinal
    return None


def _and(preds: list[ra.Predicate]) -> ra.Predicate:
    out = preds[0]
    for p in preds[1:]:
        out = ra.And(out, p)
    return out


def _has_agg(e: Expr) -> bool:
    if isinstance(e, AggCall):
        return True
    if isinstance(e, BinOp):
        return _has_agg(e.left) or _has_agg(e.right)
    return False


def _scalar(e: Expr, layout: Layout) -> ra.Scalar:
    if isinstance(e, ColumnRef):
        return ra.Col(layout[(e.item, e.ordinal)])
    if isinstance(e, Literal):
        return ra.Const(e.value)
    if isinstance(e, BinOp):
        return ra.Arith(e.op, _scalar(e.left, layout), _scalar(e.right, layout))
    raise UnsupportedFeature(f"{type(e).__name__} in a scalar position")


def _item(e: Expr, layout: Layout) -> int | ra.Scalar:
    s = _scalar(e, layout)
    return s.index if isinstance(s, ra.Col) else s


def _predicate(e: Expr, layout: Layout) -> ra.Predicate:
    if isinstance(e, Comparison):
        return ra.Cmp(e.op, _scalar(e.left, layout), _scalar(e.right, layout))
    if isinstance(e, BoolOp):
        cls = ra.And if e.op == "AND" else ra.Or
        return cls(_predicate(e.left, layout), _predicate(e.right, layout))
    if isinstance(e, NotExpr):
        return ra.Not(_predicate(e.operand, layout))
    if isinstance(e, IsNullExpr):
        p: ra.Predicate = ra.IsNull(_scalar(e.operand, layout))
        return ra.Not(p) if e.negated else p
    if isinstance(e, InExpr):
        p = ra.InSub(_scalar(e.operand, layout), translate(e.query))
        return ra.Not(p) if e.negated else p
    if isinstance(e, ExistsExpr):
        return ra.Exists(translate(e.query))
    if isinstance(e, Literal) and isinstance(e.value, bool):
        return ra.Truth(e.value)
    raise UnsupportedFeature(f"non-boolean condition {type(e).__name__}")


def _grouped(c: SelectCore, acc: ra.RAExpr, layout: Layout) -> ra.RAExpr:
    group = [layout[(g.item, g.ordinal)] for g in c.group_by]
    group = list(dict.fromkeys(group))
    aggs: list[ra.Agg] = []

    def agg_of(call: AggCall) -> ra.Agg:
        if call.arg is None:
            return ra.Agg("COUNT_STAR")
        if not isinstance(call.arg, ColumnRef):
            raise UnsupportedFeature("aggregates over expressions (only columns)")
        if call.func in _NUMERIC_AGGS:
            typ = c.from_items[call.arg.item].table.type_of(call.arg.ordinal)
            if is_text_type(typ):
                raise UnsupportedFeature(f"{call.func} over text column {call.arg.name}")
        op = "COUNT_DISTINCT" if call.distinct else call.func
        return ra.Agg(op, layout[(call.arg.item, call.arg.ordinal)])

    def out(e: Expr) -> ra.Scalar:
        if isinstance(e, AggCall):
            a = agg_of(e)
            if a not in aggs:
                aggs.append(a)
            return ra.Col(len(group) + aggs.index(a) + 1)
        if isinstance(e, ColumnRef):
            return ra.Col(group.index(layout[(e.item, e.ordinal)]) + 1)
        if isinstance(e, Literal):
            return ra.Const(e.value)
        if isinstance(e, BinOp):
            return ra.Arith(e.op, out(e.left), out(e.right))
        raise UnsupportedFeature(f"{type(e).__name__} in a grouped select list")

    scalars = [out(it.expr) for it in c.items]
    grouped: ra.RAExpr = ra.GroupAgg(acc, tuple(group), tuple(aggs))
    items = [s.index if isinstance(s, ra.Col) else s for s in scalars]
    return _project(grouped, items)
