"""Relational-algebra IR shared by the translator, the oracle and codegen.

Column ordinals are 1-based. ``EqJoin`` produces the join key first, then
the left input's other columns, then the right input's other columns; this
is the layout the worksheet join materialises.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Union

from .grid import format_number

# --- scalar expressions --------------------------------------------------


@dataclass(frozen=True)
class Col:
    index: int


@dataclass(frozen=True)
class Const:
    value: float | str | bool


@dataclass(frozen=True)
class Arith:
    op: str  # one of + - * /
    left: Scalar
    right: Scalar


Scalar = Union[Col, Const, Arith]

# --- predicates ----------------------------------------------------------

COMPARISONS = ("=", "<>", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Cmp:
    op: str
    left: Scalar
    right: Scalar


@dataclass(frozen=True)
class And:
    left: Predicate
    right: Predicate


@dataclass(frozen=True)
class Or:
    left: Predicate
    right: Predicate


@dataclass(frozen=True)
class Not:
    operand: Predicate


@dataclass(frozen=True)
class IsNull:
    operand: Scalar


@dataclass(frozen=True)
class InSub:
    """``operand IN (sub)`` for a unary, non-correlated subquery."""

    operand: Scalar
    sub: RAExpr


@dataclass(frozen=True)
class Exists:
    sub: RAExpr


@dataclass(frozen=True)
class Truth:
    value: bool


Predicate = Union[Cmp, And, Or, Not, IsNull, InSub, Exists, Truth]

# --- aggregates ----------------------------------------------------------

AGG_OPS = ("SUM", "COUNT", "AVG", "MIN", "MAX", "COUNT_DISTINCT", "COUNT_STAR")


@dataclass(frozen=True)
class Agg:
    op: str
    col: int | None = None

    def __post_init__(self) -> None:
        if self.op not in AGG_OPS:
            raise ValueError(f"unknown aggregate {self.op}")
        if (self.col is None) != (self.op == "COUNT_STAR"):
            raise ValueError(f"{self.op} needs {'no' if self.op == 'COUNT_STAR' else 'a'} column")

    def render(self) -> str:
        if self.op == "COUNT_STAR":
            return "COUNT(*)"
        return f"{self.op}({self.col})"


# --- relational operators ------------------------------------------------


class ArityError(ValueError):
    """An ordinal is outside its input's arity, or set-operand arities differ."""


@dataclass(frozen=True)
class Reference:
    table: str
    width: int

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ArityError(f"table {self.table} needs at least one column")


@dataclass(frozen=True)
class Project:
    child: RAExpr
    items: tuple[int | Scalar, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ArityError("projection needs at least one column")
        n = arity(self.child)
        for it in self.items:
            for c in _scalar_cols(Col(it) if isinstance(it, int) else it):
                _check_ordinal(c, n, "Project")


@dataclass(frozen=True)
class Select:
    child: RAExpr
    predicate: Predicate

    def __post_init__(self) -> None:
        n = arity(self.child)
        for c in predicate_cols(self.predicate):
            _check_ordinal(c, n, "Select")


@dataclass(frozen=True)
class EqJoin:
    left: RAExpr
    right: RAExpr
    left_col: int
    right_col: int

    def __post_init__(self) -> None:
        _check_ordinal(self.left_col, arity(self.left), "EqJoin")
        _check_ordinal(self.right_col, arity(self.right), "EqJoin")


@dataclass(frozen=True)
class Semijoin:
    left: RAExpr
    right: RAExpr
    left_col: int
    right_col: int

    def __post_init__(self) -> None:
        _check_ordinal(self.left_col, arity(self.left), "Semijoin")
        _check_ordinal(self.right_col, arity(self.right), "Semijoin")


@dataclass(frozen=True)
class Product:
    left: RAExpr
    right: RAExpr


@dataclass(frozen=True)
class _SetOp:
    left: RAExpr
    right: RAExpr

    def __post_init__(self) -> None:
        if arity(self.left) != arity(self.right):
            raise ArityError(f"{type(self).__name__} operands have arities {arity(self.left)} and {arity(self.right)}")


class UnionSet(_SetOp):
    pass


class DiffSet(_SetOp):
    pass


class IntersectSet(_SetOp):
    pass


@dataclass(frozen=True)
class DeDup:
    child: RAExpr


@dataclass(frozen=True)
class Sort:
    child: RAExpr
    col: int
    descending: bool = False

    def __post_init__(self) -> None:
        _check_ordinal(self.col, arity(self.child), "Sort")


@dataclass(frozen=True)
class GroupAgg:
    child: RAExpr
    group: tuple[int, ...]
    aggs: tuple[Agg, ...]

    def __post_init__(self) -> None:
        if not self.group and not self.aggs:
            raise ArityError("GroupAgg needs grouping columns or aggregates")
        n = arity(self.child)
        for c in self.group:
            _check_ordinal(c, n, "GroupAgg")
        for a in self.aggs:
            if a.col is not None:
                _check_ordinal(a.col, n, "GroupAgg")


@dataclass(frozen=True)
class Standardize:
    child: RAExpr


@dataclass(frozen=True)
class ErrorTrap:
    child: RAExpr


RAExpr = Union[
    Reference, Project, Select, EqJoin, Semijoin, Product, UnionSet, DiffSet,
    IntersectSet, DeDup, Sort, GroupAgg, Standardize, ErrorTrap,
]

SET_OPS = (UnionSet, DiffSet, IntersectSet)
UNARY_OPS = (Project, Select, DeDup, Sort, GroupAgg, Standardize, ErrorTrap)


def _check_ordinal(c: int, n: int, where: str) -> None:
    if not 1 <= c <= n:
        raise ArityError(f"{where}: column {c} outside 1..{n}")


@functools.lru_cache(maxsize=None)
def arity(e: RAExpr) -> int:
    t = type(e)
    if t is Reference:
        return e.width
    if t is Project:
        return len(e.items)
    if t in (Select, DeDup, Sort, Standardize, ErrorTrap):
        return arity(e.child)
    if t is EqJoin:
        return arity(e.left) + arity(e.right) - 1
    if t is Semijoin:
        return arity(e.left)
    if t is Product:
        return arity(e.left) + arity(e.right)
    if t in SET_OPS:
        return arity(e.left)
    if t is GroupAgg:
        return len(e.group) + len(e.aggs)
    raise TypeError(f"not an RA expression: {e!r}")


def children(e: RAExpr) -> tuple[RAExpr, ...]:
    if isinstance(e, UNARY_OPS):
        return (e.child,)
    if isinstance(e, (EqJoin, Semijoin, Product) + SET_OPS):
        return (e.left, e.right)
    return ()


def subqueries(p: Predicate) -> list[RAExpr]:
    if isinstance(p, (InSub, Exists)):
        return [p.sub]
    if isinstance(p, (And, Or)):
        return subqueries(p.left) + subqueries(p.right)
    if isinstance(p, Not):
        return subqueries(p.operand)
    return []


def tables(e: RAExpr) -> list[Reference]:
    """Referenced tables in first-appearance order (subqueries included)."""
    out: dict[str, Reference] = {}

    def go(x: RAExpr) -> None:
        if isinstance(x, Reference):
            out.setdefault(x.table, x)
        if isinstance(x, Select):
            for s in subqueries(x.predicate):
                go(s)
        for ch in children(x):
            go(ch)

    go(e)
    return list(out.values())


def _scalar_cols(s: Scalar) -> list[int]:
    if isinstance(s, Col):
        return [s.index]
    if isinstance(s, Arith):
        return _scalar_cols(s.left) + _scalar_cols(s.right)
    return []


def predicate_cols(p: Predicate) -> list[int]:
    if isinstance(p, Cmp):
        return _scalar_cols(p.left) + _scalar_cols(p.right)
    if isinstance(p, (And, Or)):
        return predicate_cols(p.left) + predicate_cols(p.right)
    if isinstance(p, Not):
        return predicate_cols(p.operand)
    if isinstance(p, (IsNull, InSub)):
        return _scalar_cols(p.operand)
    return []


# --- rendering -----------------------------------------------------------

_INDENT = "   "


def render_const(v: float | str | bool) -> str:
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return format_number(float(v))


def render_scalar(s: Scalar) -> str:
    if isinstance(s, Col):
        return f"#{s.index}"
    if isinstance(s, Const):
        return render_const(s.value)
    return f"({render_scalar(s.left)} {s.op} {render_scalar(s.right)})"


def render_predicate(p: Predicate) -> str:
    if isinstance(p, Cmp):
        return f"{render_scalar(p.left)} {p.op} {render_scalar(p.right)}"
    if isinstance(p, And):
        return f"({render_predicate(p.left)} AND {render_predicate(p.right)})"
    if isinstance(p, Or):
        return f"({render_predicate(p.left)} OR {render_predicate(p.right)})"
    if isinstance(p, Not):
        return f"NOT {render_predicate(p.operand)}"
    if isinstance(p, IsNull):
        return f"{render_scalar(p.operand)} IS NULL"
    if isinstance(p, InSub):
        return f"{render_scalar(p.operand)} IN {compact(p.sub)}"
    if isinstance(p, Exists):
        return f"EXISTS {compact(p.sub)}"
    return "TRUE" if p.value else "FALSE"


def _item(it: int | Scalar) -> str:
    return str(it) if isinstance(it, int) else render_scalar(it)


def _args(e: RAExpr) -> tuple[list[RAExpr], list[str]]:
    """Child expressions and trailing scalar arguments, as printed."""
    t = type(e)
    if t is Project:
        return [e.child], ["[" + ", ".join(_item(i) for i in e.items) + "]"]
    if t is Select:
        return [e.child], [render_predicate(e.predicate)]
    if t in (EqJoin, Semijoin):
        return [e.left, e.right], [f"{e.left_col},{e.right_col}"]
    if t is Sort:
        return [e.child], [f"{e.col},{'DESC' if e.descending else 'ASC'}"]
    if t is GroupAgg:
        return [e.child], ["[" + ", ".join(map(str, e.group)) + "]", "[" + ", ".join(a.render() for a in e.aggs) + "]"]
    return list(children(e)), []


def pretty_print(e: RAExpr, depth: int = 0) -> str:
    """Nested functional form, one argument per line, three-space indents."""
    pad = _INDENT * depth
    if isinstance(e, Reference):
        return f"{pad}Reference({e.table})"
    kids, extra = _args(e)
    inner = _INDENT * (depth + 1)
    parts = [pretty_print(k, depth + 1) for k in kids] + [inner + x for x in extra]
    return f"{pad}{type(e).__name__}(\n" + ",\n".join(parts) + f"\n{pad})"


def compact(e: RAExpr) -> str:
    """Single-line form of :func:`pretty_print`."""
    if isinstance(e, Reference):
        return f"Reference({e.table})"
    kids, extra = _args(e)
    return f"{type(e).__name__}(" + ",".join([compact(k) for k in kids] + extra) + ")"


def normalize_ws(text: str) -> str:
    return "".join(text.split())


def row_bound(e: RAExpr, sizes: dict[str, int]) -> int:
    """Largest number of rows any block of ``e`` can hold for given table sizes."""
    return max(_bounds(e, sizes))


def _bounds(e: RAExpr, sizes: dict[str, int]) -> list[int]:
    t = type(e)
    if t is Reference:
        return [sizes.get(e.table, 0)]
    sub: list[int] = []
    if t is Select:
        for s in subqueries(e.predicate):
            sub += _bounds(s, sizes)
    kid_bounds = [_bounds(k, sizes) for k in children(e)]
    for kb in kid_bounds:
        sub += kb
    tops = [kb[-1] for kb in kid_bounds]
    if t in (Product, EqJoin):
        own = tops[0] * tops[1]
    elif t is UnionSet:
        own = tops[0] + tops[1]
    elif t is GroupAgg:
        own = tops[0]
    else:
        own = tops[0]
    return sub + [own]
