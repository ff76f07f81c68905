"""Parser for ``CREATE TABLE`` DDL and a SELECT subset, producing a resolved AST.

Identifiers are case-insensitive and stored lower-case. Every column
reference is bound to a FROM item and a 1-based ordinal within its table.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .grid import format_number


class SqlError(ValueError):
    def __init__(self, message: str, pos: int | None = None) -> None:
        self.message = message
        self.pos = pos
        super().__init__(message if pos is None else f"{message} (at offset {pos})")


class SqlSyntaxError(SqlError):
    pass


class SchemaError(SqlError):
    pass


class UnknownTable(SqlError):
    pass


class UnknownColumn(SqlError):
    pass


class AmbiguousColumn(SqlError):
    pass


class UnsupportedFeature(SqlError):
    pass


# --- schema --------------------------------------------------------------


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[str, ...]
    types: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.columns:
            raise SchemaError(f"table {self.name} has no columns")
        if len(set(self.columns)) != len(self.columns):
            raise SchemaError(f"table {self.name} has duplicate column names")

    @property
    def arity(self) -> int:
        return len(self.columns)

    def type_of(self, ordinal: int) -> str:
        return self.types[ordinal - 1] if self.types else ""


TEXT_TYPES = ("char", "text", "string", "clob")


def is_text_type(type_name: str) -> bool:
    t = type_name.lower()
    return any(k in t for k in TEXT_TYPES)


# --- tokens --------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|--[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<str>'(?:[^']|'')*')
  | (?P<qid>"(?:[^"]|"")+")
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|<>|!=|[=<>+\-*/(),.;])
    """,
    re.VERBOSE,
)

KEYWORDS = {
    "select", "distinct", "from", "where", "group", "by", "order", "asc", "desc", "union",
    "except", "intersect", "minus", "and", "or", "not", "in", "exists", "is", "null", "as",
    "join", "inner", "on", "cross", "left", "right", "full", "outer", "having", "all",
    "true", "false", "create", "table", "limit", "natural", "using",
}


@dataclass(frozen=True)
class Token:
    kind: str  # num, str, id, kw, op, eof
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise SqlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        tok = m.group()
        if kind == "id":
            low = tok.lower()
            out.append(Token("kw" if low in KEYWORDS else "id", low, pos))
        elif kind == "qid":
            out.append(Token("id", tok[1:-1].replace('""', '"').lower(), pos))
        elif kind == "str":
            out.append(Token("str", tok[1:-1].replace("''", "'"), pos))
        elif kind != "ws":
            out.append(Token(kind, "<>" if tok == "!=" else tok, pos))
        pos = m.end()
    out.append(Token("eof", "", len(text)))
    return out


class _Stream:
    def __init__(self, text: str) -> None:
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("kw", "op") and t.text in texts

    def take(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def accept(self, *texts: str) -> bool:
        if self.at(*texts):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text.upper() if text.isalpha() else repr(text)}")
        return self.take()

    def ident(self, what: str = "identifier") -> str:
        t = self.tok
        if t.kind != "id":
            raise self.error(f"expected {what}")
        self.i += 1
        return t.text

    def error(self, message: str) -> SqlSyntaxError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return SqlSyntaxError(f"{message}, found {found}", t.pos)


# --- DDL -----------------------------------------------------------------

_CONSTRAINT_WORDS = {"primary", "foreign", "unique", "constraint", "check", "key"}


def parse_ddl(text: str) -> list[TableSchema]:
    """Parse ``CREATE TABLE`` statements; column types are kept only as hints."""
    s = _Stream(text)
    schemas: list[TableSchema] = []
    seen: set[str] = set()
    while True:
        while s.accept(";"):
            pass
        if s.tok.kind == "eof":
            return schemas
        start = s.tok.pos
        s.expect("create")
        s.expect("table")
        name = s.ident("table name")
        if name in seen:
            raise SchemaError(f"duplicate table {name}", start)
        s.expect("(")
        cols: list[str] = []
        types: list[str] = []
        while True:
            t = s.tok
            if t.kind == "id" and t.text in _CONSTRAINT_WORDS or t.kind == "kw" and t.text == "check":
                _skip_def(s)
            else:
                col_pos = t.pos
                col = s.ident("column name")
                if col in cols:
                    raise SchemaError(f"duplicate column {col} in table {name}", col_pos)
                cols.append(col)
                types.append(_skip_def(s))
            if s.accept(")"):
                break
            s.expect(",")
        try:
            schemas.append(TableSchema(name, tuple(cols), tuple(types)))
        except SchemaError as exc:
            raise SchemaError(exc.message, start) from None
        seen.add(name)


def _skip_def(s: _Stream) -> str:
    """Skip to the next top-level ``,`` or ``)``; returns the words skipped."""
    depth = 0
    words: list[str] = []
    while True:
        t = s.tok
        if t.kind == "eof":
            raise s.error("unterminated column list")
        if depth == 0 and t.kind == "op" and t.text in (",", ")"):
            return " ".join(words)
        if t.text == "(":
            depth += 1
        elif t.text == ")":
            depth -= 1
        if depth == 0 and t.kind in ("id", "kw") and not words:
            words.append(t.text)
        s.take()


# --- query AST -----------------------------------------------------------


@dataclass(frozen=True)
class ColumnRef:
    item: int  # index of the FROM item
    ordinal: int  # 1-based within that item's table
    alias: str
    name: str


@dataclass(frozen=True)
class Literal:
    value: float | str | bool


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class AggCall:
    func: str  # SUM COUNT AVG MIN MAX
    arg: Optional[Expr]  # None for COUNT(*)
    distinct: bool = False


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class BoolOp:
    op: str  # AND / OR
    left: Expr
    right: Expr


@dataclass(frozen=True)
class NotExpr:
    operand: Expr


@dataclass(frozen=True)
class IsNullExpr:
    operand: Expr
    negated: bool = False


@dataclass(frozen=True)
class InExpr:
    operand: Expr
    query: Query
    negated: bool = False


@dataclass(frozen=True)
class ExistsExpr:
    query: Query


Expr = Union[ColumnRef, Literal, BinOp, AggCall, Comparison, BoolOp, NotExpr, IsNullExpr, InExpr, ExistsExpr]


@dataclass(frozen=True)
class FromItem:
    table: TableSchema
    alias: str


@dataclass(frozen=True)
class SelectItem:
    expr: Expr
    alias: Optional[str] = None


@dataclass(frozen=True)
class SelectCore:
    distinct: bool
    items: tuple[SelectItem, ...]
    from_items: tuple[FromItem, ...]
    joins: tuple[Optional[Expr], ...]  # ON condition per item (None: comma / first item)
    where: Optional[Expr] = None
    group_by: tuple[ColumnRef, ...] = ()
    star: bool = False

    @property
    def output_names(self) -> list[str]:
        return [output_name(it, i) for i, it in enumerate(self.items, 1)]


@dataclass(frozen=True)
class SetQuery:
    op: str  # UNION / EXCEPT / INTERSECT
    left: Body
    right: Body


Body = Union[SelectCore, SetQuery]


@dataclass(frozen=True)
class Query:
    body: Body
    order_by: tuple[tuple[int, bool], ...] = field(default=())  # (output ordinal, descending)

    @property
    def output_names(self) -> list[str]:
        return body_names(self.body)


def body_names(b: Body) -> list[str]:
    while isinstance(b, SetQuery):
        b = b.left
    return b.output_names


def output_name(it: SelectItem, i: int) -> str:
    if it.alias:
        return it.alias
    if isinstance(it.expr, ColumnRef):
        return it.expr.name
    if isinstance(it.expr, AggCall):
        inner = "*" if it.expr.arg is None else _expr_sql(it.expr.arg)
        return f"{it.expr.func.lower()}({'distinct ' if it.expr.distinct else ''}{inner})"
    return f"col{i}"


# --- parser --------------------------------------------------------------

_AGG_FUNCS = {"sum", "count", "avg", "min", "max"}


@dataclass
class _Scope:
    items: list[FromItem]
    outer: Optional[_Scope] = None

    def resolve(self, qualifier: Optional[str], name: str, pos: int) -> ColumnRef:
        found = self.lookup(qualifier, name, pos)
        if found is not None:
            return found
        scope = self.outer
        while scope is not None:
            if scope.lookup(qualifier, name, pos) is not None:
                raise UnsupportedFeature("correlated subquery (reference to an outer column)", pos)
            scope = scope.outer
        shown = f"{qualifier}.{name}" if qualifier else name
        raise UnknownColumn(f"unknown column {shown}", pos)

    def lookup(self, qualifier: Optional[str], name: str, pos: int) -> Optional[ColumnRef]:
        hits = []
        for idx, it in enumerate(self.items):
            if qualifier is not None and it.alias != qualifier:
                continue
            if name in it.table.columns:
                hits.append(ColumnRef(idx, it.table.columns.index(name) + 1, it.alias, name))
        if qualifier is not None and not any(it.alias == qualifier for it in self.items):
            return None
        if len(hits) > 1:
            raise AmbiguousColumn(f"ambiguous column {name}", pos)
        return hits[0] if hits else None

    def has_alias(self, qualifier: str) -> bool:
        scope: Optional[_Scope] = self
        while scope is not None:
            if any(it.alias == qualifier for it in scope.items):
                return True
            scope = scope.outer
        return False


class _Parser:
    def __init__(self, text: str, schemas: dict[str, TableSchema]) -> None:
        self.s = _Stream(text)
        self.schemas = schemas

    def statement(self) -> Query:
        q = self.query(None)
        self.s.accept(";")
        if self.s.tok.kind != "eof":
            raise self.s.error("expected end of query")
        return q

    def query(self, outer: Optional[_Scope]) -> Query:
        body = self.body(outer)
        order: list[tuple[int, bool]] = []
        if self.s.accept("order"):
            self.s.expect("by")
            names = body_names(body)
            while True:
                order.append((self.order_key(names), self._direction()))
                if not self.s.accept(","):
                    break
        if self.s.at("limit"):
            raise UnsupportedFeature("LIMIT", self.s.tok.pos)
        return Query(body, tuple(order))

    def _direction(self) -> bool:
        if self.s.accept("desc"):
            return True
        self.s.accept("asc")
        return False

    def order_key(self, names: list[str]) -> int:
        t = self.s.tok
        if t.kind == "num":
            self.s.take()
            k = float(t.text)
            if not k.is_integer() or not 1 <= k <= len(names):
                raise UnknownColumn(f"ORDER BY position {t.text} outside 1..{len(names)}", t.pos)
            return int(k)
        name = self.s.ident("ORDER BY column")
        if self.s.accept("."):
            name = self.s.ident("column name")
        if names.count(name) == 1:
            return names.index(name) + 1
        if names.count(name) > 1:
            raise AmbiguousColumn(f"ambiguous ORDER BY column {name}", t.pos)
        raise UnknownColumn(f"ORDER BY column {name} is not in the select list", t.pos)

    def body(self, outer: Optional[_Scope]) -> Body:
        left = self.term(outer)
        while self.s.at("union", "except", "minus"):
            op = self.s.take().text
            self._no_all()
            right = self.term(outer)
            left = self._setop("UNION" if op == "union" else "EXCEPT", left, right)
        return left

    def term(self, outer: Optional[_Scope]) -> Body:
        left = self.primary_body(outer)
        while self.s.at("intersect"):
            self.s.take()
            self._no_all()
            right = self.primary_body(outer)
            left = self._setop("INTERSECT", left, right)
        return left

    def _no_all(self) -> None:
        if self.s.at("all"):
            raise UnsupportedFeature("bag set operations (ALL); results use set semantics", self.s.tok.pos)
        self.s.accept("distinct")

    def _setop(self, op: str, left: Body, right: Body) -> SetQuery:
        if len(body_names(left)) != len(body_names(right)):
            raise SqlError(f"{op} operands have different numbers of columns", self.s.tok.pos)
        return SetQuery(op, left, right)

    def primary_body(self, outer: Optional[_Scope]) -> Body:
        if self.s.at("(") and self.s.peek().text in ("select", "("):
            self.s.take()
            b = self.body(outer)
            self.s.expect(")")
            return b
        return self.select_core(outer)

    def select_core(self, outer: Optional[_Scope]) -> SelectCore:
        s = self.s
        s.expect("select")
        distinct = s.accept("distinct")
        s.accept("all")
        raw_items = self._raw_select_list()
        s.expect("from")
        scope = _Scope([], outer)
        joins: list[Optional[Expr]] = []
        self._from_item(scope)
        joins.append(None)
        while True:
            if s.accept(","):
                self._from_item(scope)
                joins.append(None)
            elif s.at("join", "inner", "cross"):
                cross = s.accept("cross")
                s.accept("inner")
                s.expect("join")
                self._from_item(scope)
                if cross:
                    joins.append(None)
                else:
                    s.expect("on")
                    joins.append(self.condition(scope, allow_agg=False))
            elif s.at("left", "right", "full", "natural"):
                raise UnsupportedFeature("outer/natural joins", s.tok.pos)
            else:
                break
        where = None
        if s.accept("where"):
            where = self.condition(scope, allow_agg=False)
        group: list[ColumnRef] = []
        if s.accept("group"):
            s.expect("by")
            while True:
                pos = s.tok.pos
                e = self.additive(scope, allow_agg=False)
                if not isinstance(e, ColumnRef):
                    raise UnsupportedFeature("GROUP BY expressions (only columns)", pos)
                group.append(e)
                if not s.accept(","):
                    break
        if s.at("having"):
            raise UnsupportedFeature("HAVING", s.tok.pos)
        items, star = self._resolve_items(raw_items, scope)
        core = SelectCore(distinct, tuple(items), tuple(scope.items), tuple(joins), where, tuple(group), star)
        _check_grouping(core, raw_items[0][1] if raw_items else 0)
        return core

    def _raw_select_list(self) -> list[tuple[int, int, int]]:
        """Remember select-item token spans; they are parsed once FROM is known."""
        s = self.s
        spans = []
        while True:
            start_i, pos = s.i, s.tok.pos
            depth = 0
            while True:
                t = s.tok
                if t.kind == "eof":
                    raise s.error("expected FROM")
                if depth == 0 and (t.text == "," and t.kind == "op" or t.kind == "kw" and t.text == "from"):
                    break
                if t.text == "(":
                    depth += 1
                elif t.text == ")":
                    depth -= 1
                s.take()
            if s.i == start_i:
                raise s.error("expected select item")
            spans.append((start_i, pos, s.i))
            if not s.accept(","):
                return spans

    def _resolve_items(self, spans: list, scope: _Scope) -> tuple[list[SelectItem], bool]:
        s = self.s
        resume = s.i
        items: list[SelectItem] = []
        star = False
        for start, _pos, end in spans:
            s.i = start
            if s.at("*") and s.i + 1 == end:
                s.take()
                star = True
                for idx, it in enumerate(scope.items):
                    items += [SelectItem(ColumnRef(idx, k, it.alias, c)) for k, c in enumerate(it.table.columns, 1)]
                continue
            if s.tok.kind == "id" and s.peek().text == "." and s.peek(2).text == "*" and s.i + 3 == end:
                qual = s.take().text
                matches = [(idx, it) for idx, it in enumerate(scope.items) if it.alias == qual]
                if not matches:
                    raise UnknownTable(f"unknown table alias {qual}", s.tok.pos)
                idx, it = matches[0]
                items += [SelectItem(ColumnRef(idx, k, it.alias, c)) for k, c in enumerate(it.table.columns, 1)]
                s.i = end
                continue
            e = self.additive(scope, allow_agg=True)
            alias = None
            if s.accept("as"):
                alias = s.ident("alias")
            elif s.tok.kind == "id":
                alias = s.take().text
            if s.i != end:
                raise s.error("unexpected token in select item")
            items.append(SelectItem(e, alias))
        s.i = resume
        return items, star

    def _from_item(self, scope: _Scope) -> None:
        s = self.s
        if s.at("("):
            raise UnsupportedFeature("subqueries in FROM", s.tok.pos)
        pos = s.tok.pos
        name = s.ident("table name")
        if name not in self.schemas:
            raise UnknownTable(f"unknown table {name}", pos)
        alias = name
        if s.accept("as"):
            alias = s.ident("alias")
        elif s.tok.kind == "id":
            alias = s.take().text
        if any(it.alias == alias for it in scope.items):
            raise SqlError(f"duplicate table alias {alias}", pos)
        scope.items.append(FromItem(self.schemas[name], alias))

    # expressions

    def condition(self, scope: _Scope, allow_agg: bool) -> Expr:
        left = self.conjunction(scope, allow_agg)
        while self.s.accept("or"):
            left = BoolOp("OR", left, self.conjunction(scope, allow_agg))
        return left

    def conjunction(self, scope: _Scope, allow_agg: bool) -> Expr:
        left = self.negation(scope, allow_agg)
        while self.s.accept("and"):
            left = BoolOp("AND", left, self.negation(scope, allow_agg))
        return left

    def negation(self, scope: _Scope, allow_agg: bool) -> Expr:
        if self.s.accept("not"):
            return NotExpr(self.negation(scope, allow_agg))
        return self.predicate(scope, allow_agg)

    def predicate(self, scope: _Scope, allow_agg: bool) -> Expr:
        s = self.s
        if s.accept("exists"):
            return ExistsExpr(self.subquery(scope))
        if s.at("true", "false"):
            return Literal(s.take().text == "true")
        if s.at("(") and not self._paren_is_scalar():
            s.take()
            e = self.condition(scope, allow_agg)
            s.expect(")")
            return e
        left = self.additive(scope, allow_agg)
        if s.at("=", "<>", "<", "<=", ">", ">="):
            op = s.take().text
            return Comparison(op, left, self.additive(scope, allow_agg))
        if s.accept("is"):
            negated = s.accept("not")
            s.expect("null")
            return IsNullExpr(left, negated)
        negated = False
        if s.at("not") and self.s.peek().text == "in":
            s.take()
            negated = True
        if s.accept("in"):
            pos = s.tok.pos
            q = self.subquery(scope)
            if len(q.output_names) != 1:
                raise SqlError("IN subquery must return exactly one column", pos)
            return InExpr(left, q, negated)
        raise s.error("expected comparison")

    def _paren_is_scalar(self) -> bool:
        """Does the ``(`` at the cursor start an arithmetic operand?"""
        s = self.s
        depth = 0
        i = s.i
        while True:
            t = s.toks[i]
            if t.kind == "eof":
                return False
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1
                if depth == 0:
                    nxt = s.toks[i + 1]
                    return nxt.kind == "op" and nxt.text in ("=", "<>", "<", "<=", ">", ">=", "+", "-", "*", "/") or (
                        nxt.kind == "kw" and nxt.text in ("is", "in", "not") and s.toks[i + 2].text != "exists"
                    )
            elif depth == 1 and t.kind == "kw" and t.text in ("and", "or", "not", "exists", "select"):
                return False
            i += 1

    def subquery(self, scope: _Scope) -> Query:
        self.s.expect("(")
        q = self.query(scope)
        self.s.expect(")")
        if q.order_by:
            q = Query(q.body)
        return q

    def additive(self, scope: _Scope, allow_agg: bool) -> Expr:
        left = self.multiplicative(scope, allow_agg)
        while self.s.at("+", "-"):
            op = self.s.take().text
            left = BinOp(op, left, self.multiplicative(scope, allow_agg))
        return left

    def multiplicative(self, scope: _Scope, allow_agg: bool) -> Expr:
        left = self.unary(scope, allow_agg)
        while self.s.at("*", "/"):
            op = self.s.take().text
            left = BinOp(op, left, self.unary(scope, allow_agg))
        return left

    def unary(self, scope: _Scope, allow_agg: bool) -> Expr:
        if self.s.accept("-"):
            inner = self.unary(scope, allow_agg)
            if isinstance(inner, Literal) and isinstance(inner.value, float):
                return Literal(-inner.value)
            return BinOp("-", Literal(0.0), inner)
        self.s.accept("+")
        return self.atom(scope, allow_agg)

    def atom(self, scope: _Scope, allow_agg: bool) -> Expr:
        s = self.s
        t = s.tok
        if t.kind == "num":
            s.take()
            return Literal(float(t.text))
        if t.kind == "str":
            s.take()
            return Literal(t.text)
        if s.at("null"):
            raise UnsupportedFeature("NULL literals in queries", t.pos)
        if s.at("true", "false"):
            s.take()
            return Literal(t.text == "true")
        if s.accept("("):
            if s.at("select"):
                raise UnsupportedFeature("scalar subqueries", t.pos)
            e = self.additive(scope, allow_agg)
            s.expect(")")
            return e
        if t.kind == "id" and t.text in _AGG_FUNCS and s.peek().text == "(":
            return self.aggregate(scope, allow_agg)
        if t.kind == "id":
            name = s.take().text
            if s.accept("."):
                qual = name
                pos = s.tok.pos
                name = s.ident("column name")
                if not scope.has_alias(qual):
                    raise UnknownTable(f"unknown table alias {qual}", pos)
                return scope.resolve(qual, name, t.pos)
            if s.at("("):
                raise UnsupportedFeature(f"function {name.upper()}", t.pos)
            return scope.resolve(None, name, t.pos)
        raise s.error("expected expression")

    def aggregate(self, scope: _Scope, allow_agg: bool) -> AggCall:
        s = self.s
        t = s.take()
        if not allow_agg:
            raise SqlError(f"aggregate {t.text.upper()} not allowed here", t.pos)
        s.expect("(")
        func = t.text.upper()
        if s.accept("*"):
            if func != "COUNT":
                raise s.error(f"{func}(*) is not valid")
            s.expect(")")
            return AggCall("COUNT", None)
        distinct = s.accept("distinct")
        arg = self.additive(scope, allow_agg=False)
        if s.at(","):
            raise UnsupportedFeature("multi-argument aggregates", s.tok.pos)
        s.expect(")")
        if distinct and func != "COUNT":
            raise UnsupportedFeature(f"{func}(DISTINCT ...)", t.pos)
        return AggCall(func, arg, distinct)


def _contains_agg(e: Expr) -> bool:
    if isinstance(e, AggCall):
        return True
    if isinstance(e, (BinOp, Comparison, BoolOp)):
        return _contains_agg(e.left) or _contains_agg(e.right)
    return False


def _bare_columns(e: Expr) -> list[ColumnRef]:
    """Column refs outside aggregate calls."""
    if isinstance(e, ColumnRef):
        return [e]
    if isinstance(e, BinOp):
        return _bare_columns(e.left) + _bare_columns(e.right)
    return []


def _check_grouping(core: SelectCore, pos: int) -> None:
    grouped = bool(core.group_by) or any(_contains_agg(it.expr) for it in core.items)
    if not grouped:
        return
    keys = {(c.item, c.ordinal) for c in core.group_by}
    for it in core.items:
        for c in _bare_columns(it.expr):
            if (c.item, c.ordinal) not in keys:
                raise SqlError(f"column {c.alias}.{c.name} must appear in GROUP BY or inside an aggregate", pos)


def parse_sql(text: str, schemas: list[TableSchema] | dict[str, TableSchema]) -> Query:
    if isinstance(schemas, list):
        schemas = {s.name: s for s in schemas}
    if not schemas:
        raise SchemaError("no table schemas given")
    return _Parser(text, schemas).statement()


# --- printing ------------------------------------------------------------


def _literal_sql(v: float | str | bool) -> str:
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, str):
        return "'" + v.replace("'", "''") + "'"
    return format_number(v) if v >= 0 else f"({format_number(v)})"


def _expr_sql(e: Expr) -> str:
    if isinstance(e, ColumnRef):
        return f"{e.alias}.{e.name}"
    if isinstance(e, Literal):
        return _literal_sql(e.value)
    if isinstance(e, BinOp):
        return f"({_expr_sql(e.left)} {e.op} {_expr_sql(e.right)})"
    if isinstance(e, AggCall):
        if e.arg is None:
            return "COUNT(*)"
        return f"{e.func}({'DISTINCT ' if e.distinct else ''}{_expr_sql(e.arg)})"
    if isinstance(e, Comparison):
        return f"{_expr_sql(e.left)} {e.op} {_expr_sql(e.right)}"
    if isinstance(e, BoolOp):
        return f"({_expr_sql(e.left)} {e.op} {_expr_sql(e.right)})"
    if isinstance(e, NotExpr):
        return f"NOT ({_expr_sql(e.operand)})"
    if isinstance(e, IsNullExpr):
        return f"{_expr_sql(e.operand)} IS {'NOT ' if e.negated else ''}NULL"
    if isinstance(e, InExpr):
        return f"{_expr_sql(e.operand)} {'NOT ' if e.negated else ''}IN ({sql_text(e.query)})"
    if isinstance(e, ExistsExpr):
        return f"EXISTS ({sql_text(e.query)})"
    raise TypeError(f"not an expression: {e!r}")


def _core_sql(c: SelectCore) -> str:
    if c.star:
        cols = "*"
    else:
        cols = ", ".join(_expr_sql(it.expr) + (f" AS {it.alias}" if it.alias else "") for it in c.items)
    parts = [f"SELECT {'DISTINCT ' if c.distinct else ''}{cols}"]
    src = ""
    for i, (it, on) in enumerate(zip(c.from_items, c.joins)):
        name = it.table.name if it.alias == it.table.name else f"{it.table.name} AS {it.alias}"
        if i == 0:
            src = name
        elif on is None:
            src += f", {name}"
        else:
            src += f" JOIN {name} ON {_expr_sql(on)}"
    parts.append(f"FROM {src}")
    if c.where is not None:
        parts.append(f"WHERE {_expr_sql(c.where)}")
    if c.group_by:
        parts.append("GROUP BY " + ", ".join(_expr_sql(g) for g in c.group_by))
    return " ".join(parts)


def _body_sql(b: Body) -> str:
    if isinstance(b, SelectCore):
        return _core_sql(b)
    return f"({_body_sql(b.left)}) {b.op} ({_body_sql(b.right)})"


def sql_text(q: Query) -> str:
    """Canonical SQL for a parsed query; parsing it again yields the same AST."""
    text = _body_sql(q.body)
    if q.order_by:
        text += " ORDER BY " + ", ".join(f"{k}{' DESC' if d else ''}" for k, d in q.order_by)
    return text
