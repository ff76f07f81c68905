"""Demand-driven recalculation of a :class:`~sqlsheet.grid.Workbook`.

Formulas are compiled once per AST object into closures taking the anchor
cell. Cells are evaluated on demand with memoisation; a cell re-entered
while still in progress is a circular reference, which aborts the whole
evaluation rather than producing an error value.
"""

from __future__ import annotations

import bisect
import math
import re
import sys
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .formula import Binary, Call, Expr, Lit, Ref, Rng, Unary
from .grid import (
    BLANK,
    ERROR_TOKENS,
    CellValue,
    ErrorKind,
    Formula,
    Literal,
    RefResolutionError,
    Workbook,
    format_number,
    number,
)

NA = ErrorKind.NA
VALUE = ErrorKind.VALUE
REF = ErrorKind.REF
DIV0 = ErrorKind.DIV0
NUM = ErrorKind.NUM


class CircularReference(Exception):
    """Evaluation failed because formulas reference each other in a loop."""

    def __init__(self, cycle: list[tuple[int, int]]) -> None:
        self.cycle = cycle
        cells = ", ".join(f"R{r}C{c}" for r, c in cycle)
        super().__init__(f"circular reference: {cells}")


@dataclass(frozen=True)
class RangeVal:
    """A resolved rectangular reference, ``r1<=r2`` and ``c1<=c2``."""

    r1: int
    c1: int
    r2: int
    c2: int

    @property
    def rows(self) -> int:
        return self.r2 - self.r1 + 1

    @property
    def cols(self) -> int:
        return self.c2 - self.c1 + 1

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def cells(self) -> Iterator[tuple[int, int]]:
        for r in range(self.r1, self.r2 + 1):
            for c in range(self.c1, self.c2 + 1):
                yield r, c


@dataclass
class EvalState:
    values: dict[tuple[int, int], CellValue]
    height: int
    in_progress: set[tuple[int, int]] = field(default_factory=set)

    def get(self, row: int, col: int) -> CellValue:
        return self.values.get((row, col), BLANK)

    def column(self, col: int, rows: int | None = None) -> list[CellValue]:
        return [self.get(r, col) for r in range(1, (rows or self.height) + 1)]


# --- value semantics -----------------------------------------------------


def key(v: CellValue) -> tuple:
    """Equality key shared by MATCH and criteria (text is case-insensitive)."""
    t = type(v)
    if t is float:
        return ("n", v)
    if t is str:
        return ("t", v.lower())
    if t is bool:
        return ("b", v)
    if t is ErrorKind:
        return ("e", v)
    return ("_",)


def to_number(v: CellValue) -> float | ErrorKind:
    t = type(v)
    if t is float:
        return v
    if t is bool:
        return 1.0 if v else 0.0
    if v is BLANK:
        return 0.0
    if t is ErrorKind:
        return v
    return VALUE


def to_bool(v: CellValue) -> bool | ErrorKind:
    t = type(v)
    if t is bool:
        return v
    if t is float:
        return v != 0
    if v is BLANK:
        return False
    if t is ErrorKind:
        return v
    return VALUE


def to_text(v: CellValue) -> str | ErrorKind:
    t = type(v)
    if t is str:
        return v
    if t is float:
        return format_number(v)
    if t is bool:
        return "TRUE" if v else "FALSE"
    if v is BLANK:
        return ""
    return v


_TYPE_RANK = {float: 0, str: 1, bool: 2}


def compare(a: CellValue, b: CellValue) -> int | ErrorKind:
    """Three-way comparison with spreadsheet ordering: numbers < text < booleans."""
    if type(a) is ErrorKind:
        return a
    if type(b) is ErrorKind:
        return b
    if a is BLANK and b is BLANK:
        return 0
    if a is BLANK:
        a = _blank_like(b)
    elif b is BLANK:
        b = _blank_like(a)
    ra, rb = _TYPE_RANK[type(a)], _TYPE_RANK[type(b)]
    if ra != rb:
        return -1 if ra < rb else 1
    if ra == 1:
        a, b = a.lower(), b.lower()
    return (a > b) - (a < b)


def _blank_like(other: CellValue) -> CellValue:
    t = type(other)
    if t is float:
        return 0.0
    if t is bool:
        return False
    return ""


_CMP_OPS: dict[str, Callable[[int], bool]] = {
    "=": lambda k: k == 0,
    "<>": lambda k: k != 0,
    "<": lambda k: k < 0,
    "<=": lambda k: k <= 0,
    ">": lambda k: k > 0,
    ">=": lambda k: k >= 0,
}

_NUMERIC = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


# --- criteria ------------------------------------------------------------


class Criterion:
    """A COUNTIFS/SUMIFS condition.

    ``kind`` is ``"eq"`` (match any of ``keys``), ``"ne"`` (match none of
    ``keys``) or ``"cmp"`` (ordering comparison against ``value``).
    """

    __slots__ = ("kind", "keys", "op", "value")

    def __init__(self, kind: str, keys: frozenset = frozenset(), op: str = "", value: CellValue = BLANK) -> None:
        self.kind = kind
        self.keys = keys
        self.op = op
        self.value = value

    def __repr__(self) -> str:
        if self.kind == "cmp":
            return f"Criterion({self.op}{self.value!r})"
        return f"Criterion({self.kind} {sorted(self.keys, key=repr)})"

    @classmethod
    def parse(cls, v: CellValue) -> Criterion:
        if type(v) is str:
            for op in ("<=", ">=", "<>", "<", ">", "="):
                if v.startswith(op):
                    rest = v[len(op):]
                    if op == "=":
                        return cls("eq", _text_keys(rest))
                    if op == "<>":
                        return cls("ne", _text_keys(rest))
                    return cls("cmp", op=op, value=_criterion_operand(rest))
            return cls("eq", _text_keys(v))
        if v is BLANK:
            return cls("eq", _text_keys(""))
        return cls("eq", frozenset({key(v)}))

    def matches(self, v: CellValue) -> bool:
        kind = self.kind
        if kind == "eq":
            return key(v) in self.keys
        if kind == "ne":
            return key(v) not in self.keys
        x = self.value
        tx = type(x)
        if type(v) is not tx or tx is ErrorKind:
            return False
        if tx is str:
            return _CMP_OPS[self.op]((v.lower() > x.lower()) - (v.lower() < x.lower()))
        return _CMP_OPS[self.op]((v > x) - (v < x))


def _criterion_operand(text: str) -> CellValue:
    if text in ERROR_TOKENS:
        return ERROR_TOKENS[text]
    if text.upper() in ("TRUE", "FALSE"):
        return text.upper() == "TRUE"
    if _NUMERIC.fullmatch(text):
        return float(text)
    return text


def _text_keys(text: str) -> frozenset:
    keys = {("t", text.lower())}
    if text == "":
        keys.add(("_",))
    operand = _criterion_operand(text)
    if type(operand) is not str:
        keys.add(key(operand))
    return frozenset(keys)


# --- evaluator -----------------------------------------------------------

Fn = Callable[[int, int], object]


class Evaluator:
    def __init__(self, wb: Workbook) -> None:
        self.wb = wb
        self.cells = wb.cells
        self.height = wb.height
        self.width = max(wb.used_columns, 1)
        self.max_col = wb.max_col
        self.values: dict[tuple[int, int], CellValue] = {}
        self.in_progress: set[tuple[int, int]] = set()
        self.stack: list[tuple[int, int]] = []
        self.col_vals: dict[int, list[CellValue]] = {}
        self.col_index: dict[int, dict[tuple, list[int]]] = {}
        self.range_cache: dict[RangeVal, list[CellValue]] = {}
        self.compiled: dict[int, tuple[Expr, Fn]] = {}

    # cells

    def value(self, r: int, c: int) -> CellValue:
        try:
            return self.values[(r, c)]
        except KeyError:
            pass
        cell = self.cells.get((r, c))
        if cell is None:
            return BLANK
        if type(cell) is Literal:
            v = cell.value
            self.values[(r, c)] = v
            return v
        at = (r, c)
        if at in self.in_progress:
            i = self.stack.index(at)
            raise CircularReference(self.stack[i:] + [at])
        self.in_progress.add(at)
        self.stack.append(at)
        try:
            v = self.fn_for(cell.expr)(r, c)
        finally:
            self.stack.pop()
            self.in_progress.discard(at)
        if type(v) is RangeVal:
            v = self.deref(v)
        if v is BLANK:
            v = 0.0
        self.values[at] = v
        return v

    def fn_for(self, expr: Expr) -> Fn:
        hit = self.compiled.get(id(expr))
        if hit is not None and hit[0] is expr:
            return hit[1]
        fn = self.compile(expr, ref=False)
        self.compiled[id(expr)] = (expr, fn)
        return fn

    def deref(self, rv: RangeVal) -> CellValue:
        if rv.r1 == rv.r2 and rv.c1 == rv.c2:
            return self.value(rv.r1, rv.c1)
        return VALUE

    def column_prefix(self, c: int, r2: int) -> tuple[list[CellValue], dict[tuple, list[int]]]:
        """Values of rows ``1..r2`` of column ``c`` plus a key -> rows index."""
        vals = self.col_vals.get(c)
        if vals is None:
            vals = self.col_vals[c] = []
            self.col_index[c] = {}
        idx = self.col_index[c]
        while len(vals) < r2:
            j = len(vals) + 1
            v = self.value(j, c)
            if len(vals) == j - 1:
                vals.append(v)
                idx.setdefault(key(v), []).append(j)
        return vals, idx

    def materialize(self, rv: RangeVal) -> list[CellValue]:
        if rv.c1 == rv.c2 and rv.r1 == 1:
            vals, _ = self.column_prefix(rv.c1, rv.r2)
            return vals[: rv.r2]
        hit = self.range_cache.get(rv)
        if hit is None:
            hit = [self.value(r, c) for r, c in rv.cells()]
            self.range_cache[rv] = hit
        return hit

    # compilation

    def compile(self, e: Expr, ref: bool) -> Fn:
        t = type(e)
        if t is Lit:
            v = e.value
            return lambda r, c: v
        if t is Ref:
            return self._compile_ref(e, ref)
        if t is Rng:
            return self._compile_range(e, ref)
        if t is Unary:
            inner = self.compile(e.operand, False)

            def neg(r: int, c: int) -> CellValue:
                x = to_number(inner(r, c))
                if type(x) is ErrorKind:
                    return x
                return number(-x)

            return neg
        if t is Binary:
            return self._compile_binary(e)
        if t is Call:
            builder = _FUNCTIONS.get(e.name)
            if builder is None:
                return lambda r, c: ErrorKind.NAME
            fn = builder(self, e.args)
            if not ref and e.name == "OFFSET":
                return self._scalar(fn)
            return fn
        raise TypeError(f"not a formula node: {e!r}")

    def _scalar(self, fn: Fn) -> Fn:
        deref = self.deref

        def f(r: int, c: int) -> object:
            v = fn(r, c)
            return deref(v) if type(v) is RangeVal else v

        return f

    def _compile_ref(self, e: Ref, ref: bool) -> Fn:
        cr = e.ref
        dr, dc, rrel, crel = cr.row, cr.col, cr.row_rel, cr.col_rel
        value = self.value

        def f(r: int, c: int) -> object:
            rr = r + dr if rrel else dr
            cc = c + dc if crel else dc
            if rr < 1 or cc < 1:
                return REF
            if ref:
                return RangeVal(rr, cc, rr, cc)
            return value(rr, cc)

        return f

    def _compile_range(self, e: Rng, ref: bool) -> Fn:
        rng = e.ref
        height, width = self.height, self.width
        deref = self.deref

        def f(r: int, c: int) -> object:
            try:
                r1, c1, r2, c2 = rng.resolve((r, c), height, width)
            except RefResolutionError:
                return REF
            rv = RangeVal(r1, c1, r2, c2)
            return rv if ref else deref(rv)

        return f

    def _compile_binary(self, e: Binary) -> Fn:
        left = self.compile(e.left, False)
        right = self.compile(e.right, False)
        op = e.op
        if op in _CMP_OPS:
            test = _CMP_OPS[op]

            def cmp(r: int, c: int) -> CellValue:
                k = compare(left(r, c), right(r, c))
                if type(k) is ErrorKind:
                    return k
                return test(k)

            return cmp
        if op == "&":

            def cat(r: int, c: int) -> CellValue:
                a = to_text(left(r, c))
                if type(a) is ErrorKind:
                    return a
                b = to_text(right(r, c))
                if type(b) is ErrorKind:
                    return b
                return a + b

            return cat
        arith = _ARITH[op]

        def bin_(r: int, c: int) -> CellValue:
            a = to_number(left(r, c))
            b = to_number(right(r, c))
            if type(a) is ErrorKind:
                return a
            if type(b) is ErrorKind:
                return b
            return arith(a, b)

        return bin_

    # aggregate helpers

    def numbers_in(self, values: list[object]) -> list[float] | ErrorKind:
        """Numbers for SUM/MIN/MAX: ranges skip non-numbers, scalars coerce."""
        out: list[float] = []
        for v in values:
            if type(v) is RangeVal:
                for x in self.materialize(v):
                    tx = type(x)
                    if tx is float:
                        out.append(x)
                    elif tx is ErrorKind:
                        return x
            else:
                x = to_number(v)
                if type(x) is ErrorKind:
                    return x
                out.append(x)
        return out

    def match_offsets(self, pairs: list[tuple[object, Criterion]]) -> list[int] | ErrorKind:
        """Offsets (row-major, 0-based) where every (range, criterion) holds."""
        shape = None
        accessors: list[tuple[list[CellValue], Criterion]] = []
        candidates: list[int] | None = None
        for rv, crit in pairs:
            if type(rv) is not RangeVal:
                return rv if type(rv) is ErrorKind else VALUE
            if shape is None:
                shape = (rv.rows, rv.cols)
            elif shape != (rv.rows, rv.cols):
                return VALUE
            if rv.c1 == rv.c2 and rv.r1 == 1:
                vals, idx = self.column_prefix(rv.c1, rv.r2)
                if crit.kind == "eq":
                    found: list[int] = []
                    for k in crit.keys:
                        rows = idx.get(k)
                        if rows:
                            found.extend(rows[: bisect.bisect_right(rows, rv.r2)])
                    if candidates is None or len(found) < len(candidates):
                        candidates = sorted(found)
                        candidates = [x - 1 for x in candidates]
                accessors.append((vals, crit))
            else:
                accessors.append((self.materialize(rv), crit))
        assert shape is not None
        offsets = candidates if candidates is not None else range(shape[0] * shape[1])
        return [i for i in offsets if all(crit.matches(vals[i]) for vals, crit in accessors)]


def _power(a: float, b: float) -> CellValue:
    if a == 0 and b < 0:
        return DIV0
    try:
        out = a ** b
    except (OverflowError, ZeroDivisionError):
        return NUM
    if isinstance(out, complex):
        return NUM
    return number(out)


def _div(a: float, b: float) -> CellValue:
    if b == 0:
        return DIV0
    return number(a / b)


def _mul(a: float, b: float) -> CellValue:
    return number(a * b)


_ARITH: dict[str, Callable[[float, float], CellValue]] = {
    "+": lambda a, b: number(a + b),
    "-": lambda a, b: number(a - b),
    "*": _mul,
    "/": _div,
    "^": _power,
}


# --- function catalog ----------------------------------------------------

Builder = Callable[[Evaluator, tuple], Fn]
_FUNCTIONS: dict[str, Builder] = {}


def _fn(name: str) -> Callable[[Builder], Builder]:
    def deco(b: Builder) -> Builder:
        _FUNCTIONS[name] = b
        return b

    return deco


def _arity(args: tuple, lo: int, hi: int) -> bool:
    return lo <= len(args) <= hi


def _bad(r: int, c: int) -> CellValue:
    return VALUE


@_fn("IF")
def _if(ev: Evaluator, args: tuple) -> Fn:
    if not _arity(args, 2, 3):
        return _bad
    cond = ev.compile(args[0], False)
    then = ev.compile(args[1], False)
    other = ev.compile(args[2], False) if len(args) == 3 else (lambda r, c: False)

    def f(r: int, c: int) -> object:
        b = to_bool(cond(r, c))
        if type(b) is ErrorKind:
            return b
        return then(r, c) if b else other(r, c)

    return f


def _logical(ev: Evaluator, args: tuple, combine: Callable[[list[bool]], bool]) -> Fn:
    if not args:
        return _bad
    parts = [ev.compile(a, False) for a in args]

    def f(r: int, c: int) -> CellValue:
        bools = []
        for p in parts:
            b = to_bool(p(r, c))
            if type(b) is ErrorKind:
                return b
            bools.append(b)
        return combine(bools)

    return f


@_fn("AND")
def _and(ev: Evaluator, args: tuple) -> Fn:
    return _logical(ev, args, all)


@_fn("OR")
def _or(ev: Evaluator, args: tuple) -> Fn:
    return _logical(ev, args, any)


@_fn("NOT")
def _not(ev: Evaluator, args: tuple) -> Fn:
    if len(args) != 1:
        return _bad
    x = ev.compile(args[0], False)

    def f(r: int, c: int) -> CellValue:
        b = to_bool(x(r, c))
        return b if type(b) is ErrorKind else not b

    return f


@_fn("NA")
def _na(ev: Evaluator, args: tuple) -> Fn:
    return lambda r, c: NA


def _is(ev: Evaluator, args: tuple, test: Callable[[CellValue], bool]) -> Fn:
    if len(args) != 1:
        return _bad
    x = ev.compile(args[0], False)
    return lambda r, c: test(x(r, c))


@_fn("ISNA")
def _isna(ev: Evaluator, args: tuple) -> Fn:
    return _is(ev, args, lambda v: v is NA)


@_fn("ISERR")
def _iserr(ev: Evaluator, args: tuple) -> Fn:
    return _is(ev, args, lambda v: type(v) is ErrorKind and v is not NA)


@_fn("ISERROR")
def _iserror(ev: Evaluator, args: tuple) -> Fn:
    return _is(ev, args, lambda v: type(v) is ErrorKind)


@_fn("IFERROR")
def _iferror(ev: Evaluator, args: tuple) -> Fn:
    if len(args) != 2:
        return _bad
    x = ev.compile(args[0], False)
    alt = ev.compile(args[1], False)

    def f(r: int, c: int) -> object:
        v = x(r, c)
        return alt(r, c) if type(v) is ErrorKind else v

    return f


@_fn("MATCH")
def _match(ev: Evaluator, args: tuple) -> Fn:
    if not _arity(args, 2, 3):
        return _bad
    lookup = ev.compile(args[0], False)
    rng = ev.compile(args[1], True)
    mode_fn = ev.compile(args[2], False) if len(args) == 3 else (lambda r, c: 1.0)

    def f(r: int, c: int) -> CellValue:
        lk = lookup(r, c)
        mode = to_number(mode_fn(r, c))
        if type(mode) is ErrorKind:
            return mode
        if type(lk) is ErrorKind and not (lk is NA and mode == 0):
            return lk
        rv = rng(r, c)
        if type(rv) is not RangeVal:
            return rv if type(rv) is ErrorKind else NA
        if rv.rows > 1 and rv.cols > 1:
            return NA
        if lk is BLANK:
            return NA
        return eval_match(ev, lk, rv, int(mode))

    return f


def eval_match(ev: Evaluator, lookup: CellValue, rv: RangeVal, mode: int) -> CellValue:
    if mode == 0:
        k = key(lookup)
        if rv.c1 == rv.c2 and rv.r1 == 1:
            _, idx = ev.column_prefix(rv.c1, rv.r2)
            rows = idx.get(k)
            if rows and rows[0] <= rv.r2:
                return float(rows[0])
            return NA
        for i, v in enumerate(ev.materialize(rv)):
            if key(v) == k:
                return float(i + 1)
        return NA
    # Approximate modes: only values of the lookup's type take part.
    rank = _TYPE_RANK.get(type(lookup))
    best = None
    best_v: CellValue = BLANK
    for i, v in enumerate(ev.materialize(rv)):
        if _TYPE_RANK.get(type(v)) != rank:
            continue
        k = compare(v, lookup)
        if mode > 0 and k <= 0 and (best is None or compare(v, best_v) >= 0):
            best, best_v = i, v
        elif mode < 0 and k >= 0 and (best is None or compare(v, best_v) <= 0):
            best, best_v = i, v
    return NA if best is None else float(best + 1)


@_fn("INDEX")
def _index(ev: Evaluator, args: tuple) -> Fn:
    if not _arity(args, 2, 3):
        return _bad
    arr = ev.compile(args[0], True)
    row_fn = ev.compile(args[1], False)
    col_fn = ev.compile(args[2], False) if len(args) == 3 else None

    def f(r: int, c: int) -> CellValue:
        a = arr(r, c)
        i = to_number(row_fn(r, c))
        if type(i) is ErrorKind:
            return i
        j: float | ErrorKind | None = None
        if col_fn is not None:
            j = to_number(col_fn(r, c))
            if type(j) is ErrorKind:
                return j
        return eval_index(ev, a, i, j)

    return f


def eval_index(ev: Evaluator, arr: object, i: float, j: float | None = None) -> CellValue:
    i = int(i)
    jj = None if j is None else int(j)
    if type(arr) is not RangeVal:
        if type(arr) is ErrorKind:
            return arr
        if i == 1 and jj in (None, 1):
            return arr
        return VALUE
    if jj is None:
        if arr.cols == 1:
            row, col = i, 1
        elif arr.rows == 1:
            row, col = 1, i
        else:
            return VALUE
    else:
        row, col = i, jj
    if not (1 <= row <= arr.rows and 1 <= col <= arr.cols):
        return VALUE
    return ev.value(arr.r1 + row - 1, arr.c1 + col - 1)


@_fn("OFFSET")
def _offset(ev: Evaluator, args: tuple) -> Fn:
    if not _arity(args, 3, 5):
        return _bad
    base = ev.compile(args[0], True)
    nums = [ev.compile(a, False) for a in args[1:]]

    def f(r: int, c: int) -> object:
        rv = base(r, c)
        if type(rv) is not RangeVal:
            return rv if type(rv) is ErrorKind else VALUE
        vals = []
        for n in nums:
            x = to_number(n(r, c))
            if type(x) is ErrorKind:
                return x
            vals.append(int(x))
        return eval_offset(ev, rv, *vals)

    return f


def eval_offset(ev: Evaluator, rv: RangeVal, rows: int, cols: int, height: int | None = None, width: int | None = None) -> RangeVal | ErrorKind:
    h = rv.rows if height is None else height
    w = rv.cols if width is None else width
    if h < 1 or w < 1:
        return REF
    r1, c1 = rv.r1 + rows, rv.c1 + cols
    r2, c2 = r1 + h - 1, c1 + w - 1
    if r1 < 1 or c1 < 1 or r2 > ev.height or c2 > ev.max_col:
        return REF
    return RangeVal(r1, c1, r2, c2)


def _criteria_pairs(ev: Evaluator, args: tuple) -> list[tuple[Fn, Fn]]:
    return [(ev.compile(args[i], True), ev.compile(args[i + 1], False)) for i in range(0, len(args), 2)]


def _resolve_pairs(pairs: list[tuple[Fn, Fn]], r: int, c: int) -> list[tuple[object, Criterion]]:
    return [(rng(r, c), Criterion.parse(crit(r, c))) for rng, crit in pairs]


@_fn("COUNTIFS")
def _countifs(ev: Evaluator, args: tuple) -> Fn:
    if not args or len(args) % 2:
        return _bad
    pairs = _criteria_pairs(ev, args)

    def f(r: int, c: int) -> CellValue:
        hits = ev.match_offsets(_resolve_pairs(pairs, r, c))
        return hits if type(hits) is ErrorKind else float(len(hits))

    return f


@_fn("COUNTIF")
def _countif(ev: Evaluator, args: tuple) -> Fn:
    if len(args) != 2:
        return _bad
    return _countifs(ev, args)


@_fn("SUMIFS")
def _sumifs(ev: Evaluator, args: tuple) -> Fn:
    if len(args) < 3 or len(args) % 2 == 0:
        return _bad
    sum_rng = ev.compile(args[0], True)
    pairs = _criteria_pairs(ev, args[1:])

    def f(r: int, c: int) -> CellValue:
        srv = sum_rng(r, c)
        if type(srv) is not RangeVal:
            return srv if type(srv) is ErrorKind else VALUE
        resolved = _resolve_pairs(pairs, r, c)
        first = resolved[0][0]
        if type(first) is RangeVal and (first.rows, first.cols) != (srv.rows, srv.cols):
            return VALUE
        hits = ev.match_offsets(resolved)
        if type(hits) is ErrorKind:
            return hits
        return eval_sumifs_values(ev.materialize(srv), hits)

    return f


def eval_sumifs_values(values: list[CellValue], hits: list[int]) -> CellValue:
    total = 0.0
    for i in hits:
        v = values[i]
        tv = type(v)
        if tv is float:
            total += v
        elif tv is ErrorKind:
            return v
    return number(total)


def _reducer(ev: Evaluator, args: tuple, reduce: Callable[[list[float]], float]) -> Fn:
    parts = [ev.compile(a, True) for a in args]

    def f(r: int, c: int) -> CellValue:
        nums = ev.numbers_in([p(r, c) for p in parts])
        if type(nums) is ErrorKind:
            return nums
        return number(reduce(nums)) if nums else 0.0

    return f


@_fn("SUM")
def _sum(ev: Evaluator, args: tuple) -> Fn:
    return _reducer(ev, args, math.fsum)


@_fn("MIN")
def _min(ev: Evaluator, args: tuple) -> Fn:
    return _reducer(ev, args, min)


@_fn("MAX")
def _max(ev: Evaluator, args: tuple) -> Fn:
    return _reducer(ev, args, max)


@_fn("COUNTA")
def _counta(ev: Evaluator, args: tuple) -> Fn:
    parts = [ev.compile(a, True) for a in args]

    def f(r: int, c: int) -> CellValue:
        n = 0
        for p in parts:
            v = p(r, c)
            if type(v) is RangeVal:
                n += sum(1 for x in ev.materialize(v) if x is not BLANK)
            elif v is not BLANK:
                n += 1
        return float(n)

    return f


def _position(ev: Evaluator, args: tuple, pick: Callable[[RangeVal], int], here: Callable[[int, int], int]) -> Fn:
    if not args:
        return lambda r, c: float(here(r, c))
    if len(args) > 1:
        return _bad
    x = ev.compile(args[0], True)

    def f(r: int, c: int) -> CellValue:
        v = x(r, c)
        if type(v) is RangeVal:
            return float(pick(v))
        return v if type(v) is ErrorKind else VALUE

    return f


@_fn("ROW")
def _row(ev: Evaluator, args: tuple) -> Fn:
    return _position(ev, args, lambda rv: rv.r1, lambda r, c: r)


@_fn("COLUMN")
def _column(ev: Evaluator, args: tuple) -> Fn:
    return _position(ev, args, lambda rv: rv.c1, lambda r, c: c)


def _binary_numeric(ev: Evaluator, args: tuple, op: Callable[[float, float], CellValue]) -> Fn:
    if len(args) != 2:
        return _bad
    a_fn = ev.compile(args[0], False)
    b_fn = ev.compile(args[1], False)

    def f(r: int, c: int) -> CellValue:
        a = to_number(a_fn(r, c))
        if type(a) is ErrorKind:
            return a
        b = to_number(b_fn(r, c))
        if type(b) is ErrorKind:
            return b
        return op(a, b)

    return f


def _mod(a: float, b: float) -> CellValue:
    if b == 0:
        return DIV0
    return number(a - b * math.floor(a / b))


def _quotient(a: float, b: float) -> CellValue:
    if b == 0:
        return DIV0
    return number(math.trunc(a / b))


@_fn("MOD")
def _mod_fn(ev: Evaluator, args: tuple) -> Fn:
    return _binary_numeric(ev, args, _mod)


@_fn("QUOTIENT")
def _quotient_fn(ev: Evaluator, args: tuple) -> Fn:
    return _binary_numeric(ev, args, _quotient)


@_fn("POWER")
def _power_fn(ev: Evaluator, args: tuple) -> Fn:
    return _binary_numeric(ev, args, _power)


# --- entry points --------------------------------------------------------

_STACK_BYTES = 512 * 1024 * 1024
_RECURSION_LIMIT = 1_000_000


def _run_deep(fn: Callable[[], object]) -> object:
    """Run ``fn`` on a thread with a large stack; long reference chains recurse deeply."""
    result: dict[str, object] = {}

    def target() -> None:
        try:
            result["value"] = fn()
        except BaseException as exc:  # re-raised on the calling thread
            result["error"] = exc

    old_limit = sys.getrecursionlimit()
    old_size = threading.stack_size()
    sys.setrecursionlimit(max(old_limit, _RECURSION_LIMIT))
    try:
        threading.stack_size(_STACK_BYTES)
        t = threading.Thread(target=target)
        t.start()
        t.join()
    finally:
        threading.stack_size(old_size)
        sys.setrecursionlimit(old_limit)
    if "error" in result:
        raise result["error"]  # type: ignore[misc]
    return result["value"]


def evaluate_workbook(wb: Workbook) -> EvalState:
    """Evaluate every stored cell; raises :class:`CircularReference` on a loop."""
    ev = Evaluator(wb)

    def run() -> EvalState:
        for r, c in sorted(wb.cells, key=lambda rc: (rc[1], rc[0])):  # column-major keeps recursion shallow
            ev.value(r, c)
        return EvalState(ev.values, wb.height)

    return _run_deep(run)  # type: ignore[return-value]


def evaluate_formula(expr: Expr, wb: Workbook | None = None, at: tuple[int, int] = (1, 1)) -> CellValue:
    """Evaluate a single formula as if it were entered at ``at``."""
    wb = wb if wb is not None else Workbook(height=max(at[0], 1))
    ev = Evaluator(wb)
    v = ev.compile(expr, False)(*at)
    if type(v) is RangeVal:
        v = ev.deref(v)
    return 0.0 if v is BLANK else v  # type: ignore[return-value]


def eval_countifs(pairs: list[tuple[list[CellValue], CellValue]]) -> CellValue:
    """COUNTIFS over plain value lists, for callers outside a workbook."""
    wb, ranges = _scratch(pairs)
    ev = Evaluator(wb)
    hits = ev.match_offsets([(rv, Criterion.parse(crit)) for rv, (_, crit) in zip(ranges, pairs)])
    return hits if type(hits) is ErrorKind else float(len(hits))


def eval_sumifs(sum_values: list[CellValue], pairs: list[tuple[list[CellValue], CellValue]]) -> CellValue:
    wb, ranges = _scratch([(sum_values, None)] + pairs)
    ev = Evaluator(wb)
    if len(sum_values) != len(pairs[0][0]):
        return VALUE
    hits = ev.match_offsets([(rv, Criterion.parse(crit)) for rv, (_, crit) in zip(ranges[1:], pairs)])
    if type(hits) is ErrorKind:
        return hits
    return eval_sumifs_values(ev.materialize(ranges[0]), hits)


def _scratch(columns: list[tuple[list[CellValue], object]]) -> tuple[Workbook, list[RangeVal]]:
    height = max([len(vals) for vals, _ in columns] + [1])
    wb = Workbook(height=height)
    ranges = []
    for j, (vals, _) in enumerate(columns, start=1):
        for i, v in enumerate(vals, start=1):
            wb.write(i, j, Literal(v))
        ranges.append(RangeVal(1, j, max(len(vals), 1), j))
    return wb, ranges


__all__ = [
    "CircularReference", "Criterion", "EvalState", "Evaluator", "RangeVal", "compare",
    "eval_countifs", "eval_index", "eval_match", "eval_offset", "eval_sumifs",
    "evaluate_formula", "evaluate_workbook", "key",
]
