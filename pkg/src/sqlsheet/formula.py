"""Formula syntax: AST, parser and renderers for A1 and R1C1 notation.

The AST always stores references in R1C1 form (absolute or relative per
axis), so a formula filled down a column is the same object in every row.
A1 text is produced and consumed relative to an anchor cell.
"""

from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass
from typing import Iterable, Union

from .grid import (
    BLANK,
    ERROR_TOKENS,
    BoundsError,
    CellRef,
    CellValue,
    Coord,
    ErrorKind,
    Formula,
    RangeRef,
    RefResolutionError,
    column_letters,
    column_number,
    format_number,
    resolve_ref,
)

FUNCTION_CATALOG = frozenset(
    {
        "IF", "AND", "OR", "NOT", "NA", "ISNA", "ISERR", "ISERROR", "IFERROR",
        "MATCH", "INDEX", "OFFSET", "COUNTIF", "COUNTIFS", "SUMIFS", "SUM",
        "MIN", "MAX", "COUNTA", "ROW", "COLUMN", "MOD", "QUOTIENT", "POWER",
    }
)


class NotationStyle(enum.Enum):
    A1 = "A1"
    R1C1 = "R1C1"


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, text: str, pos: int) -> None:
        super().__init__(f"{message} at position {pos} in {text!r}")
        self.text = text
        self.pos = pos


class UnknownFunction(ValueError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown function {name}")
        self.name = name


class RenderError(ValueError):
    pass


# --- AST -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Lit:
    value: CellValue

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lit):
            return NotImplemented
        return type(self.value) is type(other.value) and self.value == other.value

    def __hash__(self) -> int:
        return hash(("Lit", type(self.value), self.value))


@dataclass(frozen=True)
class Ref:
    ref: CellRef


@dataclass(frozen=True)
class Rng:
    ref: RangeRef


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...] = ()


Expr = Union[Lit, Ref, Rng, Unary, Binary, Call]

BINARY_PRECEDENCE = {
    "=": 1, "<>": 1, "<": 1, "<=": 1, ">": 1, ">=": 1,
    "&": 2,
    "+": 3, "-": 3,
    "*": 4, "/": 4,
    "^": 5,
}
_UNARY_PREC = 6
_ATOM_PREC = 7


# --- tokenizer -----------------------------------------------------------

_AXIS = r"(\[-?\d+\]|\d+)"
_TOKEN_SPECS: dict[NotationStyle, list[tuple[str, str]]] = {}
_COMMON_HEAD = [
    ("ws", r"\s+"),
    ("string", r'"(?:[^"]|"")*"'),
    ("error", r"#N/A!?|#VALUE!|#DIV/0!|#REF!|#NAME\?|#NUM!"),
    ("number", r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"),
]
_COMMON_TAIL = [
    ("ident", r"[A-Za-z_][A-Za-z0-9_.]*"),
    ("op", r"<=|>=|<>|[-+*/^&=<>(),:]"),
]
_NOT_NAME = r"(?![A-Za-z0-9_(\[.])"
_TOKEN_SPECS[NotationStyle.R1C1] = (
    _COMMON_HEAD[:3]
    + [
        ("cell", rf"R{_AXIS}?C{_AXIS}?{_NOT_NAME}"),
        ("col", rf"C{_AXIS}?{_NOT_NAME}"),
        ("row", rf"R{_AXIS}?{_NOT_NAME}"),
    ]
    + _COMMON_HEAD[3:]
    + _COMMON_TAIL
)
_TOKEN_SPECS[NotationStyle.A1] = (
    _COMMON_HEAD[:3]
    + [
        ("a1col", rf"(\$?)([A-Z]{{1,3}}):(\$?)([A-Z]{{1,3}}){_NOT_NAME}"),
        ("a1row", rf"(\$?)(\d+):(\$?)(\d+){_NOT_NAME}"),
        ("a1cell", rf"(\$?)([A-Z]{{1,3}})(\$?)(\d+){_NOT_NAME}"),
    ]
    + _COMMON_HEAD[3:]
    + _COMMON_TAIL
)
_TOKEN_RE = {
    style: re.compile("|".join(f"(?P<{name}>{pat})" for name, pat in specs))
    for style, specs in _TOKEN_SPECS.items()
}


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int
    m: re.Match


def _tokenize(text: str, style: NotationStyle) -> list[_Tok]:
    rx = _TOKEN_RE[style]
    pos = 0
    out: list[_Tok] = []
    while pos < len(text):
        m = rx.match(text, pos)
        if m is None or m.end() == pos:
            raise FormulaSyntaxError("unexpected character", text, pos)
        kind = m.lastgroup
        assert kind is not None
        if kind != "ws":
            out.append(_Tok(kind, m.group(kind), pos, m))
        pos = m.end()
    return out


def _axis(text: str | None) -> tuple[int, bool]:
    """R1C1 axis text -> (value, relative)."""
    if not text:
        return 0, True
    if text.startswith("["):
        return int(text[1:-1]), True
    return int(text), False


# --- parser --------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, style: NotationStyle, anchor: tuple[int, int]) -> None:
        self.text = text
        self.style = style
        self.anchor = anchor
        self.toks = _tokenize(text, style)
        self.i = 0

    def peek(self, offset: int = 0) -> _Tok | None:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def is_op(self, *ops: str) -> bool:
        t = self.peek()
        return t is not None and t.kind == "op" and t.text in ops

    def take(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise FormulaSyntaxError("unexpected end of formula", self.text, len(self.text))
        self.i += 1
        return t

    def expect(self, op: str) -> None:
        t = self.peek()
        if t is None or t.kind != "op" or t.text != op:
            pos = t.pos if t else len(self.text)
            raise FormulaSyntaxError(f"expected {op!r}", self.text, pos)
        self.i += 1

    def parse(self) -> Expr:
        e = self.expr(1)
        t = self.peek()
        if t is not None:
            raise FormulaSyntaxError(f"unexpected token {t.text!r}", self.text, t.pos)
        return e

    def expr(self, min_prec: int) -> Expr:
        left = self.unary()
        while True:
            t = self.peek()
            if t is None or t.kind != "op" or t.text not in BINARY_PRECEDENCE:
                return left
            prec = BINARY_PRECEDENCE[t.text]
            if prec < min_prec:
                return left
            self.i += 1
            right = self.expr(prec + 1)
            left = Binary(t.text, left, right)

    def unary(self) -> Expr:
        if self.is_op("-", "+"):
            op = self.take().text
            operand = self.unary()
            if op == "+":
                return operand
            if isinstance(operand, Lit) and isinstance(operand.value, float):
                return Lit(-operand.value)
            return Unary("-", operand)
        return self.primary()

    def primary(self) -> Expr:
        t = self.take()
        if t.kind == "number":
            return Lit(float(t.text))
        if t.kind == "string":
            return Lit(t.text[1:-1].replace('""', '"'))
        if t.kind == "error":
            return Lit(ERROR_TOKENS[t.text])
        if t.kind == "op" and t.text == "(":
            e = self.expr(1)
            self.expect(")")
            return e
        if t.kind == "ident":
            name = t.text.upper()
            if self.is_op("("):
                self.i += 1
                args: list[Expr] = []
                if not self.is_op(")"):
                    args.append(self.expr(1))
                    while self.is_op(","):
                        self.i += 1
                        args.append(self.expr(1))
                self.expect(")")
                if name not in FUNCTION_CATALOG:
                    raise UnknownFunction(name)
                return Call(name, tuple(args))
            if name in ("TRUE", "FALSE"):
                return Lit(name == "TRUE")
            raise FormulaSyntaxError(f"unexpected name {t.text!r}", self.text, t.pos)
        if t.kind in ("cell", "a1cell"):
            first = self._cell(t)
            if self.is_op(":"):
                self.i += 1
                u = self.take()
                if u.kind not in ("cell", "a1cell"):
                    raise FormulaSyntaxError("expected cell reference after ':'", self.text, u.pos)
                return Rng(RangeRef.corners(first, self._cell(u)))
            return Ref(first)
        if t.kind == "col":
            v, rel = _axis(_group_after(t, "C"))
            return Rng(RangeRef.column(v, rel))
        if t.kind == "row":
            v, rel = _axis(_group_after(t, "R"))
            return Rng(RangeRef.row(v, rel))
        if t.kind == "a1col":
            d1, c1, d2, c2 = _a1_groups(t)
            if c1 != c2 or d1 != d2:
                raise FormulaSyntaxError("multi-column ranges are not supported", self.text, t.pos)
            col = column_number(c1)
            if d1:
                return Rng(RangeRef.column(col))
            return Rng(RangeRef.column(col - self.anchor[1], True))
        if t.kind == "a1row":
            d1, r1, d2, r2 = _a1_groups(t)
            if r1 != r2 or d1 != d2:
                raise FormulaSyntaxError("multi-row ranges are not supported", self.text, t.pos)
            row = int(r1)
            if d1:
                return Rng(RangeRef.row(row))
            return Rng(RangeRef.row(row - self.anchor[0], True))
        raise FormulaSyntaxError(f"unexpected token {t.text!r}", self.text, t.pos)

    def _cell(self, t: _Tok) -> CellRef:
        if t.kind == "cell":
            m = re.fullmatch(rf"R{_AXIS}?C{_AXIS}?", t.text)
            assert m is not None
            r, rrel = _axis(m.group(1))
            c, crel = _axis(m.group(2))
            return CellRef(r, c, rrel, crel)
        dc, letters, dr, digits = _a1_groups(t)
        col, row = column_number(letters), int(digits)
        if row < 1:
            raise FormulaSyntaxError("row 0 does not exist", self.text, t.pos)
        return CellRef(
            row if dr else row - self.anchor[0],
            col if dc else col - self.anchor[1],
            not dr,
            not dc,
        )


def _group_after(t: _Tok, letter: str) -> str | None:
    rest = t.text[len(letter):]
    return rest or None


def _a1_groups(t: _Tok) -> tuple[str, str, str, str]:
    m = re.fullmatch(r"(\$?)([A-Z]+|\d+)(?::)?(\$?)([A-Z]+|\d+)", t.text)
    assert m is not None
    return m.group(1), m.group(2), m.group(3), m.group(4)


def parse_formula(text: str, style: NotationStyle = NotationStyle.R1C1, anchor: tuple[int, int] = (1, 1)) -> Expr:
    """Parse formula text (``=...``) or a bare literal into an AST.

    A1 relative references are converted to offsets from ``anchor``.
    """
    body = text.strip()
    if body.startswith("="):
        return _Parser(body[1:], style, anchor).parse()
    lit = parse_literal(body)
    if lit is None:
        raise FormulaSyntaxError("not a formula or literal", text, 0)
    return Lit(lit)


def parse_literal(text: str) -> CellValue | None:
    """Literal cell content: number, quoted text, TRUE/FALSE or an error token."""
    if text in ERROR_TOKENS:
        return ERROR_TOKENS[text]
    if text.upper() in ("TRUE", "FALSE"):
        return text.upper() == "TRUE"
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        inner = text[1:-1]
        if re.fullmatch(r'(?:[^"]|"")*', inner):
            return inner.replace('""', '"')
        return None
    if re.fullmatch(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?", text):
        return float(text)
    return None


@functools.lru_cache(maxsize=8192)
def r1c1(text: str) -> Expr:
    """Cached R1C1 parse, used by the code generators."""
    return parse_formula(text, NotationStyle.R1C1)


# --- rendering -----------------------------------------------------------


def render_literal(v: CellValue) -> str:
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, float):
        return format_number(v)
    if isinstance(v, str):
        return '"' + v.replace('"', '""') + '"'
    if isinstance(v, ErrorKind):
        return v.token
    if v is BLANK:
        raise RenderError("blank has no literal form")
    raise RenderError(f"cannot render {v!r}")


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return BINARY_PRECEDENCE[e.op]
    if isinstance(e, Unary):
        return _UNARY_PREC
    if isinstance(e, Lit) and isinstance(e.value, float) and (e.value < 0 or str(e.value).startswith("-")):
        return _UNARY_PREC
    return _ATOM_PREC


def _a1_cell(ref: CellRef, anchor: tuple[int, int]) -> str:
    try:
        r, c = resolve_ref(ref, anchor)
    except RefResolutionError as exc:
        raise RenderError(str(exc)) from None
    return ("" if ref.col_rel else "$") + column_letters(c) + ("" if ref.row_rel else "$") + str(r)


def _a1_range(rng: RangeRef, anchor: tuple[int, int]) -> str:
    try:
        if rng.whole_column is not None:
            c = column_letters(rng.whole_column.resolve(anchor[1]))
            d = "" if rng.whole_column.rel else "$"
            return f"{d}{c}:{d}{c}"
        if rng.whole_row is not None:
            r = rng.whole_row.resolve(anchor[0])
            d = "" if rng.whole_row.rel else "$"
            return f"{d}{r}:{d}{r}"
    except RefResolutionError as exc:
        raise RenderError(str(exc)) from None
    assert rng.top_left is not None and rng.bottom_right is not None
    return _a1_cell(rng.top_left, anchor) + ":" + _a1_cell(rng.bottom_right, anchor)


def render(expr: Expr, style: NotationStyle = NotationStyle.R1C1, anchor: tuple[int, int] | None = None) -> str:
    """Render an AST as formula text (without the leading ``=``)."""
    if style is NotationStyle.A1 and anchor is None:
        raise RenderError("A1 rendering needs an anchor cell")
    return _render(expr, style, anchor or (1, 1))


def _render(e: Expr, style: NotationStyle, anchor: tuple[int, int]) -> str:
    if isinstance(e, Lit):
        return render_literal(e.value)
    if isinstance(e, Ref):
        return e.ref.r1c1() if style is NotationStyle.R1C1 else _a1_cell(e.ref, anchor)
    if isinstance(e, Rng):
        return e.ref.r1c1() if style is NotationStyle.R1C1 else _a1_range(e.ref, anchor)
    if isinstance(e, Call):
        return e.name + "(" + ",".join(_render(a, style, anchor) for a in e.args) + ")"
    if isinstance(e, Unary):
        inner = _render(e.operand, style, anchor)
        if _prec(e.operand) < _ATOM_PREC:
            inner = f"({inner})"
        return e.op + inner
    if isinstance(e, Binary):
        p = BINARY_PRECEDENCE[e.op]
        left = _render(e.left, style, anchor)
        right = _render(e.right, style, anchor)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left}{e.op}{right}"
    raise RenderError(f"not a formula node: {e!r}")


def formula_text(expr: Expr, style: NotationStyle = NotationStyle.R1C1, anchor: tuple[int, int] | None = None) -> str:
    return "=" + render(expr, style, anchor)


# --- fill-down -----------------------------------------------------------


def fill_down(
    row_template: Iterable[tuple[int, Expr]],
    from_row: int,
    to_row: int,
    height: int,
) -> list[tuple[tuple[int, int], Formula]]:
    """Copy a row of formulas to rows ``from_row..to_row``.

    In R1C1 form filling is a pure copy, so every target cell receives the
    same AST object.
    """
    if from_row < 2:
        raise ValueError("fill-down starts at row 2 or later; row 1 is set explicitly")
    if to_row > height:
        raise BoundsError(f"fill to row {to_row} exceeds height {height}")
    template = [(col, Formula(expr)) for col, expr in row_template]
    return [((row, col), cell) for row in range(from_row, to_row + 1) for col, cell in template]


def walk(e: Expr) -> Iterable[Expr]:
    yield e
    if isinstance(e, Unary):
        yield from walk(e.operand)
    elif isinstance(e, Binary):
        yield from walk(e.left)
        yield from walk(e.right)
    elif isinstance(e, Call):
        for a in e.args:
            yield from walk(a)

