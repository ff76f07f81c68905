"""Lower relational algebra to a worksheet of formulas.

Every operator becomes a block of adjacent columns. A column holds one
formula in row 1 and one (possibly different) formula filled down rows
2..H; all formulas are written in R1C1 with absolute column numbers, so
filling is a plain copy. Relations live in column blocks: a data row holds
values (SQL NULL is ``#VALUE!``), an absent row holds ``#N/A`` in every
column. Every block emitted here yields *standard* output (data rows on
top), compacting loose intermediate results where needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from . import algebra as ra
from .evaluator import EvalState, evaluate_workbook
from .formula import r1c1
from .grid import (
    BLANK, MAX_COLUMNS, CellValue, ErrorKind, Formula, Literal, Workbook, column_letters, format_number,
)

NULL_FORMULA = "=INDEX(0,-1)"
NO_ROW_FORMULA = "=NA()"


class LayoutError(ValueError):
    """The plan needs more columns than the configured maximum."""


class DataError(ValueError):
    """Loaded data does not fit the plan (arity mismatch or too many rows)."""


@dataclass(frozen=True)
class Block:
    op: str
    start: int
    width: int

    @property
    def columns(self) -> range:
        return range(self.start, self.start + self.width)


@dataclass
class WorksheetPlan:
    workbook: Workbook
    inputs: dict[str, tuple[int, int]]  # table -> (first column, arity)
    blocks: list[Block]
    output_cols: list[int]
    output_names: list[str] = field(default_factory=list)
    expr: Optional[ra.RAExpr] = None  # unknown for plans read back from files

    @property
    def height(self) -> int:
        return self.workbook.height

    @property
    def width(self) -> int:
        return self.workbook.used_columns

    def column_range(self) -> str:
        cols = self.output_cols
        return f"{column_letters(cols[0])}:{column_letters(cols[-1])}"


def _lit(v: object) -> str:
    """Formula text for a constant."""
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, str):
        return '"' + v.replace('"', '""') + '"'
    return format_number(float(v))  # type: ignore[arg-type]


class SheetBuilder:
    """Allocates columns left to right and writes their formulas."""

    def __init__(
        self, height: int, max_col: int = MAX_COLUMNS, workbook: Optional[Workbook] = None, first_col: int = 1
    ) -> None:
        self.wb = workbook if workbook is not None else Workbook(height=height, max_col=max_col)
        self.height = height
        self.next_col = first_col
        self.blocks: list[Block] = []
        self._block: Optional[tuple[str, int]] = None
        self._counts: dict[int, int] = {}

    # allocation

    def column(self, body: Optional[str], first: Optional[str] = None, comment: Optional[str] = None) -> int:
        """Allocate a column: ``first`` in row 1 (defaults to ``body``), ``body`` in rows 2..H."""
        col = self.next_col
        if col > self.wb.max_col:
            raise LayoutError(f"plan needs more than {self.wb.max_col} columns")
        self.next_col += 1
        cells = self.wb.cells
        head = first if first is not None else body
        if head is not None:
            cells[(1, col)] = Formula(r1c1(head))
        if body is not None and self.height > 1:
            f = Formula(r1c1(body))
            for r in range(2, self.height + 1):
                cells[(r, col)] = f
        if comment:
            label = self._block[0] if self._block else ""
            self.wb.comments[(1, col)] = f"{label}: {comment}" if label else comment
        return col

    def begin(self, op: str) -> None:
        self._block = (op, self.next_col)

    def end(self) -> None:
        assert self._block is not None
        op, start = self._block
        if self.next_col > start:
            self.blocks.append(Block(op, start, self.next_col - start))
        self._block = None

    def _scoped(self, op: str, fn, *args):
        outer = self._block
        if outer is not None:
            self.end()
        self.begin(op)
        try:
            return fn(*args)
        finally:
            self.end()
            if outer is not None:
                self.begin(outer[0])

    # shared helpers

    def count(self, col: int) -> int:
        """Single-cell column ``R1Cn`` holding the number of data rows of ``col``."""
        if col not in self._counts:
            self._counts[col] = self.column(None, f"=COUNTA(C{col})-COUNTIFS(C{col},NA())", f"number of rows in C{col}")
        return self._counts[col]

    # operators (all take and return lists of column numbers)

    def standardize(self, cols: Sequence[int]) -> list[int]:
        return self._scoped(f"Standardize({_span(cols)})", self._standardize, cols)

    def _standardize(self, cols: Sequence[int]) -> list[int]:
        f = cols[0]
        cnt = self.column(f"=R[-1]C+IF(ISNA(RC{f}),0,1)", f"=IF(ISNA(RC{f}),0,1)", "running count of data rows")
        rank = self.column(f"=IF(ISNA(RC{f}),NA(),RC{cnt})", comment="target row of each data row")
        loc = self.column(f"=MATCH(ROW(),C{rank},0)", comment="source row for this row")
        return [self.column(f"=INDEX(C{c},RC{loc})", comment=f"compacted C{c}") for c in cols]

    def dedup(self, cols: Sequence[int]) -> list[int]:
        loose = self._scoped(f"DeDup({_span(cols)})", self._dedup, cols)
        return self.standardize(loose)

    def _dedup(self, cols: Sequence[int]) -> list[int]:
        f = cols[0]
        crit = ",".join(f"R1C{c}:RC{c},RC{c}" for c in cols)
        occ = self.column(f"=IF(ISNA(RC{f}),NA(),COUNTIFS({crit}))", comment="occurrence number of this tuple")
        return [self.column(f"=IF(RC{occ}=1,RC{c},NA())", comment=f"first occurrences of C{c}") for c in cols]

    def project(self, cols: Sequence[int], items: Sequence[int | ra.Scalar]) -> list[int]:
        return self._scoped(f"Project({_span(cols)})", self._project, cols, items)

    def _project(self, cols: Sequence[int], items: Sequence[int | ra.Scalar]) -> list[int]:
        out = []
        f = cols[0]
        for it in items:
            if isinstance(it, int):
                out.append(self.column(f"=RC{cols[it - 1]}", comment=f"copy of C{cols[it - 1]}"))
            else:
                e = self.scalar(it, cols)
                text = f"=IF(ISNA(RC{f}),NA(),IF(ISERROR({e}),INDEX(0,-1),{e}))"
                out.append(self.column(text, comment=ra.render_scalar(it)))
        return out

    def error_trap(self, cols: Sequence[int]) -> list[int]:
        def emit() -> list[int]:
            return [
                self.column(f"=IF(ISNA(RC{c}),NA(),IF(ISERROR(RC{c}),INDEX(0,-1),RC{c}))", comment=f"C{c} with errors as NULL")
                for c in cols
            ]

        return self._scoped(f"ErrorTrap({_span(cols)})", emit)

    def scalar(self, s: ra.Scalar, cols: Sequence[int]) -> str:
        if isinstance(s, ra.Col):
            return f"RC{cols[s.index - 1]}"
        if isinstance(s, ra.Const):
            return _lit(s.value)
        return f"({self.scalar(s.left, cols)}{s.op}{self.scalar(s.right, cols)})"

    def select(self, cols: Sequence[int], pred: ra.Predicate, lower_sub) -> list[int]:
        loose = self._scoped(f"Select({_span(cols)})", self._select, cols, pred, lower_sub)
        return self.standardize(loose)

    def _select(self, cols: Sequence[int], pred: ra.Predicate, lower_sub) -> list[int]:
        p = self.predicate(pred, cols, lower_sub)
        return [self.column(f"=IF(IFERROR(RC{p}=TRUE,FALSE),RC{c},NA())", comment=f"C{c} where C{p} is TRUE") for c in cols]

    def predicate(self, p: ra.Predicate, cols: Sequence[int], lower_sub) -> int:
        """Column holding TRUE / FALSE / #VALUE! (UNKNOWN) for each row."""
        if isinstance(p, ra.Cmp):
            text = f"={self.scalar(p.left, cols)}{p.op}{self.scalar(p.right, cols)}"
            return self.column(text, comment=ra.render_predicate(p))
        if isinstance(p, (ra.And, ra.Or)):
            a = self.predicate(p.left, cols, lower_sub)
            b = self.predicate(p.right, cols, lower_sub)
            if isinstance(p, ra.And):
                text = (f"=IF(OR(IFERROR(RC{a}=FALSE,FALSE),IFERROR(RC{b}=FALSE,FALSE)),FALSE,"
                        f"IF(OR(ISERROR(RC{a}),ISERROR(RC{b})),INDEX(0,-1),TRUE))")
            else:
                text = (f"=IF(OR(IFERROR(RC{a}=TRUE,FALSE),IFERROR(RC{b}=TRUE,FALSE)),TRUE,"
                        f"IF(OR(ISERROR(RC{a}),ISERROR(RC{b})),INDEX(0,-1),FALSE))")
            return self.column(text, comment=f"C{a} {'AND' if isinstance(p, ra.And) else 'OR'} C{b}")
        if isinstance(p, ra.Not):
            a = self.predicate(p.operand, cols, lower_sub)
            return self.column(f"=IF(ISERROR(RC{a}),INDEX(0,-1),NOT(RC{a}))", comment=f"NOT C{a}")
        if isinstance(p, ra.IsNull):
            return self.column(f"=ISERR({self.scalar(p.operand, cols)})", comment=ra.render_predicate(p))
        if isinstance(p, ra.InSub):
            s = lower_sub(p.sub)[0]
            n = self.count(s)
            x = self.scalar(p.operand, cols)
            text = (f"=IF(ISERR({x}),IF(R1C{n}=0,FALSE,INDEX(0,-1)),"
                    f"IF(ISERROR(MATCH({x},C{s},0)),IF(COUNTIFS(C{s},INDEX(0,-1))>0,INDEX(0,-1),FALSE),TRUE))")
            return self.column(text, comment=f"{x} IN C{s}")
        if isinstance(p, ra.Exists):
            n = self.count(lower_sub(p.sub)[0])
            return self.column(f"=R1C{n}>0", comment=f"EXISTS (R1C{n} rows)")
        if isinstance(p, ra.Truth):
            return self.column("=TRUE" if p.value else "=FALSE", comment="constant condition")
        raise TypeError(f"not a predicate: {p!r}")

    def union(self, a: Sequence[int], b: Sequence[int]) -> list[int]:
        def emit() -> list[int]:
            n = self.count(a[0])
            return [
                self.column(f"=IF(ROW()<=R1C{n},RC{x},INDEX(C{y},ROW()-R1C{n}))", comment=f"C{x} then C{y}")
                for x, y in zip(a, b)
            ]

        both = self._scoped(f"UnionSet({_span(a)},{_span(b)})", emit)
        return self.dedup(both)

    def _anti(self, a: Sequence[int], b: Sequence[int], keep: str, op: str) -> list[int]:
        def emit() -> list[int]:
            crit = ",".join(f"C{y},RC{x}" for x, y in zip(a, b))
            cnt = self.column(f"=COUNTIFS({crit})", comment=f"occurrences of this row in {_span(b)}")
            return [
                self.column(f"=IF(ISNA(RC{a[0]}),NA(),IF(RC{cnt}{keep},RC{x},NA()))", comment=f"filtered C{x}")
                for x in a
            ]

        kept = self._scoped(f"{op}({_span(a)},{_span(b)})", emit)
        return self.dedup(kept)

    def difference(self, a: Sequence[int], b: Sequence[int]) -> list[int]:
        return self._anti(a, b, "=0", "DiffSet")

    def intersect(self, a: Sequence[int], b: Sequence[int]) -> list[int]:
        return self._anti(a, b, ">0", "IntersectSet")

    def product(self, a: Sequence[int], b: Sequence[int]) -> list[int]:
        def emit() -> list[int]:
            na, nb = self.count(a[0]), self.count(b[0])
            guard = f"ROW()>R1C{na}*R1C{nb}"
            left = [self.column(f"=IF({guard},NA(),INDEX(C{x},QUOTIENT(ROW()-1,R1C{nb})+1))", comment=f"left C{x}") for x in a]
            right = [self.column(f"=IF({guard},NA(),INDEX(C{y},MOD(ROW()-1,R1C{nb})+1))", comment=f"right C{y}") for y in b]
            return left + right

        return self._scoped(f"Product({_span(a)},{_span(b)})", emit)

    def semijoin(self, a: Sequence[int], b: Sequence[int], kl: int, kr: int) -> list[int]:
        def emit() -> list[int]:
            key, other = a[kl - 1], b[kr - 1]
            first = self.column(f"=IF(ISERROR(MATCH(RC{key},C{other},0)),NA(),RC{a[0]})", comment=f"C{a[0]} if C{key} occurs in C{other}")
            return [first] + [self.column(f"=IF(ISNA(RC{first}),NA(),RC{x})", comment=f"C{x} if matched") for x in a[1:]]

        loose = self._scoped(f"Semijoin({_span(a)},{_span(b)};{kl}={kr})", emit)
        return self.standardize(loose)

    def sort(self, cols: Sequence[int], key: int, descending: bool = False) -> list[int]:
        return self._scoped(f"Sort({_span(cols)};{key} {'desc' if descending else 'asc'})", self._sort, cols, key, descending)

    def _sort(self, cols: Sequence[int], key: int, descending: bool) -> list[int]:
        k = cols[key - 1]
        n = self.count(k)
        cmp = ">" if descending else "<"
        pos = self.column(
            f"=IF(ISNA(RC{k}),R1C{n}+1,IF(ISERR(RC{k}),R1C{n}-COUNTIFS(C{k},RC{k})+COUNTIFS(R1C{k}:RC{k},RC{k}),"
            f'COUNTIFS(C{k},"{cmp}"&RC{k})+COUNTIFS(R1C{k}:RC{k},RC{k})))',
            comment="target row of this row",
        )
        loc = self.column(f"=MATCH(ROW(),C{pos},0)", comment="source row for this row")
        return [self.column(f"=INDEX(C{c},RC{loc})", comment=f"sorted C{c}") for c in cols]

    def group_agg(self, cols: Sequence[int], group: Sequence[int], aggs: Sequence[ra.Agg]) -> list[int]:
        loose = self._scoped(f"GroupAgg({_span(cols)})", self._group_agg, cols, group, aggs)
        return self.standardize(loose)

    def _group_agg(self, cols: Sequence[int], group: Sequence[int], aggs: Sequence[ra.Agg]) -> list[int]:
        f = cols[0]
        gcols = [cols[g - 1] for g in group]
        if gcols:
            whole = ",".join(f"C{g},RC{g}" for g in gcols)
            prefix = ",".join(f"R1C{g}:RC{g},RC{g}" for g in gcols)
        else:
            whole = f'C{f},"<>#N/A"'
            prefix = f'R1C{f}:RC{f},"<>#N/A"'
        occ = self.column(f"=IF(ISNA(RC{f}),NA(),COUNTIFS({prefix}))", comment="occurrence of this group")
        size = self.column(f"=IF(ISNA(RC{f}),NA(),COUNTIFS({whole}))", comment="group size")
        nonnull: dict[int, int] = {}
        shadow: dict[int, int] = {}

        def nn(x: int) -> int:
            if x not in nonnull:
                nonnull[x] = self.column(
                    f"=IF(RC{occ}=1,RC{size}-COUNTIFS({whole},C{x},INDEX(0,-1)),NA())", comment=f"non-NULL values of C{x}"
                )
            return nonnull[x]

        def sh(x: int) -> int:
            if x not in shadow:
                shadow[x] = self.column(f'=IFERROR(RC{x},"")', comment=f"C{x} with NULL as empty text")
            return shadow[x]

        outs = [self.column(f"=IF(RC{occ}=1,RC{g},NA())", comment=f"group key C{g}") for g in gcols]
        for a in aggs:
            x = cols[a.col - 1] if a.col is not None else None
            if a.op == "COUNT_STAR":
                outs.append(self.column(f"=IF(RC{occ}=1,RC{size},NA())", comment="COUNT(*)"))
            elif a.op == "COUNT":
                outs.append(nn(x))
            elif a.op in ("SUM", "AVG"):
                total = f"SUMIFS(C{sh(x)},{whole})"
                value = total if a.op == "SUM" else f"{total}/RC{nn(x)}"
                outs.append(self.column(f"=IF(RC{occ}=1,IF(RC{nn(x)}=0,INDEX(0,-1),{value}),NA())", comment=f"{a.op}(C{x})"))
            elif a.op in ("MIN", "MAX"):
                cmp = "<" if a.op == "MIN" else ">"
                helper = self.column(
                    f"=IF(ISNA(RC{f}),NA(),IF(ISERR(RC{x}),-1,"
                    f'COUNTIFS({whole},C{x},"{cmp}"&RC{x})+COUNTIFS({prefix},R1C{x}:RC{x},RC{x})-1))',
                    comment=f"0 marks the first {a.op.lower()} of C{x}",
                )
                outs.append(self.column(
                    f"=IF(RC{occ}=1,IF(RC{nn(x)}=0,INDEX(0,-1),SUMIFS(C{x},{whole},C{helper},0)),NA())",
                    comment=f"{a.op}(C{x})",
                ))
            elif a.op == "COUNT_DISTINCT":
                mark = self.column(
                    f"=IF(ISNA(RC{f}),NA(),IF(ISERR(RC{x}),INDEX(0,-1),COUNTIFS({prefix},R1C{x}:RC{x},RC{x})))",
                    comment=f"occurrence of C{x} within its group",
                )
                outs.append(self.column(f"=IF(RC{occ}=1,COUNTIFS({whole},C{mark},1),NA())", comment=f"COUNT(DISTINCT C{x})"))
            else:  # pragma: no cover - Agg validates op
                raise ValueError(a.op)
        return outs

    def eqjoin(self, a: Sequence[int], b: Sequence[int], kl: int, kr: int) -> list[int]:
        sa = self.semijoin(a, b, kl, kr)
        sb = self.semijoin(b, a, kr, kl)
        ta = self.sort(sa, kl)
        tb = self.sort(sb, kr)
        xa, ca = self._cards(ta[kl - 1])
        _xb, cb = self._cards(tb[kr - 1])
        return self._scoped(f"EqJoin({_span(a)},{_span(b)};{kl}={kr})", self._materialize, ta, tb, kl, kr, xa, ca, cb)

    def _cards(self, k: int) -> tuple[int, int]:
        def emit() -> list[int]:
            occ = self.column(f"=IF(ISNA(RC{k}),NA(),COUNTIFS(R1C{k}:RC{k},RC{k}))", comment=f"occurrence of C{k}")
            x = self.column(f"=IF(RC{occ}=1,RC{k},NA())", comment="distinct key")
            card = self.column(f"=IF(RC{occ}=1,COUNTIFS(C{k},RC{k}),NA())", comment="rows with this key")
            return [x, card]

        loose = self._scoped(f"KeyCounts(C{k})", emit)
        x, card = self.standardize(loose)
        return x, card

    def _materialize(self, ta, tb, kl, kr, xa, ca, cb) -> list[int]:
        ka, kb = ta[kl - 1], tb[kr - 1]
        p1 = self.column(f"=MATCH(RC{xa},C{ka},0)", comment="first left row of the block")
        p2 = self.column(f"=MATCH(RC{xa},C{kb},0)", comment="first right row of the block")
        size = self.column(f'=IFERROR(RC{ca}*RC{cb},"")', comment="block size")
        off = self.column(f'=IFERROR(R[-1]C{size}+R[-1]C,"")', "=0", comment="rows before the block")
        total = self.column(None, f"=SUM(C{size})", comment="join cardinality")
        blk = self.column(f"=IF(ROW()>R1C{total},NA(),MATCH(ROW()-1,C{off},1))", comment="block of this row")
        within = self.column(
            f"=IF(ISNA(RC{blk}),NA(),IF(RC{blk}<>R[-1]C{blk},1,1+R[-1]C))",
            f"=IF(ISNA(RC{blk}),NA(),1)",
            comment="row number within the block",
        )
        out = [self.column(f"=INDEX(C{xa},RC{blk})", comment="join key")]
        for j, c in enumerate(ta, 1):
            if j != kl:
                out.append(self.column(
                    f"=INDEX(C{c},INDEX(C{p1},RC{blk})+MOD(RC{within}-1,INDEX(C{ca},RC{blk})))", comment=f"left C{c}"
                ))
        for j, c in enumerate(tb, 1):
            if j != kr:
                out.append(self.column(
                    f"=INDEX(C{c},INDEX(C{p2},RC{blk})+QUOTIENT(RC{within}-1,INDEX(C{ca},RC{blk})))", comment=f"right C{c}"
                ))
        return out


def _span(cols: Sequence[int]) -> str:
    if not cols:
        return ""
    if list(cols) == list(range(cols[0], cols[0] + len(cols))):
        return f"C{cols[0]}" if len(cols) == 1 else f"C{cols[0]}:C{cols[-1]}"
    return ",".join(f"C{c}" for c in cols)


class _Lowering:
    def __init__(self, builder: SheetBuilder, inputs: dict[str, list[int]]) -> None:
        self.b = builder
        self.inputs = inputs
        self.memo: dict[ra.RAExpr, list[int]] = {}

    def lower(self, e: ra.RAExpr) -> list[int]:
        hit = self.memo.get(e)
        if hit is None:
            hit = self.memo[e] = self._lower(e)
        return hit

    def _lower(self, e: ra.RAExpr) -> list[int]:
        b = self.b
        if isinstance(e, ra.Reference):
            return self.inputs[e.table]
        if isinstance(e, ra.Project):
            return b.project(self.lower(e.child), e.items)
        if isinstance(e, ra.Select):
            return b.select(self.lower(e.child), e.predicate, self.lower)
        if isinstance(e, ra.EqJoin):
            return b.eqjoin(self.lower(e.left), self.lower(e.right), e.left_col, e.right_col)
        if isinstance(e, ra.Semijoin):
            return b.semijoin(self.lower(e.left), self.lower(e.right), e.left_col, e.right_col)
        if isinstance(e, ra.Product):
            return b.product(self.lower(e.left), self.lower(e.right))
        if isinstance(e, ra.UnionSet):
            return b.union(self.lower(e.left), self.lower(e.right))
        if isinstance(e, ra.DiffSet):
            return b.difference(self.lower(e.left), self.lower(e.right))
        if isinstance(e, ra.IntersectSet):
            return b.intersect(self.lower(e.left), self.lower(e.right))
        if isinstance(e, ra.DeDup):
            return b.dedup(self.lower(e.child))
        if isinstance(e, ra.Sort):
            return b.sort(self.lower(e.child), e.col, e.descending)
        if isinstance(e, ra.GroupAgg):
            return b.group_agg(self.lower(e.child), e.group, e.aggs)
        if isinstance(e, ra.Standardize):
            return b.standardize(self.lower(e.child))
        if isinstance(e, ra.ErrorTrap):
            return b.error_trap(self.lower(e.child))
        raise TypeError(f"not an RA expression: {e!r}")


def emit_plan(
    e: ra.RAExpr,
    height: int,
    column_names: Mapping[str, Sequence[str]] | None = None,
    output_names: Sequence[str] | None = None,
    max_col: int = MAX_COLUMNS,
) -> WorksheetPlan:
    """Compile ``e`` into a worksheet plan of logical height ``height``."""
    column_names = column_names or {}
    b = SheetBuilder(height, max_col)
    inputs: dict[str, list[int]] = {}
    input_names: dict[str, list[str]] = {}
    for ref in ra.tables(e):
        names = list(column_names.get(ref.table, [])) or [f"col{k}" for k in range(1, ref.width + 1)]
        input_names[ref.table] = names
        b.begin(f"Reference({ref.table})")
        inputs[ref.table] = [b.column(NO_ROW_FORMULA, comment=f"input {ref.table}.{names[k]}") for k in range(ref.width)]
        b.end()
    result = _Lowering(b, inputs).lower(e)
    names = list(output_names or [f"col{k}" for k in range(1, len(result) + 1)])
    b.begin("Output")
    out = [b.column(f"=RC{c}", comment=f"result column {name}") for c, name in zip(result, names)]
    b.end()
    wb = b.wb
    keep = set(out) | {c for cols in inputs.values() for c in cols}
    wb.hidden_columns = {c for c in range(1, b.next_col) if c not in keep}
    plan_inputs = {t: (cols[0], len(cols)) for t, cols in inputs.items()}
    wb.meta.update(encode_meta(plan_inputs, out, names))
    wb.meta["input_names"] = ",".join(f"{t}:{'|'.join(cols)}" for t, cols in input_names.items())
    return WorksheetPlan(wb, plan_inputs, b.blocks, out, names, e)


def encode_meta(inputs: Mapping[str, tuple[int, int]], outputs: Sequence[int], names: Sequence[str]) -> dict[str, str]:
    return {
        "inputs": ",".join(f"{t}:{start}:{n}" for t, (start, n) in inputs.items()),
        "outputs": ",".join(map(str, outputs)),
        "output_names": ",".join(names),
    }


def plan_from_workbook(wb: Workbook) -> WorksheetPlan:
    """Recover plan layout from workbook metadata (e.g. after reading a grid file)."""
    inputs: dict[str, tuple[int, int]] = {}
    for part in filter(None, wb.meta.get("inputs", "").split(",")):
        t, start, n = part.rsplit(":", 2)
        inputs[t] = (int(start), int(n))
    outputs = [int(c) for c in filter(None, wb.meta.get("outputs", "").split(","))]
    if not outputs:
        raise DataError("workbook carries no output-column metadata")
    names = wb.meta.get("output_names", "").split(",") if wb.meta.get("output_names") else []
    return WorksheetPlan(wb, inputs, [], outputs, names)


def input_column_names(plan: WorksheetPlan) -> dict[str, list[str]]:
    out = {}
    for part in filter(None, plan.workbook.meta.get("input_names", "").split(",")):
        t, _, cols = part.rpartition(":")
        out[t] = cols.split("|")
    return out


# --- data in and out ------------------------------------------------------


def load_table(plan: WorksheetPlan, table: str, rows: Iterable[Sequence[object]]) -> None:
    """Write ``rows`` into the table's input block in standard form."""
    if table not in plan.inputs:
        raise DataError(f"plan has no input table {table}")
    start, arity = plan.inputs[table]
    wb = plan.workbook
    null = Formula(r1c1(NULL_FORMULA))
    no_row = Formula(r1c1(NO_ROW_FORMULA))
    rows = list(dict.fromkeys(tuple(r) for r in rows))  # relations are sets
    if len(rows) > wb.height:
        raise DataError(f"table {table} has {len(rows)} rows but the sheet holds {wb.height}")
    for i, row in enumerate(rows, 1):
        if len(row) != arity:
            raise DataError(f"table {table} row {i} has {len(row)} fields, expected {arity}")
        for j, v in enumerate(row):
            wb.cells[(i, start + j)] = null if v is None else Literal(_value(v))
    for i in range(len(rows) + 1, wb.height + 1):
        for j in range(arity):
            wb.cells[(i, start + j)] = no_row


def _value(v: object) -> CellValue:
    if isinstance(v, (bool, str)):
        return v
    if isinstance(v, (int, float)):
        return float(v)
    raise DataError(f"unsupported value {v!r}")


def decode_output(state: EvalState, plan: WorksheetPlan) -> list[tuple]:
    """Output rows in sheet order: ``#N/A`` rows dropped, other errors read as NULL."""
    rows = []
    for r in range(1, plan.height + 1):
        vals = [state.get(r, c) for c in plan.output_cols]
        if vals[0] is ErrorKind.NA:
            continue
        rows.append(tuple(None if isinstance(v, ErrorKind) or v is BLANK else v for v in vals))
    return rows


def check_capacity(plan: WorksheetPlan, sizes: Mapping[str, int]) -> None:
    """Refuse inputs for which some intermediate block could outgrow the sheet.

    Blocks hold at most ``height`` rows, so a larger intermediate result would
    be silently truncated.
    """
    if plan.expr is None:
        return
    need = ra.row_bound(plan.expr, dict(sizes))
    if need > plan.height:
        raise DataError(f"intermediate results may need {need} rows but the sheet has {plan.height}; use more rows")


def run_plan(plan: WorksheetPlan, db: Mapping[str, Iterable[Sequence[object]]]) -> list[tuple]:
    """Load ``db`` into the plan's input blocks, evaluate, and decode the output."""
    if plan.expr is not None:
        check_capacity(plan, {t: len(set(map(tuple, db.get(t, ())))) for t in plan.inputs})
    for table in plan.inputs:
        load_table(plan, table, db.get(table, ()))
    return decode_output(evaluate_workbook(plan.workbook), plan)
