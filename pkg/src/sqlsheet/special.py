"""Worksheets beyond the SQL translator: merge-sort network, BFS levels, DFS order."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

from . import algebra as ra
from .codegen import SheetBuilder
from .evaluator import EvalState, evaluate_workbook
from .formula import r1c1
from .grid import BoundsError, ErrorKind, Formula, Literal, Workbook, normalize

SENTINEL = 1e300  # stands in for infinity: pads sort input, marks unreachable BFS vertices

Vertex = Hashable


# --- merge-sort network ----------------------------------------------------

# One merge level, 12 helper columns (offsets 0..11 within the level).
_EXPANDED = (
    ("level", "=QUOTIENT(COLUMN(),12)"),
    ("block size", "=POWER(2,RC[-1])"),
    ("top start", "=QUOTIENT(ROW()-2,RC[-1]*2)*2*RC[-1]+1"),
    ("top end", "=RC[-1]+RC[-2]-1"),
    ("bottom start", "=RC[-2]+RC[-3]"),
    ("bottom end", "=RC[-2]+RC[-4]"),
    ("top head", "=IF(MOD(ROW()-2,RC[-5]*2)=0,RC[-4],IF(R[-1]C[4],R[-1]C+1,R[-1]C))"),
    ("bottom head", "=IF(MOD(ROW()-2,RC[-6]*2)=0,RC[-3],IF(R[-1]C[3],R[-1]C,R[-1]C+1))"),
    ("top value", "=INDEX(C[-9],RC[-2]+1)"),
    ("bottom value", "=INDEX(C[-10],RC[-2]+1)"),
    ("take top", "=IF(RC[-4]>RC[-7],FALSE,IF(RC[-3]>RC[-5],TRUE,RC[-2]<=RC[-1]))"),
    ("merged", "=IF(RC[-1],RC[-3],RC[-2])"),
)

# The same level with the block arithmetic inlined into 4 columns.
_S = "POWER(2,QUOTIENT(COLUMN()-2,4))"
_TOP = f"QUOTIENT(ROW()-2,2*{_S})*2*{_S}+1"
_CONDENSED = (
    ("top head", f"=IF(MOD(ROW()-2,2*{_S})=0,{_TOP},IF(R[-1]C[2],R[-1]C+1,R[-1]C))"),
    ("bottom head", f"=IF(MOD(ROW()-2,2*{_S})=0,{_TOP}+{_S},IF(R[-1]C[1],R[-1]C,R[-1]C+1))"),
    ("take top", f"=IF(RC[-2]>{_TOP}+{_S}-1,FALSE,IF(RC[-1]>{_TOP}+2*{_S}-1,TRUE,"
                 f"INDEX(C[-3],RC[-2]+1)<=INDEX(C[-3],RC[-1]+1)))"),
    ("merged", "=IF(RC[-1],INDEX(C[-4],RC[-3]+1),INDEX(C[-4],RC[-2]+1))"),
)

LAYOUTS = {"expanded": _EXPANDED, "condensed": _CONDENSED}


@dataclass
class SortNetworkPlan:
    workbook: Workbook
    n: int
    padded: int
    levels: int
    layout: str
    input_col: int = 1

    @property
    def generated_columns(self) -> int:
        return self.levels * len(LAYOUTS[self.layout])

    @property
    def output_col(self) -> int:
        return self.input_col + self.generated_columns


def gen_merge_sort(n: int, layout: str = "expanded", height: Optional[int] = None) -> SortNetworkPlan:
    """Sorting network over ``n`` numbers in C1 rows 2..; row 1 holds headers.

    ``n`` is padded to a power of two; the padding rows are filled with the
    sentinel by :func:`load_sort_input`.
    """
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r} (expected expanded or condensed)")
    if n < 0:
        raise ValueError("n must be non-negative")
    padded = 1 << max(0, math.ceil(math.log2(n))) if n > 1 else max(n, 1)
    levels = int(math.log2(padded))
    rows = padded + 1
    if height is not None and rows > height:
        raise BoundsError(f"sorting {n} items needs {rows} rows, sheet has {height}")
    wb = Workbook(height=rows)
    wb.cells[(1, 1)] = Literal("input")
    spec = LAYOUTS[layout]
    col = 2
    for level in range(levels):
        for name, text in spec:
            f = Formula(r1c1(text))
            wb.cells[(1, col)] = Literal(f"L{level} {name}")
            for r in range(2, rows + 1):
                wb.cells[(r, col)] = f
            if name != "merged":
                wb.hidden_columns.add(col)
            col += 1
    wb.comments[(1, 1)] = "input: numbers to sort, one per row"
    if levels:
        wb.comments[(1, col - 1)] = "sorted output"
    return SortNetworkPlan(wb, n, padded, levels, layout)


def load_sort_input(plan: SortNetworkPlan, values: Sequence[float]) -> None:
    if len(values) != plan.n:
        raise ValueError(f"expected {plan.n} values, got {len(values)}")
    for r in range(plan.padded):
        v = float(values[r]) if r < len(values) else SENTINEL
        if r < len(values) and not -SENTINEL < v < SENTINEL:
            raise ValueError(f"sort values must lie strictly between -1E300 and 1E300, got {v}")
        plan.workbook.cells[(r + 2, plan.input_col)] = Literal(v)


def read_sorted(state: EvalState, plan: SortNetworkPlan) -> list:
    return [state.get(r + 2, plan.output_col) for r in range(plan.n)]


def merge_sort(values: Sequence[float], layout: str = "expanded") -> list:
    """Sort ``values`` with the generated network and return the sorted column."""
    plan = gen_merge_sort(len(values), layout)
    load_sort_input(plan, values)
    return read_sorted(evaluate_workbook(plan.workbook), plan)


# --- quadratic sort (the translator's Sort block on a bare column) --------------


def quadratic_sort(rows: Sequence[Optional[Sequence[object]]], key: int = 1, descending: bool = False) -> list[tuple]:
    """Sort ``rows`` with the formula Sort block.

    ``None`` in ``rows`` stands for an absent (``#N/A``) row, ``None`` inside a
    row for SQL NULL. Returns the data rows in sheet order.
    """
    width = max((len(r) for r in rows if r is not None), default=1)
    height = max(len(rows), 1)
    b = SheetBuilder(height)
    na, null = Formula(r1c1("=NA()")), Formula(r1c1("=INDEX(0,-1)"))
    rows = list(rows) or [None]  # an empty input is one absent row, not a blank (zero) cell
    for i, row in enumerate(rows, 1):
        for j in range(width):
            if row is None:
                b.wb.cells[(i, j + 1)] = na
            else:
                v = row[j]
                b.wb.cells[(i, j + 1)] = null if v is None else Literal(normalize(v))
    b.next_col = width + 1
    out = b.sort(list(range(1, width + 1)), key, descending)
    state = evaluate_workbook(b.wb)
    result = []
    for r in range(1, height + 1):
        vals = [state.get(r, c) for c in out]
        if vals[0] is ErrorKind.NA:
            continue
        result.append(tuple(None if isinstance(v, ErrorKind) else v for v in vals))
    return result


# --- BFS ---------------------------------------------------------------------


@dataclass
class GraphPlan:
    workbook: Workbook
    edges: list[tuple]  # edges as laid out in C1:C2 (None = NA sink)
    start: Vertex
    output_cols: list[int]


def expand_edges(edges: Sequence[tuple], start: Vertex) -> list[tuple]:
    """Give every vertex an outgoing row (sinks get a NULL target) and group edges by target."""
    vertices = list(dict.fromkeys([start] + [v for e in edges for v in e]))
    sources = {u for u, _ in edges}
    full = list(dict.fromkeys(tuple(e) for e in edges)) + [(v, None) for v in vertices if v not in sources]
    order = {v: i for i, v in enumerate(vertices)}
    return sorted(full, key=lambda e: (e[1] is None, order.get(e[1], 0)))


def gen_bfs(edges: Sequence[tuple], start: Vertex) -> GraphPlan:
    """Level of every vertex from ``start``; acyclic graphs only (cycles are circular references)."""
    rows = expand_edges(edges, start)
    h = len(rows)
    b = SheetBuilder(h)
    wb = b.wb
    na = Formula(r1c1("=NA()"))
    for i, (u, v) in enumerate(rows, 1):
        wb.cells[(i, 1)] = Literal(normalize(u))
        wb.cells[(i, 2)] = na if v is None else Literal(normalize(v))
    wb.cells[(1, 3)] = Literal(normalize(start))
    wb.comments[(1, 1)] = "edge source"
    wb.comments[(1, 2)] = "edge target (#N/A for the added sink edges)"
    wb.comments[(1, 3)] = "start vertex"
    b.next_col = 4
    b.begin("BFS")
    b.column("=MATCH(RC1,C2,0)", comment="first edge entering the source vertex")
    b.column("=COUNTIF(C2,RC1)", comment="number of edges entering the source vertex")
    b.column("=IF(RC1=R1C3,0,IF(ISERROR(RC4),1E300,1+MIN(OFFSET(R1C6,RC4-1,0,RC5))))", comment="level of the source vertex")
    b.end()
    levels = b.project([1, 2, 3, 4, 5, 6], [1, 6])
    found = b.select(levels, ra.Cmp("<", ra.Col(2), ra.Const(SENTINEL)), None)
    out = b.sort(b.dedup(found), 2)
    wb.hidden_columns = set(range(4, b.next_col)) - set(out)
    return GraphPlan(wb, rows, start, out)


def bfs_levels(edges: Sequence[tuple], start: Vertex) -> list[tuple]:
    """(vertex, level) pairs in BFS order; raises CircularReference on a cycle."""
    plan = gen_bfs(edges, start)
    state = evaluate_workbook(plan.workbook)
    return _decode(state, plan)


def _decode(state: EvalState, plan: GraphPlan) -> list[tuple]:
    out = []
    for r in range(1, plan.workbook.height + 1):
        vals = [state.get(r, c) for c in plan.output_cols]
        if isinstance(vals[0], ErrorKind):
            continue
        out.append(tuple(vals) if len(vals) > 1 else vals[0])
    return out


# --- DFS ---------------------------------------------------------------------


def dfs_edges(edges: Sequence[tuple]) -> list[tuple]:
    """Drop repeated edges and group by source, keeping each source's child order."""
    uniq = list(dict.fromkeys(tuple(e) for e in edges))
    first = {}
    for u, _ in uniq:
        first.setdefault(u, len(first))
    return sorted(uniq, key=lambda e: first[e[0]])


_DFS_COLUMNS = (
    # (name, row-1 formula or literal, rows 2..H formula)
    ("cur_node", "=R1C3", "=IF(R[-1]C11,R[-1]C10,IF(R[-1]C12,R[-1]C9,R[-1]C7))"),
    ("first_time", True, "=ISERROR(MATCH(RC4,R1C4:R[-1]C4,0))"),
    ("first visit row", None, "=SUMIFS(R1C13:R[-1]C13,R1C4:R[-1]C4,RC4,R1C5:R[-1]C5,TRUE)"),
    ("cur_parent", "=NA()", "=IF(R[-1]C11,R[-1]C4,IF(R[-1]C12,R[-1]C7,INDEX(R1C7:R[-1]C7,RC6)))"),
    ("edge row", None, "=SUMIFS(C13,C1,RC7,C2,RC4)"),
    ("next_sibling", "=NA()", "=IF(INDEX(C1,RC8+1)=RC7,INDEX(C2,RC8+1),NA())"),
    ("first_son", "=IFERROR(INDEX(C2,MATCH(RC4,C1,0)),NA())", "=IFERROR(INDEX(C2,MATCH(RC4,C1,0)),NA())"),
    ("go to son", "=AND(RC5,NOT(ISNA(RC10)))", "=AND(RC5,NOT(ISNA(RC10)))"),
    ("go to sibling", "=AND(NOT(ISNA(RC9)),OR(NOT(RC5),AND(RC5,ISNA(RC10))))",
     "=AND(NOT(ISNA(RC9)),OR(NOT(RC5),AND(RC5,ISNA(RC10))))"),
    ("row", "=ROW()", "=ROW()"),
)


def gen_dfs(edges: Sequence[tuple], start: Vertex) -> GraphPlan:
    """Iterative DFS over ``2*|E|`` steps; the distinct ``cur_node`` values give the discovery order."""
    rows = dfs_edges(edges)
    h = 2 * len(rows) + 1
    b = SheetBuilder(h)
    wb = b.wb
    na = Formula(r1c1("=NA()"))
    for i in range(1, h + 1):
        if i <= len(rows):
            wb.cells[(i, 1)] = Literal(normalize(rows[i - 1][0]))
            wb.cells[(i, 2)] = Literal(normalize(rows[i - 1][1]))
        else:
            wb.cells[(i, 1)] = wb.cells[(i, 2)] = na
    wb.cells[(1, 3)] = Literal(normalize(start))
    wb.comments[(1, 1)] = "edge source (edges grouped by source)"
    wb.comments[(1, 2)] = "edge target"
    wb.comments[(1, 3)] = "start vertex"
    b.next_col = 4
    b.begin("DFS")
    for name, first, body in _DFS_COLUMNS:
        col = b.column(body, first if isinstance(first, str) else None, comment=name)
        if first is None:
            del wb.cells[(1, col)]
        elif not isinstance(first, str):
            wb.cells[(1, col)] = Literal(first)
    b.end()
    b.begin("Visited")
    visited = b.column("=IF(ISERROR(RC4),NA(),RC4)", comment="cur_node with errors as no-row")
    b.end()
    out = b.dedup([visited])
    wb.hidden_columns = set(range(5, b.next_col)) - set(out)
    return GraphPlan(wb, rows, start, out)


def dfs_order(edges: Sequence[tuple], start: Vertex) -> list:
    plan = gen_dfs(edges, start)
    return _decode(evaluate_workbook(plan.workbook), plan)


def cur_nodes(state: EvalState, plan: GraphPlan) -> list:
    """The raw ``cur_node`` column (row by row)."""
    return [state.get(r, 4) for r in range(1, plan.workbook.height + 1)]


__all__ = [
    "GraphPlan", "SENTINEL", "SortNetworkPlan", "bfs_levels", "cur_nodes", "dfs_edges", "dfs_order",
    "expand_edges", "gen_bfs", "gen_dfs", "gen_merge_sort", "load_sort_input", "merge_sort",
    "quadratic_sort", "read_sorted",
]
