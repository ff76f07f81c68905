"""Cell values, R1C1-style references and the sparse single-sheet workbook."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

DEFAULT_HEIGHT = 1024
MAX_COLUMNS = 16384


class ErrorKind(enum.Enum):
    """Spreadsheet error codes. ``NA`` is the no-data null, ``VALUE`` the SQL null."""

    NA = "#N/A"
    VALUE = "#VALUE!"
    DIV0 = "#DIV/0!"
    REF = "#REF!"
    NAME = "#NAME?"
    NUM = "#NUM!"

    def __repr__(self) -> str:
        return f"ErrorKind.{self.name}"

    @property
    def token(self) -> str:
        return self.value


# `#N/A!` is how the error is often written in prose; accept it on input.
ERROR_TOKENS: dict[str, ErrorKind] = {k.value: k for k in ErrorKind}
ERROR_TOKENS["#N/A!"] = ErrorKind.NA


class _Blank:
    _instance: _Blank | None = None

    def __new__(cls) -> _Blank:
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BLANK"

    def __reduce__(self):
        return (_Blank, ())


BLANK = _Blank()

# A value is a float (Number), str (Text), bool (Boolean), BLANK or an ErrorKind.
CellValue = Union[float, str, bool, _Blank, ErrorKind]


def is_error(v: object) -> bool:
    return isinstance(v, ErrorKind)


def is_number(v: object) -> bool:
    return isinstance(v, float) or (isinstance(v, int) and not isinstance(v, bool))


def number(x: float) -> CellValue:
    """Wrap an arithmetic result, mapping NaN/Inf to ``#NUM!``."""
    x = float(x)
    if math.isfinite(x):
        return x
    return ErrorKind.NUM


def normalize(v: object) -> CellValue:
    """Coerce a Python scalar into the value universe (ints become floats)."""
    if v is None:
        return BLANK
    if isinstance(v, (bool, str, ErrorKind, _Blank)):
        return v
    if isinstance(v, (int, float)):
        return number(v)
    raise TypeError(f"not a cell value: {v!r}")


def null_class(v: CellValue) -> str:
    """Partition used by ISNA / ISERR: ``"na"``, ``"err"`` or ``"value"``."""
    if v is ErrorKind.NA:
        return "na"
    if isinstance(v, ErrorKind):
        return "err"
    return "value"


def format_number(x: float) -> str:
    """Shortest text that parses back to exactly ``x``."""
    if x == 0:
        return "0"
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x).upper()


def column_letters(col: int) -> str:
    if col < 1:
        raise ValueError(f"column must be >= 1, got {col}")
    out = []
    while col:
        col, rem = divmod(col - 1, 26)
        out.append(chr(ord("A") + rem))
    return "".join(reversed(out))


def column_number(letters: str) -> int:
    n = 0
    for ch in letters.upper():
        if not "A" <= ch <= "Z":
            raise ValueError(f"bad column letters: {letters!r}")
        n = n * 26 + (ord(ch) - ord("A") + 1)
    return n


class RefResolutionError(ValueError):
    """A relative reference resolved to a coordinate below 1."""


@dataclass(frozen=True)
class CellRef:
    """A cell reference in R1C1 terms.

    ``row``/``col`` hold either an absolute coordinate (``*_rel`` False) or a
    signed offset from the anchor cell (``*_rel`` True). ``RC`` is the
    all-relative zero-offset reference.
    """

    row: int = 0
    col: int = 0
    row_rel: bool = True
    col_rel: bool = True

    def __post_init__(self) -> None:
        if not self.row_rel and self.row < 1:
            raise ValueError(f"absolute row must be >= 1, got {self.row}")
        if not self.col_rel and self.col < 1:
            raise ValueError(f"absolute column must be >= 1, got {self.col}")

    @classmethod
    def absolute(cls, row: int, col: int) -> CellRef:
        return cls(row, col, False, False)

    def resolve(self, anchor: tuple[int, int]) -> tuple[int, int]:
        return resolve_ref(self, anchor)

    def r1c1(self) -> str:
        return "R" + _coord_r1c1(self.row, self.row_rel) + "C" + _coord_r1c1(self.col, self.col_rel)


def _coord_r1c1(value: int, rel: bool) -> str:
    if not rel:
        return str(value)
    return f"[{value}]" if value else ""


def resolve_ref(ref: CellRef, anchor: tuple[int, int]) -> tuple[int, int]:
    ar, ac = anchor
    if ar < 1 or ac < 1:
        raise ValueError(f"anchor must be >= (1,1), got {anchor}")
    r = ar + ref.row if ref.row_rel else ref.row
    c = ac + ref.col if ref.col_rel else ref.col
    if r < 1 or c < 1:
        raise RefResolutionError(f"{ref.r1c1()} at R{ar}C{ac} resolves to ({r},{c})")
    return r, c


@dataclass(frozen=True)
class Coord:
    """One axis of a whole-row / whole-column reference."""

    value: int
    rel: bool = False

    def resolve(self, anchor: int) -> int:
        v = anchor + self.value if self.rel else self.value
        if v < 1:
            raise RefResolutionError(f"coordinate resolves to {v}")
        return v


@dataclass(frozen=True)
class RangeRef:
    """Exactly one of a corner pair, a whole column or a whole row."""

    top_left: CellRef | None = None
    bottom_right: CellRef | None = None
    whole_column: Coord | None = None
    whole_row: Coord | None = None

    def __post_init__(self) -> None:
        kinds = [self.top_left is not None, self.whole_column is not None, self.whole_row is not None]
        if sum(kinds) != 1 or (self.top_left is None) != (self.bottom_right is None):
            raise ValueError("RangeRef needs exactly one of corners / whole_column / whole_row")

    @classmethod
    def column(cls, col: int, rel: bool = False) -> RangeRef:
        return cls(whole_column=Coord(col, rel))

    @classmethod
    def row(cls, row: int, rel: bool = False) -> RangeRef:
        return cls(whole_row=Coord(row, rel))

    @classmethod
    def corners(cls, a: CellRef, b: CellRef) -> RangeRef:
        return cls(top_left=a, bottom_right=b)

    def resolve(self, anchor: tuple[int, int], height: int, width: int) -> tuple[int, int, int, int]:
        """Return ``(r1, c1, r2, c2)``, normalised so that r1<=r2 and c1<=c2."""
        if self.whole_column is not None:
            c = self.whole_column.resolve(anchor[1])
            return 1, c, height, c
        if self.whole_row is not None:
            r = self.whole_row.resolve(anchor[0])
            return r, 1, r, width
        assert self.top_left is not None and self.bottom_right is not None
        r1, c1 = resolve_ref(self.top_left, anchor)
        r2, c2 = resolve_ref(self.bottom_right, anchor)
        return min(r1, r2), min(c1, c2), max(r1, r2), max(c1, c2)

    def r1c1(self) -> str:
        if self.whole_column is not None:
            return "C" + _coord_r1c1(self.whole_column.value, self.whole_column.rel)
        if self.whole_row is not None:
            return "R" + _coord_r1c1(self.whole_row.value, self.whole_row.rel)
        assert self.top_left is not None and self.bottom_right is not None
        return f"{self.top_left.r1c1()}:{self.bottom_right.r1c1()}"


@dataclass(frozen=True, eq=False)
class Literal:
    value: CellValue

    # Type-strict: 1.0, True and "1" are distinct literals.
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Literal):
            return NotImplemented
        return type(self.value) is type(other.value) and self.value == other.value

    def __hash__(self) -> int:
        return hash((type(self.value), self.value))


@dataclass(frozen=True)
class Formula:
    """A formula cell; ``expr`` is a formula AST (see :mod:`sqlsheet.formula`)."""

    expr: object


Cell = Union[Literal, Formula]
BLANK_CELL = Literal(BLANK)


class BoundsError(ValueError):
    """A write or fill outside the workbook's logical grid."""


@dataclass
class Workbook:
    """Sparse single worksheet with a fixed logical height.

    Whole-column ranges cover rows ``1..height``. ``meta`` carries plan
    layout (input blocks, output columns) through the grid file format.
    """

    height: int = DEFAULT_HEIGHT
    max_col: int = MAX_COLUMNS
    cells: dict[tuple[int, int], Cell] = field(default_factory=dict)
    comments: dict[tuple[int, int], str] = field(default_factory=dict)
    hidden_columns: set[int] = field(default_factory=set)
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.height < 1:
            raise ValueError("height must be positive")

    def _check(self, row: int, col: int) -> None:
        if not (1 <= row <= self.height and 1 <= col <= self.max_col):
            raise BoundsError(f"R{row}C{col} outside 1..{self.height} x 1..{self.max_col}")

    def write(self, row: int, col: int, cell: Cell | CellValue) -> None:
        self._check(row, col)
        if not isinstance(cell, (Literal, Formula)):
            cell = Literal(normalize(cell))
        if isinstance(cell, Literal) and cell.value is BLANK:
            self.cells.pop((row, col), None)
        else:
            self.cells[(row, col)] = cell

    def read(self, row: int, col: int) -> Cell:
        if row < 1 or col < 1:
            raise BoundsError(f"R{row}C{col} has a coordinate below 1")
        return self.cells.get((row, col), BLANK_CELL)

    def comment(self, row: int, col: int, text: str) -> None:
        self._check(row, col)
        self.comments[(row, col)] = text

    @property
    def used_columns(self) -> int:
        return max((c for _, c in self.cells), default=0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Workbook):
            return NotImplemented
        return (
            self.height == other.height
            and self.cells == other.cells
            and self.comments == other.comments
            and self.hidden_columns == other.hidden_columns
            and self.meta == other.meta
        )


def read_cell(wb: Workbook, at: tuple[int, int]) -> Cell:
    return wb.read(*at)
