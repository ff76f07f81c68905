"""Workbook serialization: plain-text grid files, minimal XLSX packages, CSV input.

Grid file layout (version 1)::

    #grid 1 height=<H> notation=<R1C1|A1> columns=<N> max_col=<M>
    #meta <key>\t<value>
    #hidden <col>,<col>,...
    # R<r>C<c>\t<annotation>
    R<r>C<c>\t<content>

``content`` is ``=<formula>`` or a literal (number, ``"``-quoted text,
TRUE/FALSE, an error token). Tabs, newlines and backslashes inside values are
escaped as ``\\t``, ``\\n``, ``\\r`` and ``\\\\``.
"""

from __future__ import annotations

import io
import re
import zipfile
from pathlib import Path
from typing import BinaryIO, Optional, Sequence, Union
from xml.etree import ElementTree
from xml.sax.saxutils import escape as xml_escape

from .codegen import DataError, WorksheetPlan, load_table
from .formula import NotationStyle, parse_formula, parse_literal, render, render_literal
from .grid import ErrorKind, Formula, Literal, Workbook, column_letters, format_number

GRID_VERSION = 1
PathLike = Union[str, Path]


class GridFormatError(ValueError):
    def __init__(self, message: str, line: int) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}")


# --- escaping ----------------------------------------------------------------

_ESC = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESC = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def _escape(text: str) -> str:
    return "".join(_ESC.get(ch, ch) for ch in text)


def _unescape(text: str, line: int) -> str:
    out, i = [], 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text) or text[i + 1] not in _UNESC:
                raise GridFormatError(f"bad escape in {text!r}", line)
            out.append(_UNESC[text[i + 1]])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


# --- grid format -------------------------------------------------------------


def cell_content(cell: Union[Literal, Formula], at: tuple[int, int], style: NotationStyle = NotationStyle.R1C1) -> str:
    if isinstance(cell, Formula):
        return "=" + render(cell.expr, style, at)
    return render_literal(cell.value)


def dumps_grid(wb: Workbook, style: NotationStyle = NotationStyle.R1C1) -> str:
    lines = [
        f"#grid {GRID_VERSION} height={wb.height} notation={style.name} columns={wb.used_columns} max_col={wb.max_col}"
    ]
    for key in sorted(wb.meta):
        lines.append(f"#meta {_escape(key)}\t{_escape(wb.meta[key])}")
    if wb.hidden_columns:
        lines.append("#hidden " + ",".join(map(str, sorted(wb.hidden_columns))))
    for (r, c) in sorted(wb.comments):
        lines.append(f"# R{r}C{c}\t{_escape(wb.comments[(r, c)])}")
    cache: dict[int, str] = {}
    for (r, c) in sorted(wb.cells):
        cell = wb.cells[(r, c)]
        if isinstance(cell, Formula) and style is NotationStyle.R1C1:
            text = cache.get(id(cell))
            if text is None:
                text = cache[id(cell)] = _escape(cell_content(cell, (r, c), style))
        else:
            text = _escape(cell_content(cell, (r, c), style))
        lines.append(f"R{r}C{c}\t{text}")
    return "\n".join(lines) + "\n"


_HEADER = re.compile(r"#grid (\d+) height=(\d+) notation=(R1C1|A1) columns=(\d+) max_col=(\d+)")
_CELL = re.compile(r"R(\d+)C(\d+)")


def loads_grid(text: str) -> Workbook:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GridFormatError("empty grid file", 1)
    m = _HEADER.fullmatch(lines[0])
    if not m:
        raise GridFormatError("missing or malformed '#grid' header", 1)
    if int(m.group(1)) != GRID_VERSION:
        raise GridFormatError(f"unsupported grid version {m.group(1)}", 1)
    style = NotationStyle[m.group(3)]
    wb = Workbook(height=int(m.group(2)), max_col=int(m.group(5)))
    formulas: dict[str, Formula] = {}
    for n, line in enumerate(lines[1:], 2):
        if not line:
            continue
        if line.startswith("#meta "):
            key, sep, value = line[6:].partition("\t")
            if not sep:
                raise GridFormatError("meta line needs a tab-separated value", n)
            wb.meta[_unescape(key, n)] = _unescape(value, n)
        elif line.startswith("#hidden "):
            try:
                wb.hidden_columns = {int(c) for c in line[8:].split(",") if c}
            except ValueError:
                raise GridFormatError("hidden columns must be integers", n) from None
        elif line.startswith("# "):
            at, text = _split_cell(line[2:], n)
            wb.comments[at] = _unescape(text, n)
        elif line.startswith("#"):
            raise GridFormatError(f"unknown directive {line.split()[0]!r}", n)
        else:
            at, content = _split_cell(line, n)
            if not (1 <= at[0] <= wb.height and 1 <= at[1] <= wb.max_col):
                raise GridFormatError(f"cell R{at[0]}C{at[1]} outside the {wb.height}-row grid", n)
            wb.cells[at] = _parse_content(_unescape(content, n), at, style, n, formulas)
    return wb


def _split_cell(line: str, n: int) -> tuple[tuple[int, int], str]:
    ref, sep, rest = line.partition("\t")
    m = _CELL.fullmatch(ref)
    if not m or not sep:
        raise GridFormatError(f"expected 'R<r>C<c><TAB><content>', got {line[:40]!r}", n)
    return (int(m.group(1)), int(m.group(2))), rest


def _parse_content(text: str, at, style: NotationStyle, n: int, cache: dict[str, Formula]) -> Union[Literal, Formula]:
    if text.startswith("="):
        if style is NotationStyle.R1C1 and text in cache:
            return cache[text]
        try:
            f = Formula(parse_formula(text, style, at))
        except ValueError as exc:
            raise GridFormatError(str(exc), n) from None
        if style is NotationStyle.R1C1:
            cache[text] = f
        return f
    value = parse_literal(text)
    if value is None:
        raise GridFormatError(f"malformed literal {text!r}", n)
    return Literal(value)


def write_grid(wb: Workbook, path: PathLike, style: NotationStyle = NotationStyle.R1C1) -> None:
    Path(path).write_text(dumps_grid(wb, style), encoding="utf-8")


def read_grid(path: PathLike) -> Workbook:
    return loads_grid(Path(path).read_text(encoding="utf-8"))


# --- XLSX --------------------------------------------------------------------

_NS = "http://schemas.openxmlformats.org/spreadsheetml/2006/main"
_REL_NS = "http://schemas.openxmlformats.org/officeDocument/2006/relationships"
_PKG_REL_NS = "http://schemas.openxmlformats.org/package/2006/relationships"
_CT_NS = "http://schemas.openxmlformats.org/package/2006/content-types"
_DOC_REL = "http://schemas.openxmlformats.org/officeDocument/2006/relationships"

REQUIRED_PARTS = (
    "[Content_Types].xml",
    "_rels/.rels",
    "xl/workbook.xml",
    "xl/_rels/workbook.xml.rels",
    "xl/worksheets/sheet1.xml",
)

_ERROR_FORMULAS = {ErrorKind.NA: "NA()", ErrorKind.VALUE: "INDEX(0,-1)", ErrorKind.DIV0: "1/0"}

_XML_HEAD = '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>\n'


def _a1(r: int, c: int) -> str:
    return f"{column_letters(c)}{r}"


def _cell_xml(r: int, c: int, cell: Union[Literal, Formula]) -> str:
    ref = _a1(r, c)
    if isinstance(cell, Formula):
        return f'<c r="{ref}"><f>{xml_escape(render(cell.expr, NotationStyle.A1, (r, c)))}</f></c>'
    v = cell.value
    if isinstance(v, ErrorKind):
        return f'<c r="{ref}"><f>{xml_escape(_ERROR_FORMULAS.get(v, v.token))}</f></c>'
    if isinstance(v, bool):
        return f'<c r="{ref}" t="b"><v>{int(v)}</v></c>'
    if isinstance(v, float):
        return f'<c r="{ref}"><v>{format_number(v)}</v></c>'
    return f'<c r="{ref}" t="inlineStr"><is><t xml:space="preserve">{xml_escape(v)}</t></is></c>'


def _sheet_xml(wb: Workbook) -> str:
    parts = [_XML_HEAD, f'<worksheet xmlns="{_NS}" xmlns:r="{_REL_NS}">']
    if wb.hidden_columns:
        parts.append("<cols>")
        for c in sorted(wb.hidden_columns):
            parts.append(f'<col min="{c}" max="{c}" width="9" hidden="1" customWidth="1"/>')
        parts.append("</cols>")
    parts.append("<sheetData>")
    rows: dict[int, list[int]] = {}
    for (r, c) in wb.cells:
        rows.setdefault(r, []).append(c)
    for r in sorted(rows):
        parts.append(f'<row r="{r}">')
        parts.extend(_cell_xml(r, c, wb.cells[(r, c)]) for c in sorted(rows[r]))
        parts.append("</row>")
    parts.append("</sheetData>")
    if wb.comments:
        parts.append('<legacyDrawing r:id="rId2"/>')
    parts.append("</worksheet>")
    return "".join(parts)


def _comments_xml(wb: Workbook) -> str:
    items = "".join(
        f'<comment ref="{_a1(r, c)}" authorId="0"><text><t xml:space="preserve">{xml_escape(text)}</t></text></comment>'
        for (r, c), text in sorted(wb.comments.items())
    )
    return f'{_XML_HEAD}<comments xmlns="{_NS}"><authors><author>sqlsheet</author></authors><commentList>{items}</commentList></comments>'


def _vml_xml(wb: Workbook) -> str:
    shapes = []
    for i, (r, c) in enumerate(sorted(wb.comments), 1025):
        shapes.append(
            f'<v:shape id="_x0000_s{i}" type="#_x0000_t202" style="position:absolute;visibility:hidden;width:160pt;height:60pt" '
            'fillcolor="#ffffe1"><v:textbox/><x:ClientData ObjectType="Note"><x:MoveWithCells/><x:SizeWithCells/>'
            f"<x:AutoFill>False</x:AutoFill><x:Row>{r - 1}</x:Row><x:Column>{c - 1}</x:Column></x:ClientData></v:shape>"
        )
    return (
        '<xml xmlns:v="urn:schemas-microsoft-com:vml" xmlns:o="urn:schemas-microsoft-com:office:office" '
        'xmlns:x="urn:schemas-microsoft-com:office:excel">'
        '<v:shapetype id="_x0000_t202" coordsize="21600,21600" o:spt="202" path="m,l,21600r21600,l21600,xe">'
        '<v:stroke joinstyle="miter"/><v:path gradientshapeok="t" o:connecttype="rect"/></v:shapetype>'
        + "".join(shapes)
        + "</xml>"
    )


def xlsx_parts(wb: Workbook) -> dict[str, str]:
    """Every part of the package, keyed by its zip name."""
    has_comments = bool(wb.comments)
    overrides = [
        ("/xl/workbook.xml", "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml"),
        ("/xl/worksheets/sheet1.xml", "application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml"),
    ]
    if has_comments:
        overrides.append(("/xl/comments1.xml", "application/vnd.openxmlformats-officedocument.spreadsheetml.comments+xml"))
    content_types = (
        f'{_XML_HEAD}<Types xmlns="{_CT_NS}">'
        '<Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>'
        '<Default Extension="xml" ContentType="application/xml"/>'
        '<Default Extension="vml" ContentType="application/vnd.openxmlformats-officedocument.vmlDrawing"/>'
        + "".join(f'<Override PartName="{p}" ContentType="{t}"/>' for p, t in overrides)
        + "</Types>"
    )
    parts = {
        "[Content_Types].xml": content_types,
        "_rels/.rels": (
            f'{_XML_HEAD}<Relationships xmlns="{_PKG_REL_NS}">'
            f'<Relationship Id="rId1" Type="{_DOC_REL}/officeDocument" Target="xl/workbook.xml"/></Relationships>'
        ),
        "xl/workbook.xml": (
            f'{_XML_HEAD}<workbook xmlns="{_NS}" xmlns:r="{_REL_NS}"><sheets>'
            '<sheet name="Sheet1" sheetId="1" r:id="rId1"/></sheets><calcPr calcId="0" fullCalcOnLoad="1"/></workbook>'
        ),
        "xl/_rels/workbook.xml.rels": (
            f'{_XML_HEAD}<Relationships xmlns="{_PKG_REL_NS}">'
            f'<Relationship Id="rId1" Type="{_DOC_REL}/worksheet" Target="worksheets/sheet1.xml"/></Relationships>'
        ),
        "xl/worksheets/sheet1.xml": _sheet_xml(wb),
    }
    if has_comments:
        parts["xl/worksheets/_rels/sheet1.xml.rels"] = (
            f'{_XML_HEAD}<Relationships xmlns="{_PKG_REL_NS}">'
            f'<Relationship Id="rId1" Type="{_DOC_REL}/comments" Target="../comments1.xml"/>'
            f'<Relationship Id="rId2" Type="{_DOC_REL}/vmlDrawing" Target="../drawings/vmlDrawing1.vml"/>'
            "</Relationships>"
        )
        parts["xl/comments1.xml"] = _comments_xml(wb)
        parts["xl/drawings/vmlDrawing1.vml"] = _vml_xml(wb)
    return parts


def write_xlsx(wb: Workbook, target: Union[PathLike, BinaryIO]) -> None:
    """Write ``wb`` as a single-sheet XLSX package without cached values."""
    parts = xlsx_parts(wb)  # render first so a RenderError leaves no partial file
    with zipfile.ZipFile(target, "w", zipfile.ZIP_DEFLATED) as zf:
        for name, body in parts.items():
            zf.writestr(name, body)


def xlsx_bytes(wb: Workbook) -> bytes:
    buf = io.BytesIO()
    write_xlsx(wb, buf)
    return buf.getvalue()


def validate_xlsx(source: Union[PathLike, BinaryIO, bytes]) -> list[str]:
    """Structural checks on an XLSX package; returns a list of problems (empty if valid)."""
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    problems: list[str] = []
    try:
        zf = zipfile.ZipFile(source)
    except (zipfile.BadZipFile, OSError) as exc:
        return [f"not a zip archive: {exc}"]
    with zf:
        names = set(zf.namelist())
        bad = zf.testzip()
        if bad:
            problems.append(f"corrupt member {bad}")
        for part in REQUIRED_PARTS:
            if part not in names:
                problems.append(f"missing part {part}")
        trees = {}
        for name in sorted(names):
            if name.endswith((".xml", ".rels")):
                try:
                    trees[name] = ElementTree.fromstring(zf.read(name))
                except ElementTree.ParseError as exc:
                    problems.append(f"{name} is not well-formed XML: {exc}")
        ct = trees.get("[Content_Types].xml")
        if ct is not None:
            declared = {o.get("PartName") for o in ct.iter(f"{{{_CT_NS}}}Override")}
            for part in ("/xl/workbook.xml", "/xl/worksheets/sheet1.xml"):
                if part not in declared:
                    problems.append(f"content type for {part} not declared")
            for part in declared:
                if part.lstrip("/") not in names:
                    problems.append(f"declared part {part} is absent")
        for name, tree in trees.items():
            if not name.endswith(".rels"):
                continue
            base = name.replace("_rels/", "").removesuffix(".rels")
            folder = base.rsplit("/", 1)[0] if "/" in base else ""
            for rel in tree.iter(f"{{{_PKG_REL_NS}}}Relationship"):
                target = _resolve(folder, rel.get("Target", ""))
                if target not in names:
                    problems.append(f"{name}: relationship target {target} is absent")
        sheet = trees.get("xl/worksheets/sheet1.xml")
        if sheet is not None:
            for c in sheet.iter(f"{{{_NS}}}c"):
                if not re.fullmatch(r"[A-Z]{1,3}[1-9]\d*", c.get("r", "")):
                    problems.append(f"bad cell reference {c.get('r')!r}")
                    break
    return problems


def _resolve(folder: str, target: str) -> str:
    parts = (folder.split("/") if folder else []) + target.split("/")
    out: list[str] = []
    for p in parts:
        if p == "..":
            if out:
                out.pop()
        elif p and p != ".":
            out.append(p)
    return "/".join(out)


# --- CSV ---------------------------------------------------------------------


_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")


def parse_csv(text: str) -> list[list[Optional[object]]]:
    """RFC-4180 style CSV keeping the quoted/unquoted distinction.

    Quoted fields are text; unquoted fields are numbers when they parse as
    one, else text; empty fields (quoted or not) are ``None`` (NULL).
    """
    rows: list[list[Optional[object]]] = []
    row: list[Optional[object]] = []
    i, n = 0, len(text)
    if not text.strip():
        return rows
    while i <= n:
        if i < n and text[i] == '"':
            j, buf = i + 1, []
            while True:
                if j >= n:
                    raise DataError("unterminated quoted CSV field")
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        buf.append('"')
                        j += 2
                        continue
                    j += 1
                    break
                buf.append(text[j])
                j += 1
            value = "".join(buf)
            row.append(value if value else None)
            i = j
            if i < n and text[i] not in ",\r\n":
                raise DataError(f"unexpected character after quoted field at offset {i}")
        else:
            j = i
            while j < n and text[j] not in ",\r\n":
                j += 1
            raw = text[i:j].strip()
            row.append(None if raw == "" else float(raw) if _NUMBER.fullmatch(raw) else raw)
            i = j
        if i >= n:
            rows.append(row)
            break
        ch = text[i]
        if ch == ",":
            i += 1
            if i == n:
                row.append(None)
                rows.append(row)
                break
            continue
        i += 2 if text.startswith("\r\n", i) else 1
        rows.append(row)
        row = []
        if i >= n:
            break
    return [r for r in rows if r != [None]]  # blank lines


def load_csv(
    source: Union[PathLike, str],
    plan: WorksheetPlan,
    table: str,
    columns: Sequence[str] = (),
    header: Union[bool, str] = "auto",
    is_text: bool = False,
) -> int:
    """Load a CSV file (or CSV text when ``is_text``) into ``table``'s input block.

    With ``header="auto"`` a first row equal to ``columns`` (case-insensitive)
    is skipped. Returns the number of data rows written.
    """
    text = source if is_text else Path(source).read_text(encoding="utf-8-sig")
    rows = parse_csv(str(text))
    if rows and header is not False:
        names = [str(v).lower() if v is not None else "" for v in rows[0]]
        if header is True or (columns and names == [c.lower() for c in columns]):
            rows = rows[1:]
    load_table(plan, table, [tuple(r) for r in rows])
    return len(rows)
