import io
import zipfile

import pytest

from sqlsheet import algebra as ra
from sqlsheet.codegen import DataError, decode_output, emit_plan
from sqlsheet.evaluator import evaluate_workbook
from sqlsheet.formula import NotationStyle, parse_formula, r1c1
from sqlsheet.grid import ErrorKind, Formula, Literal, Workbook
from sqlsheet.sheetio import (
    GridFormatError, REQUIRED_PARTS, cell_content, dumps_grid, load_csv, loads_grid, parse_csv, read_grid,
    validate_xlsx, write_grid, write_xlsx, xlsx_bytes, xlsx_parts,
)

from corpus import corpus

CORPUS = list(corpus())


# --- grid format -------------------------------------------------------------------


@pytest.mark.parametrize("style", list(NotationStyle))
@pytest.mark.parametrize("name,wb", CORPUS, ids=[n for n, _ in CORPUS])
def test_grid_round_trip(name, wb, style):
    text = dumps_grid(wb, style)
    again = loads_grid(text)
    assert again == wb
    assert dumps_grid(again, style) == text


def test_grid_round_trip_preserves_shared_formulas():
    _, wb = CORPUS[0]
    again = loads_grid(dumps_grid(wb))
    col = max(c for _, c in wb.cells)
    ids = {id(again.cells[(r, col)]) for r in range(2, wb.height + 1) if (r, col) in again.cells}
    assert len(ids) <= 1


def test_grid_cell_lines():
    wb = Workbook(height=3)
    wb.cells[(2, 1)] = Literal(ErrorKind.NA)
    wb.cells[(1, 2)] = Formula(parse_formula("=COUNTA(C1)-COUNTIFS(C1,NA())"))
    wb.cells[(3, 1)] = Literal("tab\there")
    text = dumps_grid(wb)
    assert "R2C1\t#N/A" in text.splitlines()
    assert "R1C2\t=COUNTA(C1)-COUNTIFS(C1,NA())" in text.splitlines()
    assert 'R3C1\t"tab\\there"' in text.splitlines()
    assert loads_grid(text) == wb


def test_grid_a1_notation_text():
    wb = Workbook(height=3)
    wb.cells[(3, 2)] = Formula(r1c1("=R[-1]C+RC1"))
    assert "R3C2\t=B2+$A3" in dumps_grid(wb, NotationStyle.A1)
    assert cell_content(wb.cells[(3, 2)], (3, 2)) == "=R[-1]C+RC1"


def test_grid_file_io(tmp_path):
    _, wb = CORPUS[1]
    path = tmp_path / "plan.grid"
    write_grid(wb, path)
    assert read_grid(path) == wb


@pytest.mark.parametrize(
    "text,line",
    [
        ("", 1),
        ("#grid 2 height=3 notation=R1C1 columns=1 max_col=10\n", 1),
        ("#grid 1 height=3 notation=R1C1 columns=1 max_col=10\nR1C1 5\n", 2),
        ("#grid 1 height=3 notation=R1C1 columns=1 max_col=10\nR1C1\t5\nR9C1\t1\n", 3),
        ("#grid 1 height=3 notation=R1C1 columns=1 max_col=10\n\nR1C1\t=SUM(\n", 3),
        ("#grid 1 height=3 notation=R1C1 columns=1 max_col=10\nR1C1\tbare\n", 2),
        ("#grid 1 height=3 notation=R1C1 columns=1 max_col=10\n#hidden x\n", 2),
        ("#grid 1 height=3 notation=R1C1 columns=1 max_col=10\n#bogus\n", 2),
        ("#grid 1 height=3 notation=R1C1 columns=1 max_col=10\nR1C1\t\"a\\q\"\n", 2),
    ],
)
def test_grid_errors_report_line(text, line):
    with pytest.raises(GridFormatError) as info:
        loads_grid(text)
    assert info.value.line == line and str(info.value).startswith(f"line {line}:")


# --- XLSX ---------------------------------------------------------------------------


def test_xlsx_required_parts_and_validator():
    _, wb = CORPUS[0]
    data = xlsx_bytes(wb)
    assert validate_xlsx(data) == []
    names = set(zipfile.ZipFile(io.BytesIO(data)).namelist())
    assert set(REQUIRED_PARTS) <= names


@pytest.mark.parametrize("name,wb", CORPUS, ids=[n for n, _ in CORPUS])
def test_xlsx_corpus_validates(name, wb):
    assert validate_xlsx(xlsx_bytes(wb)) == []


def test_xlsx_empty_and_single_cell(tmp_path):
    assert validate_xlsx(xlsx_bytes(Workbook(height=1))) == []
    wb = Workbook(height=1)
    wb.cells[(1, 1)] = Literal(ErrorKind.NA)
    path = tmp_path / "one.xlsx"
    write_xlsx(wb, path)
    assert validate_xlsx(path) == []
    sheet = xlsx_parts(wb)["xl/worksheets/sheet1.xml"]
    assert "<f>NA()</f>" in sheet


def test_xlsx_hidden_columns_comments_and_formulas():
    wb = Workbook(height=2)
    wb.cells[(1, 1)] = Literal("x&<y>")
    wb.cells[(2, 3)] = Formula(r1c1('=IF(R[-1]C1="a",1,0)'))
    wb.hidden_columns = {2}
    wb.comments[(1, 3)] = "helper"
    parts = xlsx_parts(wb)
    sheet = parts["xl/worksheets/sheet1.xml"]
    assert 'hidden="1"' in sheet and "x&amp;&lt;y&gt;" in sheet
    assert '<f>IF($A1="a",1,0)</f>' in sheet
    assert any("comments" in p for p in parts)
    assert 'fullCalcOnLoad="1"' in parts["xl/workbook.xml"]
    assert validate_xlsx(xlsx_bytes(wb)) == []


def test_validator_reports_problems():
    assert validate_xlsx(b"not a zip")
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("[Content_Types].xml", "<Types")
    problems = validate_xlsx(buf.getvalue())
    assert any("missing part" in p for p in problems)
    assert any("well-formed" in p for p in problems)


# --- CSV ------------------------------------------------------------------------------


def test_parse_csv_typing():
    rows = parse_csv('a,"007",7,,"",1e3\n"x,y","say ""hi"""\n\n-2.5,\n')
    assert rows == [["a", "007", 7.0, None, None, 1000.0], ["x,y", 'say "hi"'], [-2.5, None]]
    assert parse_csv("") == []
    with pytest.raises(DataError):
        parse_csv('"open')


def test_load_csv_fills_na_and_null():
    plan = emit_plan(ra.Project(ra.Reference("t", 2), (1, 2)), 5)
    n = load_csv("a,b\n1,x\n,y\n", plan, "t", ["a", "b"], is_text=True)
    assert n == 2
    state = evaluate_workbook(plan.workbook)
    assert state.get(2, 1) is ErrorKind.VALUE
    assert [state.get(r, 1) for r in range(3, 6)] == [ErrorKind.NA] * 3
    assert sorted(decode_output(state, plan), key=repr) == [(1.0, "x"), (None, "y")]


def test_load_csv_header_modes(tmp_path):
    plan = emit_plan(ra.Reference("t", 1), 4)
    path = tmp_path / "t.csv"
    path.write_text("v\n3\n")
    assert load_csv(path, plan, "t", ["v"]) == 1
    assert load_csv(path, plan, "t", ["v"], header=False) == 2
    assert load_csv(path, plan, "t", [], header=True) == 1
    with pytest.raises(DataError):
        load_csv("1,2\n", plan, "t", is_text=True)
