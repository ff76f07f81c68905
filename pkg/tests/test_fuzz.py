from dataclasses import replace

from sqlsheet.fuzz import Case, check_case, minimize, random_case, verify
from sqlsheet.sql import parse_ddl, parse_sql


def test_cases_are_reproducible():
    assert random_case(42) == random_case(42)
    assert random_case(42) != random_case(43)


def test_generated_queries_parse_and_cover_features():
    text = " ".join(random_case(s).sql.upper() for s in range(300))
    for feature in ["JOIN", "GROUP BY", "DISTINCT", "NOT IN", "EXISTS", "IS NULL", "UNION", "EXCEPT",
                    "INTERSECT", "ORDER BY", "COUNT(", "SUM(", "AVG("]:
        assert feature in text, feature
    for s in range(50):
        case = random_case(s)
        parse_sql(case.sql, parse_ddl(case.ddl))


def test_check_case_and_size_skips():
    case = Case(0, "CREATE TABLE t (a int);", "SELECT a FROM t ORDER BY a DESC", {"t": [(1,), (None,), (3,)]})
    out = check_case(case, 8)
    assert out.ok and out.actual == [(3.0,), (1.0,), (None,)]
    big = replace(case, db={"t": [(i,) for i in range(10)]})
    assert check_case(big, 8).reason


def test_minimize_removes_irrelevant_rows():
    case = Case(0, "CREATE TABLE t (a int);", "SELECT a FROM t", {"t": [(i,) for i in range(6)]})
    small = minimize(case, 8, failing=lambda c: (3,) in c.db["t"])
    assert small.db == {"t": [(3,)]}


def test_verify_report():
    report = verify(25, seed=9, height=64)
    assert report.ok and report.checked == 25
    assert "seed" in random_case(1).describe()
