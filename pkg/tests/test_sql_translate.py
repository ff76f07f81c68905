import pytest

from sqlsheet import algebra as ra
from sqlsheet.sql import (
    AmbiguousColumn, SqlSyntaxError, UnknownColumn, UnknownTable, UnsupportedFeature, parse_ddl, parse_sql,
    sql_text, tokenize,
)
from sqlsheet.translate import translate

DDL = """
CREATE TABLE connections (departure VARCHAR(20) NOT NULL, arrival text, price int, PRIMARY KEY (departure, arrival));
CREATE TABLE transactions (address text, amount int, kind text);
CREATE TABLE t (a int, b int);
"""
S = parse_ddl(DDL)

CONNECTIONS_SQL = """
SELECT c1.departure, c2.arrival
FROM connections c1 JOIN connections c2 ON c1.arrival = c2.departure
EXCEPT
SELECT departure, arrival FROM connections
"""
CONNECTIONS_RA = (
    "DiffSet(Project(EqJoin(Reference(connections),Reference(connections),2,1),[2, 4]),"
    "Project(Reference(connections),[1,2]))"
)


def plan(sql):
    return translate(parse_sql(sql, S))


def test_ddl_skips_constraints_and_keeps_types():
    conn = S[0]
    assert conn.name == "connections"
    assert list(conn.columns) == ["departure", "arrival", "price"]
    assert conn.type_of(1) == "varchar"
    assert conn.type_of(3) == "int"


def test_tokenizer_handles_quotes_and_comments():
    toks = [t.text for t in tokenize("select 'it''s' -- note\n, 1.5e2 from x")]
    assert "it's" in toks or "'it''s'" in toks
    assert "note" not in " ".join(toks)


def test_connections_listing_matches_textually():
    e = plan(CONNECTIONS_SQL)
    assert ra.normalize_ws(ra.pretty_print(e)) == ra.normalize_ws(CONNECTIONS_RA)


def test_pretty_print_layout():
    text = ra.pretty_print(plan(CONNECTIONS_SQL))
    assert text.splitlines()[0] == "DiffSet("
    assert "   Project(" in text and "         2,1" in text


def test_group_by_translation():
    e = plan("SELECT address, COUNT(amount) FROM transactions WHERE kind = 'atm withdrawal' GROUP BY address")
    assert ra.compact(e) == "GroupAgg(Select(Reference(transactions),#3 = 'atm withdrawal'),[1],[COUNT(2)])"


def test_plain_select_is_deduplicated():
    assert ra.compact(plan("SELECT * FROM t")) == "DeDup(Reference(t))"


def test_in_subquery_becomes_semijoin():
    e = plan("SELECT a FROM t WHERE b IN (SELECT amount FROM transactions)")
    assert any(isinstance(x, ra.Semijoin) for x in _nodes(e))


def test_not_in_stays_a_predicate():
    e = plan("SELECT a FROM t WHERE b NOT IN (SELECT amount FROM transactions)")
    sel = [x for x in _nodes(e) if isinstance(x, ra.Select)][0]
    assert isinstance(sel.predicate, ra.Not) and isinstance(sel.predicate.operand, ra.InSub)


def test_order_by_becomes_sorts_primary_last():
    e = plan("SELECT a, b FROM t ORDER BY b DESC, a")
    assert isinstance(e, ra.Sort) and e.col == 2 and e.descending
    assert isinstance(e.child, ra.Sort) and e.child.col == 1 and not e.child.descending


def test_join_layout_remaps_columns():
    e = plan("SELECT x.b, y.amount FROM t x JOIN transactions y ON x.a = y.amount WHERE y.kind = 'k'")
    # EqJoin output: key, t.b, transactions.address, transactions.kind
    sel = [n for n in _nodes(e) if isinstance(n, ra.Select)][0]
    assert ra.render_predicate(sel.predicate) == "#4 = 'k'"
    proj = [n for n in _nodes(e) if isinstance(n, ra.Project)][0]
    assert list(proj.items) == [2, 1]


def test_comma_join_is_product():
    e = plan("SELECT x.a FROM t x, t y WHERE x.a = y.b")
    assert any(isinstance(n, ra.Product) for n in _nodes(e))


@pytest.mark.parametrize(
    "sql,exc",
    [
        ("SELECT a FROM nope", UnknownTable),
        ("SELECT zz FROM t", UnknownColumn),
        ("SELECT a FROM t x, t y", AmbiguousColumn),
        ("SELECT a FROM t WHERE", SqlSyntaxError),
        ("SELECT a FROM t x WHERE a IN (SELECT b FROM t WHERE b = x.a)", UnsupportedFeature),
        ("SELECT a, COUNT(*) FROM t GROUP BY a HAVING COUNT(*) > 1", UnsupportedFeature),
        ("SELECT a FROM t LIMIT 3", UnsupportedFeature),
        ("SELECT a FROM t LEFT JOIN t u ON t.a = u.a", UnsupportedFeature),
        ("SELECT a FROM t WHERE a = NULL", UnsupportedFeature),
        ("SELECT a FROM t UNION ALL SELECT b FROM t", UnsupportedFeature),
        ("SELECT SUM(address) FROM transactions", UnsupportedFeature),
    ],
)
def test_errors(sql, exc):
    with pytest.raises(exc):
        translate(parse_sql(sql, S))


def test_error_positions_point_into_the_text():
    sql = "SELECT a FROM t WHERE zz = 1"
    with pytest.raises(UnknownColumn) as info:
        parse_sql(sql, S)
    assert sql[info.value.pos:].startswith("zz")


def test_sql_text_round_trips():
    for sql in [
        CONNECTIONS_SQL,
        "SELECT DISTINCT a + 1, b / 2 FROM t WHERE NOT (a > 1 OR b IS NULL) ORDER BY 1 DESC",
        "SELECT kind, MIN(amount), COUNT(DISTINCT address) FROM transactions GROUP BY kind",
        "SELECT a FROM t WHERE EXISTS (SELECT b FROM t) INTERSECT SELECT amount FROM transactions",
    ]:
        q = parse_sql(sql, S)
        assert parse_sql(sql_text(q), S) == q


def test_arity_checks():
    with pytest.raises(ra.ArityError):
        ra.Project(ra.Reference("t", 2), (3,))
    with pytest.raises(ra.ArityError):
        ra.UnionSet(ra.Reference("t", 2), ra.Reference("u", 3))
    assert ra.arity(plan(CONNECTIONS_SQL)) == 2


def test_row_bound():
    e = plan(CONNECTIONS_SQL)
    assert ra.row_bound(e, {"connections": 5}) == 25
    u = plan("SELECT a FROM t UNION SELECT b FROM t")
    assert ra.row_bound(u, {"t": 4}) == 8


def _nodes(e):
    yield e
    for k in ra.children(e):
        yield from _nodes(k)
