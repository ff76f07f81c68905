"""Differential testing: random schemas, data and SQL, sheet vs. oracle."""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from . import algebra as ra
from .codegen import emit_plan, run_plan
from .oracle import oracle_eval, oracle_rows, relation
from .sql import TableSchema, parse_ddl, parse_sql
from .translate import translate

WORDS = ("ab", "cd", "ef", "gh", "ij", "x", "yy", "zz")


@dataclass
class Case:
    seed: int
    ddl: str
    sql: str
    db: dict[str, list[tuple]]

    def describe(self) -> str:
        lines = [f"-- seed {self.seed}", self.ddl, self.sql]
        for t, rows in self.db.items():
            lines.append(f"-- {t}: {rows}")
        return "\n".join(lines)


@dataclass
class Outcome:
    case: Case
    ok: bool
    expected: list[tuple] = field(default_factory=list)
    actual: list[tuple] = field(default_factory=list)
    reason: str = ""


# --- generation ------------------------------------------------------------


class _Gen:
    def __init__(self, rng: random.Random, schemas: list[TableSchema]) -> None:
        self.rng = rng
        self.schemas = schemas

    def cols(self, t: TableSchema, typ: Optional[str] = None) -> list[str]:
        return [c for c, ty in zip(t.columns, t.types) if typ is None or ty == typ]

    def literal(self, typ: str) -> str:
        if typ == "int":
            return str(self.rng.randint(0, 5))
        return "'" + self.rng.choice(WORDS) + "'"

    def atom(self, scope: list[tuple[str, TableSchema]], depth: int) -> str:
        rng = self.rng
        alias, t = rng.choice(scope)
        col = rng.choice(t.columns)
        typ = t.type_of(t.columns.index(col) + 1)
        ref = f"{alias}.{col}"
        roll = rng.random()
        if roll < 0.12:
            return f"{ref} IS {'NOT ' if rng.random() < 0.5 else ''}NULL"
        if roll < 0.27 and depth < 1:
            return self.in_sub(ref, typ, depth)
        if roll < 0.33 and depth < 1:
            neg = "NOT " if rng.random() < 0.4 else ""
            return f"{neg}EXISTS ({self.simple_select(1, depth + 1)})"
        op = rng.choice(["=", "<>", "<", "<=", ">", ">="])
        others = [(a, c) for a, s in scope for c in self.cols(s, typ)]
        if rng.random() < 0.4 and others:
            a, c = rng.choice(others)
            return f"{ref} {op} {a}.{c}"
        if typ == "int" and rng.random() < 0.2:
            return f"{ref} + {rng.randint(0, 3)} {op} {self.literal(typ)}"
        return f"{ref} {op} {self.literal(typ)}"

    def in_sub(self, ref: str, typ: str, depth: int) -> str:
        cands = [(t, c) for t in self.schemas for c in self.cols(t, typ)]
        t, c = self.rng.choice(cands)
        where = ""
        if self.rng.random() < 0.5:
            where = " WHERE " + self.condition([("s", t)], depth + 1)
        neg = "NOT " if self.rng.random() < 0.4 else ""
        return f"{ref} {neg}IN (SELECT s.{c} FROM {t.name} s{where})"

    def condition(self, scope, depth: int = 0) -> str:
        rng = self.rng
        out = self.atom(scope, depth)
        for _ in range(rng.choice([0, 0, 1, 1, 2])):
            conn = rng.choice(["AND", "OR"])
            nxt = self.atom(scope, depth)
            if rng.random() < 0.15:
                nxt = f"NOT ({nxt})"
            out = f"{out} {conn} {nxt}" if rng.random() < 0.5 else f"({out}) {conn} {nxt}"
        return out

    def simple_select(self, width: int, depth: int, types: Optional[list[str]] = None) -> str:
        t = self.rng.choice(self.schemas)
        picks = []
        for k in range(width):
            want = types[k] if types else None
            options = self.cols(t, want)
            if not options:
                return ""
            picks.append(f"q.{self.rng.choice(options)}")
        where = f" WHERE {self.condition([('q', t)], depth)}" if self.rng.random() < 0.5 else ""
        return f"SELECT {', '.join(picks)} FROM {t.name} q{where}"

    def select_items(self, scope) -> tuple[list[str], list[str]]:
        rng = self.rng
        items, types = [], []
        for _ in range(rng.randint(1, 3)):
            alias, t = rng.choice(scope)
            col = rng.choice(t.columns)
            typ = t.type_of(t.columns.index(col) + 1)
            if typ == "int" and rng.random() < 0.2:
                items.append(f"{alias}.{col} {rng.choice(['+', '-', '*', '/'])} {rng.randint(0, 3)}")
            else:
                items.append(f"{alias}.{col}")
            types.append(typ)
        return items, types

    def flat(self) -> tuple[str, list[str]]:
        rng = self.rng
        t1 = rng.choice(self.schemas)
        scope = [("a", t1)]
        from_sql = f"{t1.name} a"
        kind = rng.random()
        if kind < 0.3:
            t2 = rng.choice(self.schemas)
            pairs = [(x, y) for x in t1.columns for y in t2.columns
                     if t1.type_of(t1.columns.index(x) + 1) == t2.type_of(t2.columns.index(y) + 1)]
            if pairs:
                x, y = rng.choice(pairs)
                from_sql += f" JOIN {t2.name} b ON a.{x} = b.{y}"
                scope.append(("b", t2))
        elif kind < 0.4 and len(self.schemas) > 1:
            t2 = rng.choice(self.schemas)
            from_sql += f", {t2.name} b"
            scope.append(("b", t2))
        where = f" WHERE {self.condition(scope)}" if rng.random() < 0.7 else ""
        if rng.random() < 0.2:
            return self.grouped(scope, from_sql, where)
        items, types = self.select_items(scope)
        distinct = "DISTINCT " if rng.random() < 0.3 else ""
        return f"SELECT {distinct}{', '.join(items)} FROM {from_sql}{where}", types

    def grouped(self, scope, from_sql: str, where: str) -> tuple[str, list[str]]:
        rng = self.rng
        alias, t = rng.choice(scope)
        keys = rng.sample(t.columns, k=rng.randint(0, min(2, len(t.columns))))
        items = [f"{alias}.{k}" for k in keys]
        types = [t.type_of(t.columns.index(k) + 1) for k in keys]
        for _ in range(rng.randint(1, 2)):
            col = rng.choice(t.columns)
            typ = t.type_of(t.columns.index(col) + 1)
            funcs = ["COUNT", "COUNT*", "COUNTD"] + (["SUM", "AVG", "MIN", "MAX"] if typ == "int" else [])
            f = rng.choice(funcs)
            if f == "COUNT*":
                items.append("COUNT(*)")
            elif f == "COUNTD":
                items.append(f"COUNT(DISTINCT {alias}.{col})")
            else:
                items.append(f"{f}({alias}.{col})")
            types.append("int")
        group = f" GROUP BY {', '.join(f'{alias}.{k}' for k in keys)}" if keys else ""
        return f"SELECT {', '.join(items)} FROM {from_sql}{where}{group}", types

    def query(self) -> str:
        rng = self.rng
        sql, types = self.flat()
        if rng.random() < 0.25 and "GROUP BY" not in sql and "COUNT(" not in sql:
            other = self.simple_select(len(types), 0, types)
            if other and "/" not in sql:
                sql = f"{sql} {rng.choice(['UNION', 'EXCEPT', 'INTERSECT'])} {other}"
        if rng.random() < 0.3:
            k = rng.randint(1, len(types))
            sql += f" ORDER BY {k}{' DESC' if rng.random() < 0.4 else ''}"
        return sql


def random_schema(rng: random.Random) -> str:
    parts = []
    for t in range(1, rng.randint(1, 3) + 1):
        cols = [f"c{k} {rng.choice(['int', 'int', 'text'])}" for k in range(1, rng.randint(1, 4) + 1)]
        parts.append(f"CREATE TABLE t{t} ({', '.join(cols)});")
    return "\n".join(parts)


def random_db(rng: random.Random, schemas: list[TableSchema], max_rows: int = 6) -> dict[str, list[tuple]]:
    db = {}
    for t in schemas:
        rows = set()
        for _ in range(rng.randint(0, max_rows)):
            row = []
            for typ in t.types:
                if rng.random() < 0.15:
                    row.append(None)
                elif typ == "int":
                    row.append(float(rng.randint(0, 5)))
                else:
                    row.append(rng.choice(WORDS))
            rows.add(tuple(row))
        db[t.name] = sorted(rows, key=repr)
    return db


def random_case(seed: int) -> Case:
    rng = random.Random(seed)
    ddl = random_schema(rng)
    schemas = parse_ddl(ddl)
    sql = _Gen(rng, schemas).query()
    return Case(seed, ddl, sql, random_db(rng, schemas))


# --- checking --------------------------------------------------------------


def _expected(e: ra.RAExpr, db: dict[str, list[tuple]]) -> list[tuple]:
    return oracle_rows(e, {t: relation(rows) for t, rows in db.items()})


def check_case(case: Case, height: int) -> Outcome:
    """Compile and run one case; ``reason`` is set when the case was skipped."""
    schemas = parse_ddl(case.ddl)
    q = parse_sql(case.sql, schemas)
    e = translate(q)
    sizes = {t: len(rows) for t, rows in case.db.items()}
    if ra.row_bound(e, sizes) > height:
        return Outcome(case, True, reason="row bound exceeds sheet height")
    names = {s.name: s.columns for s in schemas}
    plan = emit_plan(e, height, names, q.output_names)
    actual = run_plan(plan, case.db)
    expected = _expected(e, case.db)
    ok = frozenset(relation(actual)) == frozenset(relation(expected)) and len(actual) == len(set(actual))
    if ok and q.order_by:
        keys = [k for k, _ in q.order_by]
        ok = [tuple(r[k - 1] for k in keys) for r in relation_list(actual)] == [
            tuple(r[k - 1] for k in keys) for r in relation_list(expected)
        ]
    return Outcome(case, ok, expected, actual)


def relation_list(rows: list[tuple]) -> list[tuple]:
    return [tuple(float(v) if isinstance(v, int) and not isinstance(v, bool) else v for v in r) for r in rows]


def minimize(case: Case, height: int, failing: Callable[[Case], bool] | None = None) -> Case:
    """Greedily delete data rows while the case keeps failing."""
    failing = failing or (lambda c: not check_case(c, height).ok)
    changed = True
    while changed:
        changed = False
        for t in list(case.db):
            i = 0
            while i < len(case.db[t]):
                rows = case.db[t][:i] + case.db[t][i + 1:]
                trial = replace(case, db={**case.db, t: rows})
                if failing(trial):
                    case, changed = trial, True
                else:
                    i += 1
    return case


@dataclass
class Report:
    checked: int = 0
    skipped: int = 0
    failures: list[Outcome] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def verify(cases: int, seed: int = 0, height: int = 64, shrink: bool = True) -> Report:
    """Run ``cases`` random cases; a case whose row bound exceeds the height is skipped and replaced."""
    report = Report()
    k = 0
    while report.checked < cases:
        case = random_case(seed * 1_000_003 + k)
        k += 1
        out = check_case(case, height)
        if out.reason:
            report.skipped += 1
            continue
        report.checked += 1
        if not out.ok:
            if shrink:
                small = minimize(case, height)
                out = check_case(small, height)
            report.failures.append(out)
    return report
