import math
import random

import pytest

from sqlsheet.evaluator import CircularReference, evaluate_workbook
from sqlsheet.grid import BoundsError
from sqlsheet.special import (
    SENTINEL, bfs_levels, cur_nodes, dfs_order, expand_edges, gen_bfs, gen_dfs, gen_merge_sort, load_sort_input,
    merge_sort, quadratic_sort, read_sorted,
)

from graphs import bfs_reference, dfs_reference, has_cycle, random_cyclic_graph, random_dag, random_graph

# --- merge sort ---------------------------------------------------------------


@pytest.mark.parametrize("layout", ["expanded", "condensed"])
@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 16, 33])
def test_merge_sort_matches_sorted(layout, n):
    rng = random.Random(n)
    values = [float(rng.randint(-20, 20)) for _ in range(n)]
    assert merge_sort(values, layout) == sorted(values)


@pytest.mark.parametrize("layout", ["expanded", "condensed"])
def test_merge_sort_reverse_and_fractional(layout):
    values = [16.0 - i for i in range(16)]
    assert merge_sort(values, layout) == sorted(values)
    values = [0.5, -1e200, 3.25, 3.25, 1e-9, -0.0]
    assert merge_sort(values, layout) == sorted(values)


@pytest.mark.parametrize("n", [2, 8, 64, 1024])
def test_merge_sort_column_counts(n):
    k = int(math.log2(n))
    assert gen_merge_sort(n, "expanded").generated_columns == 12 * k
    assert gen_merge_sort(n, "condensed").generated_columns == 4 * k


def test_merge_sort_hides_helper_columns_and_pads():
    plan = gen_merge_sort(5, "expanded")
    assert plan.padded == 8 and plan.levels == 3 and plan.workbook.height == 9
    assert plan.output_col not in plan.workbook.hidden_columns
    assert len(plan.workbook.hidden_columns) == plan.generated_columns - plan.levels
    load_sort_input(plan, [3, 1, 2, 5, 4])
    state = evaluate_workbook(plan.workbook)
    assert read_sorted(state, plan) == [1.0, 2.0, 3.0, 4.0, 5.0]
    assert state.get(9, plan.output_col) == SENTINEL


def test_merge_sort_bounds_and_input_checks():
    with pytest.raises(BoundsError):
        gen_merge_sort(64, height=64)
    gen_merge_sort(64, height=65)
    with pytest.raises(ValueError):
        gen_merge_sort(4, "diagonal")
    plan = gen_merge_sort(2)
    with pytest.raises(ValueError):
        load_sort_input(plan, [1.0])
    with pytest.raises(ValueError):
        load_sort_input(plan, [1.0, 1e300])


# --- quadratic sort -------------------------------------------------------------


def _stable_oracle(rows, key, descending):
    """Python's stable sort on the present keys, NULL keys last, NA rows dropped."""
    data = [r for r in rows if r is not None]
    # reverse=True keeps equal keys in input order
    present = sorted((r for r in data if r[key - 1] is not None), key=lambda r: r[key - 1], reverse=descending)
    return present + [r for r in data if r[key - 1] is None]


def test_quadratic_sort_example():
    rows = [(3, "a"), None, (1, "b"), (None, "c"), (3, "d"), (2, "e")]
    assert quadratic_sort(rows) == [(1.0, "b"), (2.0, "e"), (3.0, "a"), (3.0, "d"), (None, "c")]
    assert quadratic_sort(rows, descending=True) == [(3.0, "a"), (3.0, "d"), (2.0, "e"), (1.0, "b"), (None, "c")]


def test_quadratic_sort_text_keys_and_empty():
    assert quadratic_sort([("b", 1), ("a", 2), ("b", 0)]) == [("a", 2.0), ("b", 1.0), ("b", 0.0)]
    assert quadratic_sort([None, None]) == []
    assert quadratic_sort([]) == []


def test_quadratic_sort_random_columns():
    rng = random.Random(11)
    for _ in range(25):
        n = rng.randint(0, 30)
        rows = [None if rng.random() < 0.15 else (None if rng.random() < 0.15 else float(rng.randint(0, 6)), i)
                for i in range(n)]
        desc = rng.random() < 0.5
        expected = _stable_oracle(rows, 1, desc)
        assert quadratic_sort(rows, 1, desc) == [tuple(float(x) if x is not None else None for x in r) for r in expected]


# --- BFS --------------------------------------------------------------------------


def test_bfs_diamond():
    edges = [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d"), ("d", "e")]
    assert bfs_levels(edges, "a") == [("a", 0.0), ("b", 1.0), ("c", 1.0), ("d", 2.0), ("e", 3.0)]


def test_bfs_skips_unreachable_vertices_and_handles_lone_start():
    assert bfs_levels([("x", "y"), ("a", "b")], "a") == [("a", 0.0), ("b", 1.0)]
    assert bfs_levels([], "s") == [("s", 0.0)]


def test_bfs_numeric_vertices():
    assert bfs_levels([(1, 2), (2, 3), (1, 3)], 1) == [(1.0, 0.0), (2.0, 1.0), (3.0, 1.0)]


def test_bfs_expanded_edges_give_every_vertex_a_row():
    rows = expand_edges([("a", "b"), ("b", "c")], "a")
    assert ("c", None) in rows and {u for u, _ in rows} == {"a", "b", "c"}
    plan = gen_bfs([("a", "b")], "a")
    assert plan.workbook.hidden_columns and not set(plan.output_cols) & plan.workbook.hidden_columns


def test_bfs_cycle_is_a_circular_reference():
    with pytest.raises(CircularReference):
        bfs_levels([("a", "b"), ("b", "c"), ("c", "b")], "a")
    # a cycle through the start vertex is cut by the start's constant level
    assert bfs_levels([("a", "b"), ("b", "a")], "a") == [("a", 0.0), ("b", 1.0)]


def test_bfs_random_dags_match_reference():
    rng = random.Random(3)
    for _ in range(30):
        _, edges, start = random_dag(rng)
        ref = bfs_reference(edges, start)
        got = bfs_levels(edges, start)
        assert {v: lv for v, lv in got} == {v: float(d) for v, d in ref.items()}
        assert [lv for _, lv in got] == sorted(lv for _, lv in got)


def test_bfs_random_cyclic_graphs_raise():
    rng = random.Random(4)
    for _ in range(15):
        names, edges, start = random_cyclic_graph(rng)
        assert has_cycle(names, [e for e in edges if e[1] != start])
        with pytest.raises(CircularReference):
            bfs_levels(edges, start)


# --- DFS --------------------------------------------------------------------------


def test_dfs_example_order():
    edges = [("a", "b"), ("a", "c"), ("b", "d"), ("d", "c")]
    assert dfs_order(edges, "a") == ["a", "b", "d", "c"]


def test_dfs_cycle_and_small_graphs():
    assert dfs_order([("a", "b"), ("b", "a")], "a") == ["a", "b"]
    assert dfs_order([("a", "b")], "a") == ["a", "b"]
    assert dfs_order([("b", "a")], "a") == ["a"]


def test_dfs_height_is_twice_the_edge_count_plus_start():
    edges = [("a", "b"), ("a", "c"), ("c", "d"), ("a", "b")]
    plan = gen_dfs(edges, "a")
    assert len(plan.edges) == 3 and plan.workbook.height == 7
    nodes = cur_nodes(evaluate_workbook(plan.workbook), plan)
    assert nodes[0] == "a"


def test_dfs_random_graphs_match_reference():
    rng = random.Random(5)
    for _ in range(30):
        _, edges, start = random_graph(rng)
        plan = gen_dfs(edges, start)
        state = evaluate_workbook(plan.workbook)
        steps = [v for v in cur_nodes(state, plan)[: 2 * len(plan.edges) + 1] if isinstance(v, str)]
        assert list(dict.fromkeys(steps)) == dfs_reference(edges, start)
        assert dfs_order(edges, start) == dfs_reference(edges, start)
