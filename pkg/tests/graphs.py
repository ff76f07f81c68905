"""Reference graph algorithms and random graph generators shared by the tests."""

import random
from collections import deque

from sqlsheet.special import dfs_edges


def bfs_reference(edges, start):
    """Shortest-path level of every vertex reachable from ``start``."""
    adj = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
    level = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj.get(u, []):
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    return level


def dfs_reference(edges, start):
    """Recursive DFS discovery order, children visited in edge-list order per source."""
    adj = {}
    for u, v in dfs_edges(edges):
        adj.setdefault(u, []).append(v)
    seen = []

    def go(u):
        seen.append(u)
        for v in adj.get(u, []):
            if v not in seen:
                go(v)

    go(start)
    return seen


def has_cycle(vertices, edges):
    """Kahn's algorithm: True when the directed graph has a cycle."""
    indeg = {v: 0 for v in vertices}
    adj = {v: [] for v in vertices}
    for u, v in edges:
        adj[u].append(v)
        indeg[v] += 1
    queue = deque(v for v in vertices if indeg[v] == 0)
    done = 0
    while queue:
        u = queue.popleft()
        done += 1
        for v in adj[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return done < len(vertices)


def random_dag(rng: random.Random, max_vertices=12):
    n = rng.randint(1, max_vertices)
    names = [f"v{i}" for i in range(n)]
    rng.shuffle(names)
    edges = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.3]
    rng.shuffle(edges)
    return names, edges, names[0] if rng.random() < 0.7 else rng.choice(names)


def random_graph(rng: random.Random, max_vertices=12, max_edges=20):
    n = rng.randint(1, max_vertices)
    names = [f"v{i}" for i in range(n)]
    m = rng.randint(0, max_edges)
    edges = [(rng.choice(names), rng.choice(names)) for _ in range(m)]
    edges = list(dict.fromkeys((u, v) for u, v in edges if u != v))
    return names, edges, rng.choice(names)


def random_cyclic_graph(rng: random.Random, max_vertices=12):
    """A graph whose level recurrence is circular: it keeps a cycle after dropping edges into the start."""
    while True:
        names, edges, start = random_dag(rng, max_vertices)
        if len(names) < 2:
            continue
        a, b = rng.sample([v for v in names if v != start] or names, 2) if len(names) > 2 else (names[1], names[1])
        if a == b:
            continue
        edges = edges + [(a, b), (b, a)] if (a, b) not in edges else edges + [(b, a)]
        edges = list(dict.fromkeys(edges))
        if has_cycle(names, [e for e in edges if e[1] != start]):
            return names, edges, start
