"""Undirected communication graphs."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np


class GraphError(ValueError):
    """Raised for malformed graphs or failed random generation."""


@dataclass(frozen=True)
class Graph:
    """Fixed undirected graph on nodes ``0..n-1``.

    Edges are stored canonically as ``(min, max)`` pairs and kept sorted so
    that iteration order (and therefore every trace) is reproducible.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...] = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        if n < 1:
            raise GraphError(f"node count must be positive, got {n}")
        canon = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
            canon.add((min(i, j), max(i, j)))
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for i, j in canon:
            nbrs[i].append(j)
            nbrs[j].append(i)
        adjacency = tuple(tuple(sorted(a)) for a in nbrs)
        return cls(n=n, edges=tuple(sorted(canon)), adjacency=adjacency)

    def neighbors(self, i: int) -> list[int]:
        if not 0 <= i < self.n:
            raise GraphError(f"node {i} out of range for n={self.n}")
        return list(self.adjacency[i])

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._edge_set

    @cached_property
    def _edge_set(self) -> frozenset:
        return frozenset(self.edges)

    def dumps(self) -> str:
        lines = [f"n {self.n}"] + [f"{i} {j}" for i, j in self.edges]
        return "\n".join(lines) + "\n"

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Graph":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or rows[0][0] != "n" or len(rows[0]) != 2:
            raise GraphError("edge list must start with header 'n <count>'")
        n = int(rows[0][1])
        edges = []
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 2:
                raise GraphError(f"line {lineno}: expected 'i j', got {' '.join(row)!r}")
            edges.append((int(row[0]), int(row[1])))
        return cls.from_edges(n, edges)

    @classmethod
    def load(cls, path: str | Path) -> "Graph":
        return cls.loads(Path(path).read_text())


def neighbors(g: Graph, i: int) -> list[int]:
    return g.neighbors(i)


def is_connected(g: Graph) -> bool:
    """BFS from node 0."""
    seen = [False] * g.n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        u = queue.popleft()
        for v in g.adjacency[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count == g.n


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def erdos_renyi(n: int, p: float, seed: int, max_retries: int = 10000) -> Graph:
    """Connected G(n, p) sample.

    Each unordered pair is kept independently with probability ``p``. A
    disconnected draw is discarded and the next sub-seed tried, up to
    ``max_retries`` attempts.
    """
    if n < 2:
        raise GraphError(f"erdos_renyi needs n >= 2, got {n}")
    if not 0.0 < p <= 1.0:
        raise GraphError(f"edge probability must lie in (0, 1], got {p}")
    iu, ju = np.triu_indices(n, k=1)
    for sub in range(max_retries):
        rng = np.random.default_rng([seed, sub])
        keep = rng.random(iu.size) < p
        g = Graph.from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()))
        if is_connected(g):
            return g
    raise GraphError(
        f"no connected Erdos-Renyi graph after {max_retries} draws (n={n}, p={p}, seed={seed})"
    )
