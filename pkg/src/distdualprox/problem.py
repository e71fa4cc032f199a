"""Distributed problem instance: a graph plus one ``(f_i, g_i)`` pair per node."""

from __future__ import annotations

from dataclasses import dataclass

from .functions import ProxableFn, StronglyConvexFn
from .graph import Graph, GraphError, is_connected


@dataclass(frozen=True)
class ProblemInstance:
    """``min_x sum_i f_i(x) + g_i(x)`` over a connected graph."""

    graph: Graph
    fs: tuple[StronglyConvexFn, ...]
    gs: tuple[ProxableFn, ...]

    def __post_init__(self):
        object.__setattr__(self, "fs", tuple(self.fs))
        object.__setattr__(self, "gs", tuple(self.gs))
        n = self.graph.n
        if len(self.fs) != n or len(self.gs) != n:
            raise ValueError(f"need {n} (f, g) pairs, got {len(self.fs)} f and {len(self.gs)} g")
        if not is_connected(self.graph):
            raise GraphError("communication graph must be connected")
        dims = {fn.dim for fn in self.fs} | {gn.dim for gn in self.gs}
        if len(dims) != 1:
            raise ValueError(f"all local functions must share one dimension, got {sorted(dims)}")
        for i, fn in enumerate(self.fs):
            if not fn.sigma > 0:
                raise ValueError(f"node {i}: strong convexity parameter must be positive")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def dim(self) -> int:
        return self.fs[0].dim

    def primal_value(self, x) -> float:
        return sum(f.value(x) + g.value(x) for f, g in zip(self.fs, self.gs))
