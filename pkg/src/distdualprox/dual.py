"""Stacked dual variables, the dual cost and its block gradients.

The dual of the copy-and-split reformulation has one multiplier
``lam[i][j]`` per ordered neighbour pair (owned by node ``i``) and one
``mu[i]`` per node. With the tilt

    v_i(y) = -sum_{j in N_i} (lam[i][j] - lam[j][i]) - mu[i]

the cost to minimise is ``Gamma(y) = sum_i f_i*(v_i) + sum_i g_i*(mu[i])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .graph import Graph
from .problem import ProblemInstance


class DualLayout:
    """Offsets of every block inside the flat stacked dual vector.

    Block ``i`` is ``[lam[i][j1], ..., lam[i][jk], mu[i]]`` with the
    neighbours in ascending order, each piece of length ``d``.
    """

    def __init__(self, graph: Graph, dim: int):
        self.graph = graph
        self.dim = dim
        self.n = graph.n
        starts = [0]
        for i in range(self.n):
            starts.append(starts[-1] + dim * (graph.degree(i) + 1))
        self.block_starts = tuple(starts[:-1])
        self.size = starts[-1]
        self._lam_offset = {}
        for i in range(self.n):
            for k, j in enumerate(graph.adjacency[i]):
                self._lam_offset[(i, j)] = self.block_starts[i] + k * dim

    def block_slice(self, i: int) -> slice:
        start = self.block_starts[i]
        return slice(start, start + self.dim * (self.graph.degree(i) + 1))

    def lam_slice(self, i: int, j: int) -> slice:
        off = self._lam_offset[(i, j)]
        return slice(off, off + self.dim)

    def mu_slice(self, i: int) -> slice:
        off = self.block_starts[i] + self.graph.degree(i) * self.dim
        return slice(off, off + self.dim)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(indptr, indices, rev)`` of the owner-indexed multipliers."""
        g = self.graph
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        for i in range(self.n):
            indptr[i + 1] = indptr[i] + g.degree(i)
        indices = np.array([j for i in range(self.n) for j in g.adjacency[i]], dtype=np.int64)
        pos = {(i, j): e for e, (i, j) in enumerate((i, j) for i in range(self.n) for j in g.adjacency[i])}
        rev = np.array([pos[(j, i)] for (i, j) in sorted(pos, key=pos.get)], dtype=np.int64)
        return indptr, indices, rev

    @cached_property
    def _lam_rows(self) -> np.ndarray:
        rows = [np.arange(self.block_starts[i], self.block_starts[i] + self.dim * self.graph.degree(i))
                for i in range(self.n)]
        return np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)

    @cached_property
    def _mu_rows(self) -> np.ndarray:
        return np.concatenate([np.arange(self.mu_slice(i).start, self.mu_slice(i).stop) for i in range(self.n)])


@dataclass
class DualBlock:
    """Node ``i``'s dual block: ``Lambda`` keyed by neighbour, and ``mu``."""

    node: int
    Lambda: dict[int, np.ndarray]
    mu: np.ndarray


class DualState:
    """Flat stacked dual vector with block accessors (views into ``y``)."""

    def __init__(self, layout: DualLayout, y=None):
        self.layout = layout
        if y is None:
            y = np.zeros(layout.size)
        y = np.asarray(y, dtype=float)
        if y.shape != (layout.size,):
            raise ValueError(f"dual vector must have shape ({layout.size},), got {y.shape}")
        self.y = y

    @classmethod
    def zeros(cls, problem: ProblemInstance) -> "DualState":
        return cls(DualLayout(problem.graph, problem.dim))

    @classmethod
    def from_arrays(cls, layout: DualLayout, lam, mu) -> "DualState":
        y = np.empty(layout.size)
        y[layout._lam_rows] = np.asarray(lam, dtype=float).reshape(-1)
        y[layout._mu_rows] = np.asarray(mu, dtype=float).reshape(-1)
        return cls(layout, y)

    def lam_array(self) -> np.ndarray:
        """Multipliers as an ``(n_directed_edges, d)`` array in CSR order."""
        return self.y[self.layout._lam_rows].reshape(-1, self.layout.dim)

    def mu_array(self) -> np.ndarray:
        return self.y[self.layout._mu_rows].reshape(-1, self.layout.dim)

    def lam(self, i: int, j: int) -> np.ndarray:
        return self.y[self.layout.lam_slice(i, j)]

    def mu(self, i: int) -> np.ndarray:
        return self.y[self.layout.mu_slice(i)]

    def block(self, i: int) -> np.ndarray:
        return self.y[self.layout.block_slice(i)]

    def dual_block(self, i: int) -> DualBlock:
        nbrs = self.layout.graph.adjacency[i]
        return DualBlock(i, {j: self.lam(i, j).copy() for j in nbrs}, self.mu(i).copy())

    def set_block(self, block: DualBlock) -> None:
        i = block.node
        if set(block.Lambda) != set(self.layout.graph.adjacency[i]):
            raise ValueError(f"block {i} must carry exactly one multiplier per neighbour")
        for j, v in block.Lambda.items():
            self.lam(i, j)[:] = v
        self.mu(i)[:] = block.mu

    def copy(self) -> "DualState":
        return DualState(self.layout, self.y.copy())

    def __repr__(self):
        return f"DualState(n={self.layout.n}, dim={self.layout.dim}, size={self.layout.size})"


def local_tilt(i: int, y: DualState) -> np.ndarray:
    adjacency = y.layout.graph.adjacency[i]
    v = -y.mu(i).copy()
    for j in adjacency:
        v -= y.lam(i, j) - y.lam(j, i)
    return v


def primal_points(problem: ProblemInstance, y: DualState) -> list[np.ndarray]:
    """``x_k* = grad f_k*(v_k(y))`` for every node."""
    return [problem.fs[k].grad_conjugate(local_tilt(k, y)) for k in range(problem.n)]


def _f_conj(problem: ProblemInstance, k: int, y: DualState) -> float:
    val = problem.fs[k].conjugate_value(local_tilt(k, y))
    if not math.isfinite(val):
        raise OverflowError(f"non-finite conjugate value at node {k}: {val}")
    return val


def dual_cost(problem: ProblemInstance, y: DualState) -> float:
    """``Gamma(y)``; ``math.inf`` when some ``mu_i`` leaves ``dom g_i*``.

    A non-finite smooth part is numeric blowup, not infeasibility, and
    raises ``OverflowError``.
    """
    total = 0.0
    for k in range(problem.n):
        gk = problem.gs[k].conjugate_value(y.mu(k))
        if gk == math.inf:
            return math.inf
        total += gk
    for k in range(problem.n):
        total += _f_conj(problem, k, y)
    return total


def block_gradient(problem: ProblemInstance, i: int, y: DualState, primal_cache) -> np.ndarray:
    """Block ``i`` of the gradient of the smooth part ``F*``.

    ``primal_cache[k]`` must equal ``grad f_k*(v_k(y))``. Components are
    ``x_j* - x_i*`` for ``lam[i][j]`` and ``-x_i*`` for ``mu[i]``, laid out
    like the block.
    """
    nbrs = problem.graph.adjacency[i]
    xi = np.asarray(primal_cache[i], dtype=float)
    parts = [np.asarray(primal_cache[j], dtype=float) - xi for j in nbrs]
    parts.append(-xi)
    return np.concatenate(parts)


def full_gradient(problem: ProblemInstance, y: DualState, primal_cache=None) -> np.ndarray:
    if primal_cache is None:
        primal_cache = primal_points(problem, y)
    return np.concatenate([block_gradient(problem, i, y, primal_cache) for i in range(problem.n)])


@dataclass(frozen=True)
class LipschitzTable:
    L: np.ndarray
    alpha_sync: np.ndarray
    alpha_async: np.ndarray


def lipschitz_from_sigmas(graph: Graph, sigmas) -> np.ndarray:
    sigmas = np.asarray(sigmas, dtype=float)
    if np.any(sigmas <= 0):
        raise ValueError("strong convexity parameters must be positive")
    L = np.empty(graph.n)
    for i in range(graph.n):
        s = 1.0 / sigmas[i] ** 2
        for j in graph.adjacency[i]:
            s += (1.0 / sigmas[i] + 1.0 / sigmas[j]) ** 2
        L[i] = math.sqrt(s)
    return L


def lipschitz_constants(problem: ProblemInstance) -> LipschitzTable:
    """Block constants ``L_i`` and the admissible step sizes.

    ``L_i = sqrt(1/s_i^2 + sum_{j in N_i} (1/s_i + 1/s_j)^2)``; synchronous
    steps are ``1/(n L_i)``, asynchronous ones ``1/L_i``.
    """
    L = lipschitz_from_sigmas(problem.graph, [f.sigma for f in problem.fs])
    return LipschitzTable(L=L, alpha_sync=1.0 / (problem.n * L), alpha_async=1.0 / L)


class DualCostTracker:
    """Centralised ``Gamma`` evaluation refreshed only where the dual moved.

    Keeps per-node ``f_k*`` and ``g_k*`` values so that an event touching a
    few blocks costs a few oracle calls rather than ``n``.
    """

    def __init__(self, problem: ProblemInstance, y: DualState):
        self.problem = problem
        self.f_vals = np.empty(problem.n)
        self.g_vals = np.empty(problem.n)
        self.refresh(y, range(problem.n))

    def refresh(self, y: DualState, nodes) -> None:
        for k in nodes:
            self.f_vals[k] = _f_conj(self.problem, k, y)
            self.g_vals[k] = self.problem.gs[k].conjugate_value(y.mu(k))

    def refresh_around(self, y: DualState, nodes) -> None:
        """Refresh ``nodes`` and every neighbour (their tilts share multipliers)."""
        touched = set()
        for k in nodes:
            touched.add(k)
            touched.update(self.problem.graph.adjacency[k])
        self.refresh(y, sorted(touched))

    @property
    def value(self) -> float:
        if np.any(self.g_vals == math.inf):
            return math.inf
        return float(np.sum(self.f_vals) + np.sum(self.g_vals))
