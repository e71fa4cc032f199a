"""Per-node update laws of the distributed dual proximal gradient family.

Each simulated processor is a :class:`NodeState`. It only touches its own
multipliers and whatever its neighbours have sent it; the handlers below
are the synchronous round, the node-triggered awake/idle pair, the
edge-triggered pairwise exchange and the accelerated synchronous round.

:func:`ucdc_step` and :func:`ucdc_edge_step` are monolithic block
prox-gradient steps on a :class:`~distdualprox.dual.DualState`, used to
check the message-passing handlers against the stacked-dual iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .dual import DualLayout, DualState, block_gradient, lipschitz_constants, local_tilt
from .functions import ProxableFn, StronglyConvexFn
from .problem import ProblemInstance

Mode = Literal["sync", "sync_nesterov", "async_node", "async_edge"]
MODES: tuple[str, ...] = ("sync", "sync_nesterov", "async_node", "async_edge")
SYNC_MODES = ("sync", "sync_nesterov")


class ProtocolError(RuntimeError):
    """A message or activation that the communication graph does not allow."""


@dataclass
class Message:
    sender: int
    receiver: int
    x: np.ndarray | None = None
    lam: np.ndarray | None = None  # lam[sender][receiver]


@dataclass
class NodeState:
    id: int
    neighbors: tuple[int, ...]
    f: StronglyConvexFn
    g: ProxableFn
    alpha: float
    lam: dict[int, np.ndarray]
    mu: np.ndarray
    cache_x: dict[int, np.ndarray] = field(default_factory=dict)
    cache_lambda: dict[int, np.ndarray] = field(default_factory=dict)
    x_star: np.ndarray | None = None
    mu_partner: int | None = None
    # previous prox output of the accelerated variant (own block only)
    hat_lam: dict[int, np.ndarray] | None = None
    hat_mu: np.ndarray | None = None

    def tilt(self) -> np.ndarray:
        v = -self.mu.copy()
        for j in self.neighbors:
            v -= self.lam[j] - self.cache_lambda[j]
        return v


def primal_update(node: NodeState) -> np.ndarray:
    """Recompute and store ``x_i* = argmin f_i(x) + x'(sum_j (lam_ij - lam_ji) + mu_i)``."""
    node.x_star = node.f.grad_conjugate(node.tilt())
    return node.x_star


def _local_prox_grad(node: NodeState) -> tuple[dict[int, np.ndarray], np.ndarray]:
    a = node.alpha
    x = node.x_star
    lam = {j: node.lam[j] + a * (x - node.cache_x[j]) for j in node.neighbors}
    mu = node.g.prox_conjugate(a, node.mu + a * x)
    return lam, mu


def async_awake(node: NodeState) -> list[Message]:
    """Awake phase of the node-triggered protocol.

    Prox-gradient step on the node's own block with the cached neighbour
    primals, then a fresh local minimisation. Returns one message per
    neighbour carrying the new ``lam[i][j]`` and ``x_i*``.
    """
    node.lam, node.mu = _local_prox_grad(node)
    primal_update(node)
    return [Message(node.id, j, x=node.x_star.copy(), lam=node.lam[j].copy()) for j in node.neighbors]


def async_idle_receive(node: NodeState, msg: Message) -> list[Message]:
    """Idle-phase handler: cache what arrived; a new multiplier triggers a re-solve and an ``x`` broadcast."""
    if msg.receiver != node.id:
        raise ProtocolError(f"message for node {msg.receiver} delivered to node {node.id}")
    if msg.sender not in node.neighbors:
        raise ProtocolError(f"node {node.id} received a message from non-neighbour {msg.sender}")
    if msg.x is not None:
        node.cache_x[msg.sender] = msg.x
    if msg.lam is None:
        return []
    node.cache_lambda[msg.sender] = msg.lam
    primal_update(node)
    return [Message(node.id, j, x=node.x_star.copy()) for j in node.neighbors]


def edge_awake(node_i: NodeState, node_j: NodeState) -> None:
    """Pairwise exchange on an activated edge; both endpoints are updated in place.

    ``mu_i`` moves only when ``j`` is ``i``'s designated partner (and vice versa).
    """
    i, j = node_i.id, node_j.id
    if j not in node_i.neighbors or i not in node_j.neighbors:
        raise ProtocolError(f"({i}, {j}) is not an edge")
    xi, xj = node_i.x_star, node_j.x_star
    node_i.cache_x[j] = xj.copy()
    node_j.cache_x[i] = xi.copy()
    node_i.lam[j] = node_i.lam[j] + node_i.alpha * (xi - xj)
    node_j.lam[i] = node_j.lam[i] + node_j.alpha * (xj - xi)
    node_i.cache_lambda[j] = node_j.lam[i].copy()
    node_j.cache_lambda[i] = node_i.lam[j].copy()
    if node_i.mu_partner == j:
        node_i.mu = node_i.g.prox_conjugate(node_i.alpha, node_i.mu + node_i.alpha * xi)
    if node_j.mu_partner == i:
        node_j.mu = node_j.g.prox_conjugate(node_j.alpha, node_j.mu + node_j.alpha * xj)
    primal_update(node_i)
    primal_update(node_j)


def _exchange_lambda(nodes: list[NodeState]) -> None:
    for node in nodes:
        for j in node.neighbors:
            node.cache_lambda[j] = nodes[j].lam[node.id].copy()


def _exchange_x(nodes: list[NodeState]) -> None:
    for node in nodes:
        for j in node.neighbors:
            node.cache_x[j] = nodes[j].x_star.copy()


def sync_round(nodes: list[NodeState], t: int) -> list[NodeState]:
    """One synchronous iteration; every node steps with ``x*(t-1)`` then re-solves."""
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    updates = [_local_prox_grad(node) for node in nodes]
    for node, (lam, mu) in zip(nodes, updates):
        node.lam, node.mu = lam, mu
    _exchange_lambda(nodes)
    for node in nodes:
        primal_update(node)
    _exchange_x(nodes)
    return nodes


def nesterov_theta(t: int) -> float:
    return (t - 1.0) / (t + 2.0)


def nesterov_sync_round(nodes: list[NodeState], t: int, theta: float | None = None) -> list[NodeState]:
    """Accelerated synchronous iteration.

    Each node takes the prox-gradient step to get its new ``hat`` block,
    then extrapolates ``hat + theta*(hat - hat_prev)`` using the copy it
    kept from the previous round.
    """
    if t < 1:
        raise ValueError("rounds are numbered from 1")
    if theta is None:
        theta = nesterov_theta(t)
    updates = [_local_prox_grad(node) for node in nodes]
    for node, (lam_hat, mu_hat) in zip(nodes, updates):
        prev_lam = node.hat_lam if node.hat_lam is not None else node.lam
        prev_mu = node.hat_mu if node.hat_mu is not None else node.mu
        node.lam = {j: lam_hat[j] + theta * (lam_hat[j] - prev_lam[j]) for j in node.neighbors}
        node.mu = mu_hat + theta * (mu_hat - prev_mu)
        node.hat_lam, node.hat_mu = lam_hat, mu_hat
    _exchange_lambda(nodes)
    for node in nodes:
        primal_update(node)
    _exchange_x(nodes)
    return nodes


# ---------------------------------------------------------------------------
# monolithic block steps


def ucdc_step(problem: ProblemInstance, y: DualState, i: int, step: float | None = None) -> DualState:
    """Block prox-gradient step on block ``i`` of the stacked dual.

    ``y_i <- prox_{step g_i*}(y_i - step * grad_i F*(y))`` where the prox acts
    on the ``mu`` part only. ``step`` defaults to ``1/L_i``.
    """
    if not 0 <= i < problem.n:
        raise ValueError(f"block {i} out of range")
    if step is None:
        step = 1.0 / lipschitz_constants(problem).L[i]
    cache = {k: problem.fs[k].grad_conjugate(local_tilt(k, y))
             for k in (i, *problem.graph.adjacency[i])}
    out = y.copy()
    blk = out.block(i)
    blk -= step * block_gradient(problem, i, y, cache)
    mu = out.mu(i)
    mu[:] = problem.gs[i].prox_conjugate(step, mu.copy())
    return out


def ucdc_edge_step(problem: ProblemInstance, y: DualState, edge: tuple[int, int], alphas,
                   mu_partner) -> DualState:
    """Prox-gradient step on the edge block ``[lam_ij, lam_ji, (mu_i), (mu_j)]``."""
    i, j = edge
    if not problem.graph.has_edge(i, j):
        raise ValueError(f"({i}, {j}) is not an edge")
    xi = problem.fs[i].grad_conjugate(local_tilt(i, y))
    xj = problem.fs[j].grad_conjugate(local_tilt(j, y))
    out = y.copy()
    out.lam(i, j)[:] -= alphas[i] * (xj - xi)
    out.lam(j, i)[:] -= alphas[j] * (xi - xj)
    for a, b, xa in ((i, j, xi), (j, i, xj)):
        if mu_partner[a] == b:
            out.mu(a)[:] = problem.gs[a].prox_conjugate(alphas[a], y.mu(a) + alphas[a] * xa)
    return out


# ---------------------------------------------------------------------------
# engine


@dataclass
class AlgorithmConfig:
    """What to run and with which step sizes.

    ``step_scale`` multiplies the convergence bound (``1/(n L_i)`` for the
    synchronous modes, ``1/L_i`` otherwise). ``alphas`` overrides both.
    """

    mode: str = "sync"
    step_scale: float = 1.0
    initial_duals: DualState | None = None
    max_iterations: int = 100_000
    threshold: float | None = None
    alphas: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if not 0.0 < self.step_scale <= 1.0:
            raise ValueError(f"step_scale must lie in (0, 1], got {self.step_scale}")
        if self.threshold is not None and self.threshold <= 0:
            raise ValueError("threshold must be positive")


def step_sizes(problem: ProblemInstance, config: AlgorithmConfig) -> np.ndarray:
    if config.alphas is not None:
        alphas = np.asarray(config.alphas, dtype=float)
        if alphas.shape != (problem.n,) or np.any(alphas <= 0):
            raise ValueError("alphas must be one positive step per node")
        return alphas
    table = lipschitz_constants(problem)
    base = table.alpha_sync if config.mode in SYNC_MODES else table.alpha_async
    return config.step_scale * base


class Network:
    """All node states of one run plus the accessors the simulator needs."""

    def __init__(self, problem: ProblemInstance, config: AlgorithmConfig):
        self.problem = problem
        self.config = config
        self.layout = DualLayout(problem.graph, problem.dim)
        self.alphas = step_sizes(problem, config)
        y0 = config.initial_duals if config.initial_duals is not None else DualState(self.layout)
        if y0.layout.size != self.layout.size:
            raise ValueError("initial dual state does not match the problem layout")
        g = problem.graph
        self.nodes = []
        for i in range(problem.n):
            nbrs = g.adjacency[i]
            self.nodes.append(NodeState(
                id=i,
                neighbors=nbrs,
                f=problem.fs[i],
                g=problem.gs[i],
                alpha=float(self.alphas[i]),
                lam={j: y0.lam(i, j).copy() for j in nbrs},
                mu=y0.mu(i).copy(),
                mu_partner=nbrs[0] if nbrs else None,
            ))
        # preliminary exchange of initial multipliers and primal points
        _exchange_lambda(self.nodes)
        for node in self.nodes:
            primal_update(node)
        _exchange_x(self.nodes)

    def dual_state(self, hat: bool = False) -> DualState:
        """Snapshot of the stacked dual; ``hat=True`` gives the accelerated prox outputs."""
        y = DualState(self.layout)
        for node in self.nodes:
            lam = node.hat_lam if hat and node.hat_lam is not None else node.lam
            mu = node.hat_mu if hat and node.hat_mu is not None else node.mu
            for j in node.neighbors:
                y.lam(node.id, j)[:] = lam[j]
            y.mu(node.id)[:] = mu
        return y

    def primal(self) -> np.ndarray:
        return np.array([node.x_star for node in self.nodes])

    def awake(self, i: int) -> int:
        """Node-triggered activation delivered to quiescence; returns messages handled."""
        queue = list(async_awake(self.nodes[i]))
        handled = 0
        while queue:
            msg = queue.pop(0)
            handled += 1
            queue.extend(async_idle_receive(self.nodes[msg.receiver], msg))
        return handled

    def edge(self, i: int, j: int) -> None:
        edge_awake(self.nodes[i], self.nodes[j])

    def round(self, t: int) -> None:
        if self.config.mode == "sync_nesterov":
            nesterov_sync_round(self.nodes, t)
        else:
            sync_round(self.nodes, t)

    def cache_coherent(self) -> bool:
        return all(
            np.array_equal(node.cache_x[j], self.nodes[j].x_star)
            and np.array_equal(node.cache_lambda[j], self.nodes[j].lam[node.id])
            for node in self.nodes
            for j in node.neighbors
        )
