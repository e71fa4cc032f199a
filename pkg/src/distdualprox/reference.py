"""Independent reference solvers.

Nothing here goes through the node handlers in :mod:`distdualprox.algorithms`
or the compiled kernel's box-QP: the local minimisations use
:func:`box_qp_exact`, the dual iterations run on the flat stacked vector,
and the conjugate proxes use closed forms where they exist.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dual import DualLayout, DualState, lipschitz_constants
from .functions import (
    BoxIndicatorFn,
    L1PlusBoxFn,
    ProxableFn,
    QuadraticBoxFn,
    ScaledL1Fn,
    ZeroFn,
    saturated_soft_threshold,
)
from .problem import ProblemInstance


class UncertifiedSolutionWarning(RuntimeWarning):
    """No active-set candidate passed the KKT checks."""


def box_qp_exact(Q, c, lb, ub, tol: float = 1e-10) -> np.ndarray:
    """Exact minimiser of ``0.5 x'Qx + c'x`` over a box by KKT enumeration.

    All ``3**d`` (free / lower / upper) assignments are tried and the
    KKT-certified candidate with the lowest objective is returned.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    d = c.shape[0]
    lb = np.broadcast_to(np.asarray(lb, dtype=float), (d,))
    ub = np.broadcast_to(np.asarray(ub, dtype=float), (d,))
    if d > 12:
        raise ValueError(f"enumeration is limited to d <= 12, got {d}")
    if not np.allclose(Q, Q.T):
        raise ValueError("Q must be symmetric")
    scale = 1.0 + np.max(np.abs(Q)) + np.max(np.abs(c))
    certified, fallback = [], []
    for status in itertools.product((0, 1, 2), repeat=d):
        status = np.array(status)
        if np.any((status == 1) & ~np.isfinite(lb)) or np.any((status == 2) & ~np.isfinite(ub)):
            continue
        free = status == 0
        x = np.where(status == 1, lb, np.where(status == 2, ub, 0.0))
        if free.any():
            rhs = -c[free] - Q[np.ix_(free, ~free)] @ x[~free]
            x[free] = np.linalg.solve(Q[np.ix_(free, free)], rhs)
        slack = tol * (1.0 + np.abs(x))
        if np.any(x < lb - slack) or np.any(x > ub + slack):
            continue
        x = np.clip(x, lb, ub)
        grad = Q @ x + c
        obj = 0.5 * x @ Q @ x + c @ x
        ok_lo = np.all(grad[status == 1] >= -tol * scale)
        ok_hi = np.all(grad[status == 2] <= tol * scale)
        (certified if ok_lo and ok_hi else fallback).append((obj, tuple(x)))
    pool = certified or fallback
    if not certified:
        warnings.warn("box_qp_exact: no KKT-certified candidate, returning best feasible",
                      UncertifiedSolutionWarning, stacklevel=2)
    if not pool:
        return np.clip(np.zeros(d), lb, ub)
    return np.array(min(pool)[1])


def _prox_piecewise_linear(v, alpha, dead, lo_slope, hi_slope):
    # prox of alpha*h with h(u) = hi*(u - dead)_+ + lo*(u + dead)_-  (lo <= 0 <= hi)
    up = dead + alpha * hi_slope
    down = -dead + alpha * lo_slope
    return np.where(v > up, v - alpha * hi_slope,
                    np.where(v < down, v - alpha * lo_slope, np.clip(v, -dead, dead)))


def prox_conjugate_direct(g: ProxableFn, alpha: float, v) -> np.ndarray:
    """``prox_{alpha g*}(v)`` computed from the conjugate itself.

    The conjugates of the concrete ``g`` are piecewise linear: zero on
    ``[-w, w]`` (``w`` the l1 weight) and with slopes ``ub``/``lb`` outside, so
    the prox is a shift-or-clip. Boxes with ``0`` outside ``[lb, ub]`` fall
    back to the Moreau form.
    """
    v = np.asarray(v, dtype=float)
    if isinstance(g, ZeroFn):
        return np.zeros_like(v)
    if isinstance(g, ScaledL1Fn):
        # g* is the indicator of the l_inf ball of radius weight
        return np.clip(v, -g.weight, g.weight)
    if isinstance(g, BoxIndicatorFn):
        # support function of the box
        return np.where(v > alpha * g.ub, v - alpha * g.ub,
                        np.where(v < alpha * g.lb, v - alpha * g.lb, 0.0))
    if isinstance(g, L1PlusBoxFn):
        if np.all(g.lb <= 0.0) and np.all(g.ub >= 0.0):
            return _prox_piecewise_linear(v, alpha, g.weight, g.lb, g.ub)
        return v - alpha * saturated_soft_threshold(v / alpha, g.weight / alpha, g.lb, g.ub)
    return g.prox_conjugate(alpha, v)


def _check_quadratic(problem: ProblemInstance):
    for k, f in enumerate(problem.fs):
        if not isinstance(f, QuadraticBoxFn):
            raise TypeError(f"node {k}: reference solvers need QuadraticBoxFn, got {type(f).__name__}")


class _Flat:
    """Flat arrays of a problem for monolithic iterations."""

    def __init__(self, problem: ProblemInstance):
        _check_quadratic(problem)
        self.problem = problem
        self.layout = DualLayout(problem.graph, problem.dim)
        self.n, self.d = problem.n, problem.dim

    def tilts(self, y: np.ndarray) -> np.ndarray:
        lay, adj = self.layout, self.problem.graph.adjacency
        V = np.empty((self.n, self.d))
        for k in range(self.n):
            v = -y[lay.mu_slice(k)]
            for j in adj[k]:
                v = v - (y[lay.lam_slice(k, j)] - y[lay.lam_slice(j, k)])
            V[k] = v
        return V

    def primal(self, y: np.ndarray, nodes=None) -> dict[int, np.ndarray]:
        V = self.tilts(y)
        nodes = range(self.n) if nodes is None else nodes
        return {k: box_qp_exact(f.hessian, f.linear - V[k], f.lb, f.ub)
                for k in nodes for f in (self.problem.fs[k],)}

    def grad_block(self, k: int, X: dict) -> np.ndarray:
        parts = [X[j] - X[k] for j in self.problem.graph.adjacency[k]]
        return np.concatenate(parts + [-X[k]])

    def prox_block(self, k: int, yk_tilde: np.ndarray, alpha: float) -> np.ndarray:
        out = yk_tilde.copy()
        out[-self.d:] = prox_conjugate_direct(self.problem.gs[k], alpha, yk_tilde[-self.d:])
        return out

    def weight_vector(self, alphas) -> np.ndarray:
        w = np.empty(self.layout.size)
        for k in range(self.n):
            w[self.layout.block_slice(k)] = alphas[k]
        return w


def weighted_pg_reference(problem: ProblemInstance, y0: DualState | None, T: int, alphas=None) -> np.ndarray:
    """Trajectory ``y(0..T)`` of the weighted proximal gradient on the stacked dual.

    ``y(t+1) = prox_{W, G*}(y(t) - W grad F*(y(t)))`` with ``W = diag(alphas)``
    (default ``1/(n L_i)``) repeated over each block. Returns a
    ``(T + 1, size)`` array.
    """
    flat = _Flat(problem)
    if alphas is None:
        alphas = lipschitz_constants(problem).alpha_sync
    W = flat.weight_vector(alphas)
    y = np.zeros(flat.layout.size) if y0 is None else y0.y.copy()
    traj = np.empty((T + 1, y.size))
    traj[0] = y
    for t in range(T):
        X = flat.primal(y)
        grad = np.concatenate([flat.grad_block(k, X) for k in range(flat.n)])
        y_tilde = y - W * grad
        y = np.concatenate([flat.prox_block(k, y_tilde[flat.layout.block_slice(k)], alphas[k])
                            for k in range(flat.n)])
        traj[t + 1] = y
    return traj


def ucdc_reference(problem: ProblemInstance, y0: DualState | None, blocks, steps=None) -> np.ndarray:
    """Replay of block-coordinate prox-gradient updates along a given block sequence.

    Block ``i_t`` moves by ``prox_{s g*}(y_i - s grad_i F*(y))`` with
    ``s = steps[i_t]`` (default ``1/L_i``); every other block is frozen.
    Returns the ``(len(blocks) + 1, size)`` trajectory.
    """
    flat = _Flat(problem)
    if steps is None:
        steps = lipschitz_constants(problem).alpha_async
    y = np.zeros(flat.layout.size) if y0 is None else y0.y.copy()
    blocks = list(blocks)
    traj = np.empty((len(blocks) + 1, y.size))
    traj[0] = y
    adj = problem.graph.adjacency
    for t, i in enumerate(blocks):
        if not 0 <= i < flat.n:
            raise ValueError(f"block id {i} out of range")
        X = flat.primal(y, nodes=(i, *adj[i]))
        sl = flat.layout.block_slice(i)
        y = y.copy()
        y[sl] = flat.prox_block(i, y[sl] - steps[i] * flat.grad_block(i, X), steps[i])
        traj[t + 1] = y
    return traj


def pack_problem(problem: ProblemInstance) -> dict:
    """Flat arrays in the layout expected by the compiled kernels."""
    _check_quadratic(problem)
    n, d = problem.n, problem.dim
    gtype = np.zeros(n, dtype=np.int64)
    gw = np.zeros(n)
    glb = np.full((n, d), -np.inf)
    gub = np.full((n, d), np.inf)
    for k, g in enumerate(problem.gs):
        if isinstance(g, ZeroFn):
            gtype[k] = _kernels.G_ZERO
        elif isinstance(g, ScaledL1Fn):
            gtype[k], gw[k] = _kernels.G_L1, g.weight
        elif isinstance(g, BoxIndicatorFn):
            gtype[k] = _kernels.G_BOX
            glb[k], gub[k] = g.lb, g.ub
        elif isinstance(g, L1PlusBoxFn):
            gtype[k], gw[k] = _kernels.G_L1BOX, g.weight
            glb[k], gub[k] = g.lb, g.ub
        else:
            raise TypeError(f"node {k}: no kernel encoding for {type(g).__name__}")
    layout = DualLayout(problem.graph, d)
    indptr, indices, rev = layout.csr
    return dict(
        indptr=indptr, indices=indices, rev=rev,
        Q=np.array([f.hessian for f in problem.fs]),
        c0=np.array([f.linear for f in problem.fs]),
        flb=np.array([f.lb for f in problem.fs]),
        fub=np.array([f.ub for f in problem.fs]),
        gtype=gtype, gw=gw, glb=glb, gub=gub,
    )


def weighted_pg_final(problem: ProblemInstance, y0: DualState | None, T: int, alphas=None,
                      backend=None) -> DualState:
    """Endpoint of ``T`` weighted proximal-gradient steps, run in the hot kernel.

    Meant for long runs (e.g. a near-converged dual minimiser proxy);
    :func:`weighted_pg_reference` is the step-by-step oracle it is checked against.
    """
    backend = backend or _kernels
    layout = DualLayout(problem.graph, problem.dim)
    if alphas is None:
        alphas = lipschitz_constants(problem).alpha_sync
    y0 = y0 if y0 is not None else DualState(layout)
    packed = pack_problem(problem)
    lam, mu = backend.weighted_pg_run(alpha=np.asarray(alphas, dtype=float), lam=y0.lam_array(),
                                      mu=y0.mu_array(), iters=int(T), **packed)
    return DualState.from_arrays(layout, lam, mu)


# ---------------------------------------------------------------------------
# centralised ground truth


@dataclass
class ReferenceSolution:
    x_opt: np.ndarray
    primal_opt_value: float
    dual_opt_value: float
    iterations: int
    residual: float
    converged: bool


def aggregate(problem: ProblemInstance):
    """Collapse ``sum_i f_i + g_i`` into ``0.5 x'Hx + c'x + const + w||x||_1 + I_box``."""
    _check_quadratic(problem)
    d = problem.dim
    H = sum(f.hessian for f in problem.fs)
    c = sum(f.linear for f in problem.fs)
    const = sum(f.const for f in problem.fs)
    lb = np.full(d, -np.inf)
    ub = np.full(d, np.inf)
    l1 = 0.0
    for f in problem.fs:
        lb, ub = np.maximum(lb, f.lb), np.minimum(ub, f.ub)
    for k, g in enumerate(problem.gs):
        if not isinstance(g, (ZeroFn, ScaledL1Fn, BoxIndicatorFn, L1PlusBoxFn)):
            raise TypeError(f"node {k}: cannot aggregate {type(g).__name__}")
        l1 += g.l1_weight
        if g.lb is not None:
            lb, ub = np.maximum(lb, g.lb), np.minimum(ub, g.ub)
    if np.any(lb > ub):
        raise ValueError("local constraint sets have empty intersection")
    return H, c, const, l1, lb, ub


def centralized_solve(problem: ProblemInstance, tol: float = 1e-12, max_iter: int = 1_000_000) -> ReferenceSolution:
    """Solve the aggregate problem by accelerated proximal gradient.

    FISTA with function-value restart on ``0.5 x'Hx + c'x`` plus the
    saturated soft threshold prox, stopped when successive iterates differ
    by at most ``tol``; then an active-set polish that solves the identified
    linear system exactly and is kept only if it does not raise the objective.
    The dual optimum is ``-p*`` (strong duality).
    """
    H, c, const, l1, lb, ub = aggregate(problem)
    d = c.shape[0]

    def objective(x):
        return 0.5 * x @ H @ x + c @ x + const + l1 * np.sum(np.abs(x))

    def prox(v, step):
        return np.clip(np.sign(v) * np.maximum(np.abs(v) - step * l1, 0.0), lb, ub)

    step = 1.0 / np.linalg.eigvalsh(H)[-1]
    x = prox(np.zeros(d), step)
    z, theta = x.copy(), 1.0
    f_prev = objective(x)
    converged, diff, it = False, math.inf, 0
    for it in range(1, max_iter + 1):
        x_new = prox(z - step * (H @ z + c), step)
        f_new = objective(x_new)
        if f_new > f_prev:
            # restart momentum from the last accepted point
            z, theta = x.copy(), 1.0
            x_new = prox(x - step * (H @ x + c), step)
            f_new = objective(x_new)
        theta_new = (1.0 + math.sqrt(1.0 + 4.0 * theta**2)) / 2.0
        z = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        diff = float(np.max(np.abs(x_new - x)))
        x, theta, f_prev = x_new, theta_new, f_new
        if diff <= tol:
            converged = True
            break
    x = _polish(x, H, c, l1, lb, ub, objective)
    residual = float(np.max(np.abs(x - prox(x - step * (H @ x + c), step))))
    p_star = float(objective(x))
    return ReferenceSolution(x_opt=x, primal_opt_value=p_star, dual_opt_value=-p_star,
                             iterations=it, residual=residual, converged=converged)


def _polish(x, H, c, l1, lb, ub, objective, ident_tol=1e-8):
    d = x.shape[0]
    at_lb = np.isfinite(lb) & (np.abs(x - lb) <= ident_tol)
    at_ub = np.isfinite(ub) & (np.abs(x - ub) <= ident_tol) & ~at_lb
    zero = (np.abs(x) <= ident_tol) & ~at_lb & ~at_ub
    free = ~(at_lb | at_ub | zero)
    xp = np.where(at_lb, lb, np.where(at_ub, ub, 0.0))
    if free.any():
        s = np.sign(x[free])
        rhs = -c[free] - l1 * s - H[np.ix_(free, ~free)] @ xp[~free]
        xp[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
        if np.any(np.sign(xp[free]) != s) or np.any(xp < lb) or np.any(xp > ub):
            return x
    if objective(xp) <= objective(x) and np.max(np.abs(xp - x), initial=0.0) <= 1e-6:
        return xp
    return x
