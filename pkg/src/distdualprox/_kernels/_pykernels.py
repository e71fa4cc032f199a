"""Pure-Python hot kernels (fallback when the compiled extension is absent).

Both backends expose the same functions with the same semantics; the
compiled module mirrors this file loop for loop.
"""

from __future__ import annotations

import numpy as np

G_ZERO, G_L1, G_BOX, G_L1BOX = 0, 1, 2, 3

# feasibility / multiplier-sign slack for accepting an active-set candidate
KKT_TOL = 1e-11


def box_qp(Q, c, lb, ub):
    """Minimise ``0.5 x'Qx + c'x`` over ``lb <= x <= ub`` by active-set enumeration.

    Every coordinate is free, at its lower bound or at its upper bound; the
    ``3**d`` assignments are visited in base-3 order starting from the
    all-free one and the first candidate satisfying the KKT conditions is
    returned. Infinite bounds are never activated.

    Returns ``(x, certified)``; ``certified`` is False only if no candidate
    passed, in which case the best feasible candidate is returned.
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    d = c.shape[0]
    scale = 1.0 + np.max(np.abs(c), initial=0.0) + np.max(np.abs(Q), initial=0.0)
    best_x, best_val = None, np.inf
    state = [0] * d
    for _ in range(3**d):
        ok = True
        for k in range(d):
            if (state[k] == 1 and not np.isfinite(lb[k])) or (
                state[k] == 2 and not np.isfinite(ub[k])
            ):
                ok = False
                break
        if ok:
            x = np.empty(d)
            free = [k for k in range(d) if state[k] == 0]
            fixed = [k for k in range(d) if state[k] != 0]
            for k in fixed:
                x[k] = lb[k] if state[k] == 1 else ub[k]
            if free:
                rhs = -c[free]
                if fixed:
                    rhs = rhs - Q[np.ix_(free, fixed)] @ x[fixed]
                x[free] = np.linalg.solve(Q[np.ix_(free, free)], rhs)
            feasible = True
            for k in free:
                tol = KKT_TOL * (1.0 + abs(x[k]))
                if x[k] < lb[k] - tol or x[k] > ub[k] + tol:
                    feasible = False
                    break
            if feasible:
                np.clip(x, lb, ub, out=x)
                grad = Q @ x + c
                kkt = True
                for k in fixed:
                    tol = KKT_TOL * scale * (1.0 + abs(x[k]))
                    if (state[k] == 1 and grad[k] < -tol) or (state[k] == 2 and grad[k] > tol):
                        kkt = False
                        break
                if kkt:
                    return x, True
                val = 0.5 * x @ Q @ x + c @ x
                if val < best_val:
                    best_x, best_val = x, val
        # next base-3 state
        for k in range(d):
            state[k] += 1
            if state[k] < 3:
                break
            state[k] = 0
    if best_x is None:
        best_x = np.clip(np.zeros(d), lb, ub)
    return best_x, False


def prox_scaled(gtype, weight, glb, gub, t, u):
    """``prox_{t g}(u)`` for the four packed regulariser types."""
    if gtype == G_ZERO:
        return u.copy()
    out = u
    if gtype in (G_L1, G_L1BOX):
        thr = t * weight
        out = np.sign(u) * np.maximum(np.abs(u) - thr, 0.0)
    if gtype in (G_BOX, G_L1BOX):
        out = np.clip(out, glb, gub)
    return out.copy() if out is u else out


def weighted_pg_run(indptr, indices, rev, Q, c0, flb, fub, gtype, gw, glb, gub, alpha, lam, mu, iters):
    """Run ``iters`` weighted proximal-gradient steps on the stacked dual.

    ``lam[e]`` holds the multiplier owned by node ``i`` for its neighbour
    ``indices[e]`` (CSR row ``i``); ``rev[e]`` points at the mirror entry.
    Returns new ``(lam, mu)`` arrays; the inputs are not modified.
    """
    lam = np.array(lam, dtype=float)
    mu = np.array(mu, dtype=float)
    n, d = mu.shape
    x = np.empty((n, d))
    for _ in range(iters):
        for k in range(n):
            v = -mu[k].copy()
            for e in range(indptr[k], indptr[k + 1]):
                v -= lam[e] - lam[rev[e]]
            x[k], _ok = box_qp(Q[k], c0[k] - v, flb[k], fub[k])
        for k in range(n):
            a = alpha[k]
            for e in range(indptr[k], indptr[k + 1]):
                lam[e] += a * (x[k] - x[indices[e]])
            mt = mu[k] + a * x[k]
            mu[k] = mt - a * prox_scaled(gtype[k], gw[k], glb[k], gub[k], 1.0 / a, mt / a)
    return lam, mu
