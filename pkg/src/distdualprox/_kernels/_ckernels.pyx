# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same contract as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, isfinite, INFINITY

cnp.import_array()

cdef enum:
    MAXD = 16
cdef double KKT_TOL = 1e-11


cdef int _solve(double* M, double* r, int m) noexcept nogil:
    """Gaussian elimination with partial pivoting, in place; solution in r."""
    cdef int i, j, k, p
    cdef double piv, f, tmp
    for k in range(m):
        p = k
        piv = fabs(M[k * m + k])
        for i in range(k + 1, m):
            if fabs(M[i * m + k]) > piv:
                piv = fabs(M[i * m + k])
                p = i
        if piv == 0.0:
            return 1
        if p != k:
            for j in range(m):
                tmp = M[k * m + j]
                M[k * m + j] = M[p * m + j]
                M[p * m + j] = tmp
            tmp = r[k]
            r[k] = r[p]
            r[p] = tmp
        for i in range(k + 1, m):
            f = M[i * m + k] / M[k * m + k]
            if f != 0.0:
                for j in range(k, m):
                    M[i * m + j] -= f * M[k * m + j]
                r[i] -= f * r[k]
    for k in range(m - 1, -1, -1):
        tmp = r[k]
        for j in range(k + 1, m):
            tmp -= M[k * m + j] * r[j]
        r[k] = tmp / M[k * m + k]
    return 0


cdef int _box_qp(const double* Q, const double* c, const double* lb, const double* ub,
                 int d, double* out) noexcept nogil:
    """Returns 1 when a KKT-certified candidate was found, 0 otherwise."""
    cdef int state[MAXD]
    cdef int free_idx[MAXD]
    cdef int fixed_idx[MAXD]
    cdef double x[MAXD]
    cdef double best[MAXD]
    cdef double grad[MAXD]
    cdef double M[MAXD * MAXD]
    cdef double r[MAXD]
    cdef int k, a, b, nf, nx, feasible, kkt, have_best = 0
    cdef long it, total = 1
    cdef double scale = 0.0, tol, val, best_val = INFINITY
    for k in range(d):
        state[k] = 0
        total *= 3
        if fabs(c[k]) > scale:
            scale = fabs(c[k])
    val = 0.0
    for k in range(d * d):
        if fabs(Q[k]) > val:
            val = fabs(Q[k])
    scale = 1.0 + scale + val

    for it in range(total):
        feasible = 1
        for k in range(d):
            if (state[k] == 1 and not isfinite(lb[k])) or (state[k] == 2 and not isfinite(ub[k])):
                feasible = 0
                break
        if feasible:
            nf = 0
            nx = 0
            for k in range(d):
                if state[k] == 0:
                    free_idx[nf] = k
                    nf += 1
                else:
                    fixed_idx[nx] = k
                    nx += 1
                    x[k] = lb[k] if state[k] == 1 else ub[k]
            if nf > 0:
                for a in range(nf):
                    r[a] = -c[free_idx[a]]
                    for b in range(nx):
                        r[a] -= Q[free_idx[a] * d + fixed_idx[b]] * x[fixed_idx[b]]
                    for b in range(nf):
                        M[a * nf + b] = Q[free_idx[a] * d + free_idx[b]]
                if _solve(M, r, nf) != 0:
                    feasible = 0
                else:
                    for a in range(nf):
                        x[free_idx[a]] = r[a]
            if feasible:
                for a in range(nf):
                    k = free_idx[a]
                    tol = KKT_TOL * (1.0 + fabs(x[k]))
                    if x[k] < lb[k] - tol or x[k] > ub[k] + tol:
                        feasible = 0
                        break
            if feasible:
                for k in range(d):
                    if x[k] < lb[k]:
                        x[k] = lb[k]
                    elif x[k] > ub[k]:
                        x[k] = ub[k]
                for a in range(d):
                    grad[a] = c[a]
                    for b in range(d):
                        grad[a] += Q[a * d + b] * x[b]
                kkt = 1
                for b in range(nx):
                    k = fixed_idx[b]
                    tol = KKT_TOL * scale * (1.0 + fabs(x[k]))
                    if (state[k] == 1 and grad[k] < -tol) or (state[k] == 2 and grad[k] > tol):
                        kkt = 0
                        break
                if kkt:
                    for k in range(d):
                        out[k] = x[k]
                    return 1
                val = 0.0
                for a in range(d):
                    val += c[a] * x[a] + 0.5 * x[a] * (grad[a] - c[a])
                if val < best_val:
                    best_val = val
                    have_best = 1
                    for k in range(d):
                        best[k] = x[k]
        for k in range(d):
            state[k] += 1
            if state[k] < 3:
                break
            state[k] = 0
    for k in range(d):
        if have_best:
            out[k] = best[k]
        else:
            out[k] = 0.0 if lb[k] <= 0.0 <= ub[k] else (lb[k] if lb[k] > 0.0 else ub[k])
    return 0


def box_qp(Q, c, lb, ub):
    cdef double[:, ::1] Qv = np.ascontiguousarray(Q, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(c, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(lb, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(ub, dtype=np.float64)
    cdef int d = cv.shape[0]
    if d > MAXD:
        raise ValueError(f"compiled box_qp supports d <= {MAXD}, got {d}")
    out = np.empty(d)
    cdef double[::1] ov = out
    cdef int ok = _box_qp(&Qv[0, 0], &cv[0], &lv[0], &uv[0], d, &ov[0])
    return out, bool(ok)


cdef inline double _soft(double u, double thr) noexcept nogil:
    if u > thr:
        return u - thr
    if u < -thr:
        return u + thr
    return 0.0


def weighted_pg_run(indptr, indices, rev, Q, c0, flb, fub, gtype, gw, glb, gub, alpha, lam, mu, long iters):
    cdef long[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef long[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef long[::1] rv = np.ascontiguousarray(rev, dtype=np.int64)
    cdef double[:, :, ::1] Qv = np.ascontiguousarray(Q, dtype=np.float64)
    cdef double[:, ::1] c0v = np.ascontiguousarray(c0, dtype=np.float64)
    cdef double[:, ::1] flv = np.ascontiguousarray(flb, dtype=np.float64)
    cdef double[:, ::1] fuv = np.ascontiguousarray(fub, dtype=np.float64)
    cdef long[::1] gt = np.ascontiguousarray(gtype, dtype=np.int64)
    cdef double[::1] gwv = np.ascontiguousarray(gw, dtype=np.float64)
    cdef double[:, ::1] glv = np.ascontiguousarray(glb, dtype=np.float64)
    cdef double[:, ::1] guv = np.ascontiguousarray(gub, dtype=np.float64)
    cdef double[::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    lam_out = np.array(lam, dtype=np.float64, order="C", copy=True)
    mu_out = np.array(mu, dtype=np.float64, order="C", copy=True)
    cdef double[:, ::1] L = lam_out
    cdef double[:, ::1] U = mu_out
    cdef int n = U.shape[0]
    cdef int d = U.shape[1]
    if d > MAXD:
        raise ValueError(f"compiled kernel supports d <= {MAXD}, got {d}")
    X_arr = np.empty((n, d))
    cdef double[:, ::1] X = X_arr
    cdef double cc[MAXD]
    cdef double u, a, inv, w
    cdef long it, e
    cdef int k, l
    with nogil:
        for it in range(iters):
            for k in range(n):
                for l in range(d):
                    cc[l] = c0v[k, l] + U[k, l]
                for e in range(ip[k], ip[k + 1]):
                    for l in range(d):
                        cc[l] += L[e, l] - L[rv[e], l]
                _box_qp(&Qv[k, 0, 0], cc, &flv[k, 0], &fuv[k, 0], d, &X[k, 0])
            for k in range(n):
                a = al[k]
                inv = 1.0 / a
                for e in range(ip[k], ip[k + 1]):
                    for l in range(d):
                        L[e, l] += a * (X[k, l] - X[ix[e], l])
                for l in range(d):
                    u = U[k, l] + a * X[k, l]
                    # u - a * prox_{g/a}(u/a)
                    if gt[k] == 0:
                        U[k, l] = u - a * (u / a)
                    else:
                        w = u / a
                        if gt[k] == 1 or gt[k] == 3:
                            w = _soft(w, inv * gwv[k])
                        if gt[k] == 2 or gt[k] == 3:
                            if w < glv[k, l]:
                                w = glv[k, l]
                            elif w > guv[k, l]:
                                w = guv[k, l]
                        U[k, l] = u - a * w
    return lam_out, mu_out
