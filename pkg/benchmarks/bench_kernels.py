"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--iters N] [--repeat R]

Reports the best-of-R wall time per call for each backend, the speedup, and
the largest difference between the two backends' outputs.
"""

import argparse
import sys
import time

import numpy as np

from distdualprox import _kernels
from distdualprox.dual import lipschitz_constants
from distdualprox.lasso import ExperimentConfig, generate_lasso
from distdualprox.reference import pack_problem


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_box_qp(backend, repeat, calls=2000):
    rng = np.random.default_rng(0)
    cases = []
    for _ in range(calls):
        M = rng.normal(size=(5, 3))
        cases.append((M.T @ M + 0.1 * np.eye(3), rng.normal(size=3), -np.full(3, 0.5), np.full(3, 0.5)))

    def go():
        return np.array([backend.box_qp(*c)[0] for c in cases])

    t, out = best_time(go, repeat)
    return t / calls, out


def bench_weighted_pg(backend, iters, repeat):
    P = generate_lasso(ExperimentConfig())
    packed = pack_problem(P)
    alpha = lipschitz_constants(P).alpha_sync
    n_lam = int(packed["indptr"][-1])

    def go():
        lam = np.zeros((n_lam, P.dim))
        mu = np.zeros((P.n, P.dim))
        return np.concatenate(backend.weighted_pg_run(alpha=alpha, lam=lam, mu=mu, iters=iters,
                                                      **packed), axis=None)

    return best_time(go, repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=2000, help="weighted-PG iterations per run")
    ap.add_argument("--repeat", type=int, default=3, help="timing repetitions (best is kept)")
    args = ap.parse_args(argv)
    if _kernels.compiled_backend is None:
        print("compiled backend not built; run `pip install -e . --no-build-isolation` first")
        return 1
    rows = []
    py_t, py_out = bench_box_qp(_kernels.python_backend, args.repeat)
    c_t, c_out = bench_box_qp(_kernels.compiled_backend, args.repeat)
    rows.append(("box_qp (d=3, per call)", py_t, c_t, float(np.max(np.abs(py_out - c_out)))))
    py_t, py_out = bench_weighted_pg(_kernels.python_backend, args.iters, args.repeat)
    c_t, c_out = bench_weighted_pg(_kernels.compiled_backend, args.iters, args.repeat)
    rows.append((f"weighted_pg_run (n=10, {args.iters} iters)", py_t, c_t,
                 float(np.max(np.abs(py_out - c_out)))))
    print(f"{'kernel':40s} {'python [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s} {'max diff':>10s}")
    for name, p, c, diff in rows:
        print(f"{name:40s} {p:12.3e} {c:13.3e} {p / c:8.1f} {diff:10.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
