import sys

import numpy as np
import pytest

from distdualprox.functions import (
    BoxIndicatorFn,
    L1PlusBoxFn,
    QuadraticBoxFn,
    ScaledL1Fn,
    ZeroFn,
)
from distdualprox.graph import erdos_renyi, path_graph
from distdualprox.lasso import ExperimentConfig, generate_lasso_data
from distdualprox.problem import ProblemInstance
from distdualprox.reference import centralized_solve

G_KINDS = ("zero", "l1", "box", "l1box")


def make_g(kind, d, rng):
    if kind == "zero":
        return ZeroFn(d)
    if kind == "l1":
        return ScaledL1Fn(rng.uniform(0.01, 0.3), d)
    lb = -rng.uniform(0.3, 1.5, d)
    ub = rng.uniform(0.3, 1.5, d)
    if kind == "box":
        return BoxIndicatorFn(lb, ub, d)
    return L1PlusBoxFn(rng.uniform(0.01, 0.3), lb, ub, d)


def random_quadratic(d, rng, box=None, m=None):
    m = m or d + 3
    A = rng.standard_normal((m, d)) / np.sqrt(m)
    b = rng.standard_normal(m)
    if box is None:
        return QuadraticBoxFn(A, b)
    return QuadraticBoxFn(A, b, -box, box)


def random_instance(rng, n, d, g_kinds=G_KINDS, f_box_prob=0.5):
    """Connected random graph with mixed local terms."""
    if n == 2:
        graph = path_graph(2)
    else:
        graph = erdos_renyi(n, 0.5, int(rng.integers(2**31)))
    fs, gs = [], []
    for _ in range(n):
        box = rng.uniform(0.5, 2.0, d) if rng.random() < f_box_prob else None
        fs.append(random_quadratic(d, rng, box))
        gs.append(make_g(g_kinds[int(rng.integers(len(g_kinds)))], d, rng))
    return ProblemInstance(graph, fs, gs)


@pytest.fixture(scope="session")
def desk():
    """Desk-scale LASSO instance with its centralised solution."""
    cfg = ExperimentConfig()
    data = generate_lasso_data(cfg)
    return cfg, data.problem, centralized_solve(data.problem)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = [mod.RESULTS[k] for k in sorted(mod.RESULTS)] if mod is not None else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
