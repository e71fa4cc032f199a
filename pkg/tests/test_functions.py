import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import G_KINDS, make_g, random_quadratic
from distdualprox.functions import (
    BoxIndicatorFn,
    ConvergenceError,
    L1PlusBoxFn,
    QuadraticBoxFn,
    ScaledL1Fn,
    ZeroFn,
    conjugate_value,
    grad_conjugate,
    prox,
    prox_conjugate,
    saturated_soft_threshold,
    soft_threshold,
)
from distdualprox.reference import prox_conjugate_direct

finite = st.floats(-50, 50, allow_nan=False)


def vecs(d):
    return arrays(np.float64, d, elements=finite)


# --- grad_conjugate / conjugate_value examples


def test_grad_conjugate_isotropic():
    f = QuadraticBoxFn.isotropic(2.0, 2)
    assert np.allclose(grad_conjugate(f, [4.0, -2.0]), [2.0, -1.0], atol=1e-14)


def test_grad_conjugate_shifted_square():
    f = QuadraticBoxFn([[1.0]], [3.0])
    assert grad_conjugate(f, [2.0]) == pytest.approx([4.0], abs=1e-14)


def test_grad_conjugate_clipped_by_box():
    f = QuadraticBoxFn([[1.0]], [3.0], 0.0, 1.0)
    assert grad_conjugate(f, [0.0]) == pytest.approx([1.0], abs=1e-15)


def test_conjugate_value_examples():
    assert conjugate_value(QuadraticBoxFn.isotropic(1.0, 2), [3.0, 4.0]) == pytest.approx(12.5, abs=1e-12)
    assert conjugate_value(QuadraticBoxFn([[1.0]], [3.0]), [0.0]) == pytest.approx(0.0, abs=1e-12)
    assert conjugate_value(QuadraticBoxFn([[1.0]], [3.0], 0.0, 1.0), [0.0]) == pytest.approx(-4.0, abs=1e-12)


def test_value_outside_box_is_infinite():
    f = QuadraticBoxFn([[1.0]], [3.0], 0.0, 1.0)
    assert f.value([1.5]) == math.inf
    assert f.value([1.0]) == pytest.approx(4.0)


def test_sigma_modes():
    A = np.array([[2.0, 0.0], [0.0, 1.0]])
    assert QuadraticBoxFn(A, [0, 0]).sigma == pytest.approx(1.0)
    assert QuadraticBoxFn(A, [0, 0], sigma_mode="strict").sigma == pytest.approx(2.0)
    with pytest.raises(ValueError):
        QuadraticBoxFn(A, [0, 0], sigma_mode="other")


def test_singular_design_rejected():
    with pytest.raises(ValueError, match="singular"):
        QuadraticBoxFn([[1.0, 1.0]], [0.0])


def test_malformed_box_rejected():
    with pytest.raises(ValueError):
        QuadraticBoxFn(np.eye(2), [0, 0], [0, 1], [1, 1])


def test_nonfinite_tilt_rejected():
    with pytest.raises(ValueError):
        QuadraticBoxFn(np.eye(1), [0.0]).grad_conjugate([math.inf])


def test_iterative_fallback_agrees_with_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(20):
        f = random_quadratic(3, rng, box=rng.uniform(0.2, 1.0, 3))
        v = rng.normal(size=3) * 3
        assert np.allclose(f.grad_conjugate_iterative(v), f.grad_conjugate(v), atol=1e-9)


def test_iterative_fallback_reports_residual():
    f = QuadraticBoxFn(np.diag([1.0, 1e-3]), [1.0, 1.0])
    with pytest.raises(ConvergenceError) as info:
        f.grad_conjugate_iterative(np.zeros(2), max_iter=3)
    assert info.value.residual > 0


def test_high_dimension_uses_fallback():
    rng = np.random.default_rng(0)
    d = 12
    A = rng.normal(size=(20, d))
    f = QuadraticBoxFn(A, rng.normal(size=20), -0.3, 0.3)
    v = rng.normal(size=d)
    x = f.grad_conjugate(v)
    assert np.all(np.abs(x) <= 0.3)
    # KKT certificate instead of a 3**12 enumeration
    g = f.hessian @ x + f.linear - v
    free = np.abs(x) < 0.3 - 1e-9
    assert np.all(np.abs(g[free]) <= 1e-8)
    assert np.all(g[x <= -0.3 + 1e-9] >= -1e-8) and np.all(g[x >= 0.3 - 1e-9] <= 1e-8)
    assert free.any() and (~free).any()


# --- prox examples


def test_prox_zero_is_identity():
    v = np.array([1.5, -2.0])
    assert np.array_equal(prox(ZeroFn(2), 3.0, v), v)


@pytest.mark.parametrize("v,out", [(0.5, 0.4), (0.05, 0.0), (-0.5, -0.4)])
def test_prox_l1(v, out):
    assert prox(ScaledL1Fn(0.1, 1), 1.0, [v])[0] == pytest.approx(out, abs=1e-15)


def test_prox_box_projection():
    assert prox(BoxIndicatorFn(-0.8, 0.8, 1), 2.0, [1.3])[0] == 0.8


def test_prox_conjugate_examples():
    assert np.array_equal(prox_conjugate(ZeroFn(2), 1.0, [2.0, -1.0]), [0.0, 0.0])
    assert prox_conjugate(ScaledL1Fn(0.1, 1), 1.0, [0.5])[0] == pytest.approx(0.1, abs=1e-15)


@pytest.mark.parametrize("v,out", [(3.0, 0.8), (0.05, 0.0), (0.5, 0.4)])
def test_saturated_soft_threshold(v, out):
    assert saturated_soft_threshold([v], 0.1, [-0.8], [0.8])[0] == pytest.approx(out, abs=1e-15)


def test_saturated_soft_threshold_errors():
    with pytest.raises(ValueError):
        saturated_soft_threshold([0.0], 0.1, [1.0], [0.0])
    with pytest.raises(ValueError):
        saturated_soft_threshold([0.0], -0.1, [-1.0], [1.0])


def test_saturated_equals_l1box_prox():
    rng = np.random.default_rng(2)
    g = L1PlusBoxFn(0.3, -0.5, 0.9, 4)
    for _ in range(100):
        v, a = rng.normal(size=4) * 2, rng.uniform(0.1, 3)
        assert np.array_equal(g.prox(a, v), saturated_soft_threshold(v, a * 0.3, g.lb, g.ub))


def test_soft_threshold_dead_zone():
    assert np.array_equal(soft_threshold(np.array([-0.1, 0.0, 0.1]), 0.1), [0.0, 0.0, 0.0])


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_prox_rejects_nonpositive_step(bad):
    for g in (ZeroFn(1), ScaledL1Fn(0.1, 1), BoxIndicatorFn(-1, 1, 1), L1PlusBoxFn(0.1, -1, 1, 1)):
        with pytest.raises(ValueError):
            g.prox(bad, [0.0])
        with pytest.raises(ValueError):
            g.prox_conjugate(bad, [0.0])


# --- conjugate values of the g family


def test_zero_conjugate_indicator():
    g = ZeroFn(2)
    assert g.conjugate_value([0.0, 0.0]) == 0.0
    assert g.conjugate_value([1e-3, 0.0]) == math.inf


def test_l1_conjugate_indicator():
    g = ScaledL1Fn(0.1, 2)
    assert g.conjugate_value([0.1, -0.05]) == 0.0
    assert g.conjugate_value([0.11, 0.0]) == math.inf


def test_box_and_l1box_conjugates_by_grid():
    rng = np.random.default_rng(4)
    grid = np.linspace(-0.7, 1.2, 20001)
    g_box = BoxIndicatorFn(-0.7, 1.2, 1)
    g_l1b = L1PlusBoxFn(0.25, -0.7, 1.2, 1)
    for mu in rng.normal(size=30) * 2:
        assert g_box.conjugate_value([mu]) == pytest.approx(np.max(mu * grid), abs=1e-12)
        assert g_l1b.conjugate_value([mu]) == pytest.approx(np.max(mu * grid - 0.25 * np.abs(grid)), abs=1e-4)


# --- properties


def _g_instances():
    rng = np.random.default_rng(11)
    return {k: make_g(k, 3, rng) for k in G_KINDS}


G_INST = _g_instances()


@settings(max_examples=300, deadline=None)
@given(kind=st.sampled_from(G_KINDS), v=vecs(3), loga=st.floats(-3, 3))
def test_moreau_identity(kind, v, loga):
    g, a = G_INST[kind], 10.0**loga
    # prox of g* from its closed form, prox of g from the shrink/clip form
    lhs = prox(g, a, v) + a * prox_conjugate_direct(g, 1.0 / a, v / a)
    assert np.linalg.norm(lhs - v) <= 1e-9 * (1 + np.linalg.norm(v))


@settings(max_examples=300, deadline=None)
@given(kind=st.sampled_from(G_KINDS), v=vecs(3), loga=st.floats(-3, 3))
def test_prox_conjugate_two_routes(kind, v, loga):
    g, a = G_INST[kind], 10.0**loga
    assert np.linalg.norm(prox_conjugate(g, a, v) - prox_conjugate_direct(g, a, v)) <= 1e-9 * (1 + np.linalg.norm(v))


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(G_KINDS), v1=vecs(3), v2=vecs(3), loga=st.floats(-3, 3))
def test_prox_nonexpansive(kind, v1, v2, loga):
    g, a = G_INST[kind], 10.0**loga
    assert np.linalg.norm(prox(g, a, v1) - prox(g, a, v2)) <= np.linalg.norm(v1 - v2) * (1 + 1e-12) + 1e-12
    assert (np.linalg.norm(prox_conjugate(g, a, v1) - prox_conjugate(g, a, v2))
            <= np.linalg.norm(v1 - v2) * (1 + 1e-12) + 1e-9 * (1 + np.linalg.norm(v1) + np.linalg.norm(v2)))


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(G_KINDS), v=vecs(3), loga=st.floats(-3, 3))
def test_prox_conjugate_lands_in_domain(kind, v, loga):
    g, a = G_INST[kind], 10.0**loga
    assert g.conjugate_value(prox_conjugate(g, a, v)) < math.inf


def _f_instances():
    rng = np.random.default_rng(21)
    return [random_quadratic(3, rng), random_quadratic(3, rng, box=np.array([0.4, 1.0, 0.7])),
            random_quadratic(2, rng, box=np.array([0.3, 0.3])), QuadraticBoxFn.isotropic(0.5, 3)]


F_INST = _f_instances()


@settings(max_examples=200, deadline=None)
@given(k=st.integers(0, 3), data=st.data())
def test_grad_conjugate_lipschitz(k, data):
    f = F_INST[k]
    v1 = data.draw(vecs(f.dim))
    v2 = data.draw(vecs(f.dim))
    # the true modulus is 2*lambda_min; sigma may be smaller, which only loosens this
    lhs = np.linalg.norm(grad_conjugate(f, v1) - grad_conjugate(f, v2))
    assert lhs <= np.linalg.norm(v1 - v2) / f.sigma * (1 + 1e-9) + 1e-12


@settings(max_examples=200, deadline=None)
@given(k=st.integers(0, 3), data=st.data())
def test_conjugate_midpoint_convexity(k, data):
    f = F_INST[k]
    v1 = data.draw(vecs(f.dim))
    v2 = data.draw(vecs(f.dim))
    mid = conjugate_value(f, (v1 + v2) / 2)
    avg = (conjugate_value(f, v1) + conjugate_value(f, v2)) / 2
    assert mid <= avg + 1e-9 * (1 + abs(avg))


@settings(max_examples=100, deadline=None)
@given(k=st.integers(0, 3), data=st.data())
def test_conjugate_gradient_by_finite_differences(k, data):
    f = F_INST[k]
    v = data.draw(arrays(np.float64, f.dim, elements=st.floats(-5, 5)))
    x = grad_conjugate(f, v)
    # only at points with no active bound
    if f.has_box and np.any(np.minimum(x - f.lb, f.ub - x) < 1e-3):
        return
    h = 1e-5
    fd = np.array([(conjugate_value(f, v + h * e) - conjugate_value(f, v - h * e)) / (2 * h)
                   for e in np.eye(f.dim)])
    assert np.linalg.norm(fd - x) <= 1e-5 * max(1.0, np.linalg.norm(x))


def test_box_qp_kernel_certified_and_kkt():
    from distdualprox._kernels import box_qp

    rng = np.random.default_rng(8)
    for _ in range(200):
        d = int(rng.integers(1, 5))
        M = rng.normal(size=(d + 2, d))
        Q = M.T @ M + 0.1 * np.eye(d)
        c = rng.normal(size=d) * 3
        lb, ub = -rng.uniform(0.1, 1, d), rng.uniform(0.1, 1, d)
        x, ok = box_qp(Q, c, lb, ub)
        assert ok
        g = Q @ x + c
        free = (x > lb) & (x < ub)
        assert np.all(np.abs(g[free]) <= 1e-10 * (1 + np.abs(c).max()))
        assert np.all(g[x == lb] >= -1e-10) and np.all(g[x == ub] <= 1e-10)
