"""Convex function oracles.

Two families are needed by the dual algorithms:

* strongly convex ``f`` with a tilted-argmin oracle ``v -> argmin f(x) - v'x``
  (which is the gradient of the conjugate ``f*``), and
* "proxable" ``g`` with proximal, conjugate-value and conjugate-prox oracles.

Extended values are represented by ``math.inf``, never by a large float.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from . import _kernels

INF = math.inf

# Slack for membership tests on conjugate domains. Iterates produced through
# the Moreau identity land on the domain boundary only up to rounding.
DOMAIN_RTOL = 1e-12
DOMAIN_ATOL = 1e-12

# above this dimension the 3**d enumeration is replaced by projected gradient
ENUMERATION_MAX_DIM = 10


class ConvergenceError(RuntimeError):
    """Inner iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


def _vec(v, dim: int | None = None) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected dimension {dim}, got {v.shape[0]}")
    return v


def _box(lb, ub, dim: int) -> tuple[np.ndarray, np.ndarray]:
    lb = np.broadcast_to(np.asarray(lb, dtype=float), (dim,)).copy()
    ub = np.broadcast_to(np.asarray(ub, dtype=float), (dim,)).copy()
    if np.any(np.isnan(lb)) or np.any(np.isnan(ub)) or np.any(lb >= ub):
        raise ValueError(f"malformed box: need lb < ub componentwise, got lb={lb}, ub={ub}")
    return lb, ub


def soft_threshold(v, gamma):
    """Componentwise shrinkage of ``v`` toward zero by ``gamma``."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - gamma, 0.0)


def saturated_soft_threshold(v, gamma, lb, ub):
    """Soft threshold by ``gamma`` then clip into ``[lb, ub]``.

    This is the proximal map of ``gamma*||x||_1 + I_[lb,ub](x)`` (unit step).
    """
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    v = _vec(v)
    lb, ub = _box(lb, ub, v.shape[0])
    return np.clip(soft_threshold(v, gamma), lb, ub)


# ---------------------------------------------------------------------------
# strongly convex part


class StronglyConvexFn(ABC):
    dim: int
    sigma: float

    @abstractmethod
    def value(self, x) -> float:
        ...

    @abstractmethod
    def grad_conjugate(self, v) -> np.ndarray:
        """Unique minimiser of ``f(x) - v'x``."""

    def conjugate_value(self, v) -> float:
        v = _vec(v, self.dim)
        x = self.grad_conjugate(v)
        return float(v @ x) - self.value(x)


class QuadraticBoxFn(StronglyConvexFn):
    """``f(x) = ||A x - b||^2`` on an optional box, ``+inf`` outside.

    ``sigma`` defaults to ``lambda_min(A'A)`` (``sigma_mode="gram"``), half
    the true modulus of strong convexity; ``sigma_mode="strict"`` uses
    ``2*lambda_min(A'A)``. An explicit ``sigma`` overrides both.
    """

    def __init__(self, A, b, lb=None, ub=None, *, sigma=None, sigma_mode="gram"):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = _vec(b, A.shape[0])
        self.A, self.b = A, b
        self.dim = A.shape[1]
        if lb is None and ub is None:
            self.lb = np.full(self.dim, -INF)
            self.ub = np.full(self.dim, INF)
            self.has_box = False
        else:
            self.lb, self.ub = _box(-INF if lb is None else lb, INF if ub is None else ub, self.dim)
            self.has_box = True
        self.gram = A.T @ A
        eig = np.linalg.eigvalsh(self.gram)
        self.lambda_min, self.lambda_max = float(eig[0]), float(eig[-1])
        if self.lambda_min <= 0.0:
            raise ValueError("A'A is singular; f would not be strongly convex")
        # f(x) = 0.5 x'Hx + c'x + const
        self.hessian = 2.0 * self.gram
        self.linear = -2.0 * (A.T @ b)
        self.const = float(b @ b)
        if sigma is not None:
            if sigma <= 0:
                raise ValueError(f"sigma must be positive, got {sigma}")
            self.sigma = float(sigma)
        elif sigma_mode == "gram":
            self.sigma = self.lambda_min
        elif sigma_mode == "strict":
            self.sigma = 2.0 * self.lambda_min
        else:
            raise ValueError(f"unknown sigma_mode {sigma_mode!r}")

    @classmethod
    def isotropic(cls, sigma: float, dim: int, center=None, lb=None, ub=None) -> "QuadraticBoxFn":
        """``(sigma/2)||x - center||^2`` with its exact modulus ``sigma``."""
        a = math.sqrt(sigma / 2.0)
        center = np.zeros(dim) if center is None else _vec(center, dim)
        return cls(a * np.eye(dim), a * center, lb, ub, sigma=sigma)

    def value(self, x) -> float:
        x = _vec(x, self.dim)
        if np.any(x < self.lb) or np.any(x > self.ub):
            return INF
        r = self.A @ x - self.b
        return float(r @ r)

    def grad_conjugate(self, v) -> np.ndarray:
        v = _vec(v, self.dim)
        if not np.all(np.isfinite(v)):
            raise ValueError("tilt vector must be finite")
        if self.dim <= ENUMERATION_MAX_DIM:
            x, _certified = _kernels.box_qp(self.hessian, self.linear - v, self.lb, self.ub)
            return x
        return self.grad_conjugate_iterative(v)

    def grad_conjugate_iterative(self, v, tol=1e-12, max_iter=1_000_000):
        """Projected-gradient tilted argmin, used above the enumeration limit.

        Raises :class:`ConvergenceError` if successive iterates still differ
        by more than ``tol`` after ``max_iter`` steps.
        """
        step = 1.0 / (2.0 * self.lambda_max)
        c = self.linear - v
        x = np.clip(np.zeros(self.dim), self.lb, self.ub)
        for _ in range(max_iter):
            x_new = np.clip(x - step * (self.hessian @ x + c), self.lb, self.ub)
            diff = float(np.max(np.abs(x_new - x)))
            x = x_new
            if diff <= tol:
                return x
        raise ConvergenceError("projected gradient hit its iteration cap", diff)


# ---------------------------------------------------------------------------
# proxable part


class ProxableFn(ABC):
    dim: int
    #: aggregate description used by the centralised solver
    l1_weight: float = 0.0
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    @abstractmethod
    def value(self, x) -> float:
        ...

    @abstractmethod
    def prox(self, alpha: float, v) -> np.ndarray:
        """Minimiser of ``g(x) + ||x - v||^2 / (2 alpha)``."""

    @abstractmethod
    def conjugate_value(self, mu) -> float:
        ...

    def prox_conjugate(self, alpha: float, v) -> np.ndarray:
        """``prox_{alpha g*}(v)`` through the extended Moreau decomposition."""
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        v = _vec(v, self.dim)
        return v - alpha * self.prox(1.0 / alpha, v / alpha)


def _check_alpha(alpha):
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")


class ZeroFn(ProxableFn):
    """``g = 0``; its conjugate is the indicator of ``{0}``."""

    def __init__(self, dim: int):
        self.dim = dim

    def value(self, x) -> float:
        return 0.0

    def prox(self, alpha, v):
        _check_alpha(alpha)
        return _vec(v, self.dim).copy()

    def conjugate_value(self, mu) -> float:
        mu = _vec(mu, self.dim)
        return 0.0 if np.max(np.abs(mu), initial=0.0) <= DOMAIN_ATOL else INF

    def __repr__(self):
        return f"ZeroFn(dim={self.dim})"


class ScaledL1Fn(ProxableFn):
    """``g(x) = weight * ||x||_1``."""

    def __init__(self, weight: float, dim: int):
        if weight < 0:
            raise ValueError(f"weight must be non-negative, got {weight}")
        self.weight = float(weight)
        self.l1_weight = self.weight
        self.dim = dim

    def value(self, x) -> float:
        return self.weight * float(np.sum(np.abs(_vec(x, self.dim))))

    def prox(self, alpha, v):
        _check_alpha(alpha)
        return soft_threshold(_vec(v, self.dim), alpha * self.weight)

    def conjugate_value(self, mu) -> float:
        mu = _vec(mu, self.dim)
        bound = self.weight * (1.0 + DOMAIN_RTOL) + DOMAIN_ATOL
        return 0.0 if np.max(np.abs(mu), initial=0.0) <= bound else INF

    def __repr__(self):
        return f"ScaledL1Fn(weight={self.weight}, dim={self.dim})"


class BoxIndicatorFn(ProxableFn):
    """Indicator of ``[lb, ub]``; prox is Euclidean projection."""

    def __init__(self, lb, ub, dim: int | None = None):
        dim = dim if dim is not None else np.size(lb)
        self.lb, self.ub = _box(lb, ub, dim)
        self.dim = dim

    def value(self, x) -> float:
        x = _vec(x, self.dim)
        return 0.0 if np.all(x >= self.lb) and np.all(x <= self.ub) else INF

    def prox(self, alpha, v):
        _check_alpha(alpha)
        return np.clip(_vec(v, self.dim), self.lb, self.ub)

    def conjugate_value(self, mu) -> float:
        # support function of the box
        mu = _vec(mu, self.dim)
        return float(np.sum(np.maximum(mu * self.lb, mu * self.ub)))

    def __repr__(self):
        return f"BoxIndicatorFn(lb={self.lb}, ub={self.ub})"


class L1PlusBoxFn(ProxableFn):
    """``weight * ||x||_1 + I_[lb,ub](x)``; prox is the saturated soft threshold."""

    def __init__(self, weight: float, lb, ub, dim: int | None = None):
        if weight < 0:
            raise ValueError(f"weight must be non-negative, got {weight}")
        dim = dim if dim is not None else np.size(lb)
        self.weight = float(weight)
        self.l1_weight = self.weight
        self.lb, self.ub = _box(lb, ub, dim)
        self.dim = dim

    def value(self, x) -> float:
        x = _vec(x, self.dim)
        if np.any(x < self.lb) or np.any(x > self.ub):
            return INF
        return self.weight * float(np.sum(np.abs(x)))

    def prox(self, alpha, v):
        _check_alpha(alpha)
        return np.clip(soft_threshold(_vec(v, self.dim), alpha * self.weight), self.lb, self.ub)

    def conjugate_value(self, mu) -> float:
        # sup over the box of a concave piecewise-linear function: attained at
        # a bound or at the projection of 0
        mu = _vec(mu, self.dim)
        total = 0.0
        for m, lo, hi in zip(mu, self.lb, self.ub):
            z = min(max(0.0, lo), hi)
            total += max(m * x - self.weight * abs(x) for x in (lo, hi, z))
        return total

    def __repr__(self):
        return f"L1PlusBoxFn(weight={self.weight}, lb={self.lb}, ub={self.ub})"


# ---------------------------------------------------------------------------
# functional aliases


def grad_conjugate(f: StronglyConvexFn, v) -> np.ndarray:
    return f.grad_conjugate(v)


def conjugate_value(f, v) -> float:
    return f.conjugate_value(v)


def prox(g: ProxableFn, alpha: float, v) -> np.ndarray:
    return g.prox(alpha, v)


def prox_conjugate(g: ProxableFn, alpha: float, v) -> np.ndarray:
    return g.prox_conjugate(alpha, v)
