"""Registered drifts, test functions and validation probes.

The drift library spans bounded-gradient cases (zero, linear, rotating,
Ornstein-Uhlenbeck pull, bounded arctan); the test-function library spans
constants, linear forms, smooth bounded functions and one discontinuous
step (the step carries no gradient and is for informational runs only).
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .bel import TestFunction
from .sde import DriftModel


def _broadcast_matrix(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(A, x.shape[:-1] + A.shape).copy()


def drift_zero(d: int) -> DriftModel:
    A = np.zeros((d, d))
    return DriftModel(
        b=lambda t, x: np.zeros_like(x),
        jacobian=lambda t, x, A=A: _broadcast_matrix(A, np.asarray(x)),
        grad_bound=0.0,
        name="zero",
        kernel=(kernels.DRIFT_ZERO, A, 0.0),
    )


def drift_linear(A, name: str = "linear") -> DriftModel:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    return DriftModel(
        b=lambda t, x, A=A: np.asarray(x) @ A.T,
        jacobian=lambda t, x, A=A: _broadcast_matrix(A, np.asarray(x)),
        grad_bound=float(np.linalg.norm(A, 2)),
        name=name,
        kernel=(kernels.DRIFT_LINEAR, A, 0.0),
    )


def drift_ou(kappa: float, d: int) -> DriftModel:
    return drift_linear(-kappa * np.eye(d), name="ou")


def drift_rotating() -> DriftModel:
    return drift_linear(np.array([[0.0, 1.0], [-1.0, 0.0]]), name="rotating")


def drift_arctan(scale: float, d: int) -> DriftModel:
    def b(t, x, s=scale):
        return s * np.arctan(np.asarray(x))

    def jac(t, x, s=scale):
        x = np.asarray(x)
        diag = s / (1.0 + x * x)
        out = np.zeros(x.shape + (x.shape[-1],))
        idx = np.arange(x.shape[-1])
        out[..., idx, idx] = diag
        return out

    return DriftModel(b=b, jacobian=jac, grad_bound=abs(scale),
                      name="arctan", kernel=(kernels.DRIFT_ARCTAN,
                                             np.zeros((d, d)), float(scale)))


def f_constant(c: float) -> TestFunction:
    return TestFunction(
        f=lambda x, c=c: np.full(np.asarray(x).shape[:-1], float(c)),
        grad_f=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
        sup_bound=abs(c),
        lip_bound=0.0,
        name="constant",
    )


def f_linear(a) -> TestFunction:
    a = np.asarray(a, dtype=np.float64)
    return TestFunction(
        f=lambda x, a=a: np.asarray(x) @ a,
        grad_f=lambda x, a=a: np.broadcast_to(a, np.asarray(x).shape).copy(),
        sup_bound=None,
        lip_bound=float(np.linalg.norm(a)),
        name="linear",
    )


def f_arctan(a) -> TestFunction:
    """Bounded smooth form arctan(<a, x>)."""
    a = np.asarray(a, dtype=np.float64)

    def f(x, a=a):
        return np.arctan(np.asarray(x) @ a)

    def grad(x, a=a):
        u = np.asarray(x) @ a
        return a / (1.0 + u * u)[..., None]

    return TestFunction(f=f, grad_f=grad, sup_bound=np.pi / 2,
                        lip_bound=float(np.linalg.norm(a)), name="arctan")


def f_gaussian_bump(center, width: float) -> TestFunction:
    center = np.asarray(center, dtype=np.float64)
    w2 = float(width) ** 2

    def f(x, c=center):
        r2 = np.sum((np.asarray(x) - c) ** 2, axis=-1)
        return np.exp(-r2 / (2.0 * w2))

    def grad(x, c=center):
        x = np.asarray(x)
        r2 = np.sum((x - c) ** 2, axis=-1)
        return -(x - c) / w2 * np.exp(-r2 / (2.0 * w2))[..., None]

    # |grad| peaks at radius = width
    return TestFunction(f=f, grad_f=grad, sup_bound=1.0,
                        lip_bound=float(np.exp(-0.5) / width),
                        name="gaussian-bump")


def f_step(a, threshold: float) -> TestFunction:
    """Indicator of a half-space; bounded measurable, no gradient."""
    a = np.asarray(a, dtype=np.float64)
    return TestFunction(
        f=lambda x, a=a, th=threshold: (np.asarray(x) @ a >= th).astype(float),
        grad_f=None,
        sup_bound=1.0,
        lip_bound=None,
        name="step",
    )


def finite_difference_jacobian_gap(drift: DriftModel, d: int, rng,
                                   n_probes: int = 20) -> float:
    """Worst |(b(t,x+dh)-b(t,x))/d - Jb(t,x) h| / |h| over random probes."""
    worst = 0.0
    for _ in range(n_probes):
        t = float(rng.uniform(0.0, 2.0))
        x = rng.standard_normal(d) * 2.0
        h = rng.standard_normal(d)
        delta = 1e-6 * (1.0 + float(np.linalg.norm(x)))
        fd = (drift.b(t, x + delta * h) - drift.b(t, x)) / delta
        gap = np.linalg.norm(fd - drift.jacobian(t, x) @ h)
        worst = max(worst, float(gap / np.linalg.norm(h)))
    return worst


def finite_difference_gradient_gap(fn: TestFunction, d: int, rng,
                                   n_probes: int = 20) -> float:
    """Worst relative finite-difference error of grad_f over random probes."""
    if fn.grad_f is None:
        raise ValueError("test function has no gradient")
    worst = 0.0
    for _ in range(n_probes):
        x = rng.standard_normal(d) * 2.0
        h = rng.standard_normal(d)
        h /= np.linalg.norm(h)
        delta = 1e-5 * (1.0 + float(np.linalg.norm(x)))
        fd = (fn.f(x + delta * h) - fn.f(x - delta * h)) / (2.0 * delta)
        ex = float(fn.grad_f(x) @ h)
        scale = max(1.0, abs(ex))
        worst = max(worst, abs(fd - ex) / scale)
    return worst
