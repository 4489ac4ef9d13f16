"""Pathwise Euler solvers for the noise-driven SDE and its derivative flow.

The state equation is dX = b(t, X) dt + sigma dW_Q with a constant
invertible sigma and a driving noise W_Q supplied as sampled values
(Brownian motion read along a subordinator or along a deterministic
clock). Because sigma is constant the derivative flow solves a pathwise
linear ODE with no noise term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .timechange import InversePath, SmoothedPath


class DivergenceError(RuntimeError):
    """Raised when a solver state stops being finite; carries the grid time."""

    def __init__(self, message: str, t: Optional[float] = None):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class DriftModel:
    """Drift b(t, x) with its Jacobian and a certified sup bound on it.

    b maps (t, x) -> vector and must broadcast over leading axes of x;
    jacobian maps (t, x) -> matrix (stacked for batched x). kernel, when
    set, is a (kind, matrix, scale) triple understood by the jit path.
    """

    b: Callable[[float, np.ndarray], np.ndarray]
    jacobian: Callable[[float, np.ndarray], np.ndarray]
    grad_bound: float
    name: str = "custom"
    kernel: Optional[tuple] = None


@dataclass(frozen=True)
class DiffusionMatrix:
    sigma: np.ndarray
    sigma_inv: np.ndarray
    inv_norm: float

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        sigma_inv = np.atleast_2d(np.asarray(self.sigma_inv, dtype=np.float64))
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "sigma_inv", sigma_inv)
        d = sigma.shape[0]
        if sigma.shape != (d, d) or sigma_inv.shape != (d, d):
            raise ValueError("sigma and sigma_inv must be square and matching")
        if not np.allclose(sigma @ sigma_inv, np.eye(d), atol=1e-12, rtol=0):
            raise ValueError("sigma @ sigma_inv must equal the identity to 1e-12")
        computed = float(np.linalg.norm(sigma_inv, 2))
        if abs(computed - self.inv_norm) > 1e-10 * max(1.0, computed):
            raise ValueError("inv_norm does not match the operator norm")

    @classmethod
    def from_matrix(cls, sigma) -> "DiffusionMatrix":
        sigma = np.atleast_2d(np.asarray(sigma, dtype=np.float64))
        inv = np.linalg.inv(sigma)
        return cls(sigma, inv, float(np.linalg.norm(inv, 2)))

    @classmethod
    def identity(cls, d: int) -> "DiffusionMatrix":
        return cls(np.eye(d), np.eye(d), 1.0)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True)
class FlowState:
    """Solution path X and, once filled, the derivative-flow path DX."""

    grid: np.ndarray
    X: np.ndarray
    DX: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None

    def to_csv(self, file) -> None:
        d = self.X.shape[1]
        own = isinstance(file, (str, bytes))
        fh = open(file, "w", encoding="utf-8") if own else file
        try:
            cols = ["t"] + [f"X_{k + 1}" for k in range(d)]
            if self.DX is not None:
                cols += [f"DX_{k + 1}" for k in range(d)]
            fh.write(",".join(cols) + "\n")
            for i, t in enumerate(self.grid):
                row = [f"{t:.17g}"] + [f"{v:.17g}" for v in self.X[i]]
                if self.DX is not None:
                    row += [f"{v:.17g}" for v in self.DX[i]]
                fh.write(",".join(row) + "\n")
        finally:
            if own:
                fh.close()


def _check_state(x: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"solver state not finite at t={t:.6g}", t=t)


def solve_sde_euler(drift: DriftModel, diff: DiffusionMatrix, x0, grid,
                    w_at_s) -> FlowState:
    """Explicit Euler: X_{i+1} = X_i + b(t_i, X_i) dt + sigma dW_i.

    w_at_s holds the driving noise values on the grid (shape (m+1, d));
    with additive constant sigma there is no Milstein correction and the
    noise enters exactly.
    """
    grid = np.asarray(grid, dtype=np.float64)
    w = np.asarray(w_at_s, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    d = diff.dim
    if w.shape != (grid.size, d):
        raise ValueError("noise values must have shape (len(grid), d)")
    X = np.empty((grid.size, d))
    X[0] = x0
    sigT = diff.sigma.T
    for i in range(grid.size - 1):
        dt = grid[i + 1] - grid[i]
        X[i + 1] = X[i] + drift.b(grid[i], X[i]) * dt + (w[i + 1] - w[i]) @ sigT
        _check_state(X[i + 1], float(grid[i + 1]))
    return FlowState(grid=grid, X=X)


def solve_variational(drift: DriftModel, flow: FlowState, h, grid) -> FlowState:
    """Derivative flow along a solved path: DX' = Jb(t, X_t) DX, DX_0 = h.

    Pathwise linear ODE (constant sigma kills the noise term); solved
    with the same explicit Euler step as the state equation.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.shape != flow.grid.shape or not np.array_equal(grid, flow.grid):
        raise ValueError("grid does not match the solved path's grid")
    h = np.asarray(h, dtype=np.float64)
    DX = np.empty_like(flow.X)
    DX[0] = h
    for i in range(grid.size - 1):
        dt = grid[i + 1] - grid[i]
        J = drift.jacobian(grid[i], flow.X[i])
        DX[i + 1] = DX[i] + J @ DX[i] * dt
    return FlowState(grid=grid, X=flow.X, DX=DX, h=h)


def solve_time_changed(drift: DriftModel, diff: DiffusionMatrix, x0,
                       smoothed: SmoothedPath, gamma: InversePath,
                       w, s_grid) -> np.ndarray:
    """Euler solution of the clock-changed SDE on the smoothed time scale.

    On [smoothed(0), smoothed(T)] the reformulated equation reads
    dY = b(gamma(s), Y) gamma'(s) ds + sigma dW_s with W a standard
    Brownian motion in s; gamma' is evaluated in closed form.
    """
    s_grid = np.asarray(s_grid, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    d = diff.dim
    if w.shape != (s_grid.size, d):
        raise ValueError("noise values must have shape (len(s_grid), d)")
    lo = smoothed.value(0.0)
    hi = smoothed.value(smoothed.base.horizon)
    if s_grid[0] < lo - 1e-10 or s_grid[-1] > hi + 1e-10:
        raise ValueError("s_grid must lie within the smoothed clock's range")
    t_of_s = gamma.value(s_grid)
    rate = 1.0 / smoothed.derivative(t_of_s)
    Y = np.empty((s_grid.size, d))
    Y[0] = np.asarray(x0, dtype=np.float64)
    sigT = diff.sigma.T
    for i in range(s_grid.size - 1):
        ds = s_grid[i + 1] - s_grid[i]
        Y[i + 1] = Y[i] + drift.b(t_of_s[i], Y[i]) * rate[i] * ds \
            + (w[i + 1] - w[i]) @ sigT
        _check_state(Y[i + 1], float(s_grid[i + 1]))
    return Y
