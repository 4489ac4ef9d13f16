"""Pure-numpy implementations of the hot kernels.

Reference path for the numba backend; also the fallback when numba is
unavailable or disabled via STABLEGRAD_NO_NUMBA=1. Loops run over time
steps with all paths vectorized per step. Operation order matches the
numba kernels step for step so the two backends agree closely.
"""

from __future__ import annotations

import numpy as np

# drift codes understood by the fused SDE kernel
DRIFT_ZERO = 0
DRIFT_LINEAR = 1
DRIFT_ARCTAN = 2

# nonlinearity codes for the spectral solver
NL_ZERO = 0
NL_CONST = 1
NL_ARCTAN = 2

WEIGHT_FLOW = 0
WEIGHT_DRIFT_CORRECTED = 1


def cms_stable(u: np.ndarray, e: np.ndarray, beta: float) -> np.ndarray:
    """One-sided stable draws from uniforms u in (0, pi) and unit exponentials e.

    Kanter's representation: S = (a(U)/E)^((1-beta)/beta) with
    a(U) = sin((1-beta)U) * sin(beta U)^(beta/(1-beta)) / sin(U)^(1/(1-beta)),
    normalized so that E exp(-lam*S) = exp(-lam^beta).
    """
    c1 = 1.0 - beta
    a = np.sin(c1 * u) * np.sin(beta * u) ** (beta / c1) / np.sin(u) ** (1.0 / c1)
    return (a / e) ** (c1 / beta)


def _drift_eval(kind, A, scale, X):
    if kind == DRIFT_ZERO:
        return np.zeros_like(X)
    if kind == DRIFT_LINEAR:
        return X @ A.T
    return scale * np.arctan(X)


def _jac_apply(kind, A, scale, X, V):
    # Jacobian of the drift at X applied to V, batched over rows.
    if kind == DRIFT_ZERO:
        return np.zeros_like(V)
    if kind == DRIFT_LINEAR:
        return V @ A.T
    return scale / (1.0 + X * X) * V


def sde_flow_stats(drift_kind, A, scale, sigma, sigma_inv, x0, h, t, dW,
                   weight_mode):
    """Euler paths of the SDE plus the running weight integral, fused.

    dW holds driving-noise increments, shape (P, m, d). Returns the
    terminal states (P, d) and the left-endpoint weight sums (P,):
    flow mode accumulates <sigma_inv @ DX_i, dW_i> with DX the derivative
    flow, drift-corrected mode <sigma_inv @ (h + (T - t_i) Jb(X_i) h), dW_i>.
    """
    P, m, d = dW.shape
    X = np.tile(np.asarray(x0, dtype=np.float64), (P, 1))
    DX = np.tile(np.asarray(h, dtype=np.float64), (P, 1))
    H = np.tile(np.asarray(h, dtype=np.float64), (P, 1))
    w = np.zeros(P)
    T = t[m]
    sigT = sigma.T.copy()
    sinvT = sigma_inv.T.copy()
    for i in range(m):
        dWi = dW[:, i, :]
        if weight_mode == WEIGHT_FLOW:
            w += np.einsum("pd,pd->p", DX @ sinvT, dWi)
        else:
            v = h + (T - t[i]) * _jac_apply(drift_kind, A, scale, X, H)
            w += np.einsum("pd,pd->p", v @ sinvT, dWi)
        dt = t[i + 1] - t[i]
        b = _drift_eval(drift_kind, A, scale, X)
        if weight_mode == WEIGHT_FLOW:
            DX = DX + _jac_apply(drift_kind, A, scale, X, DX) * dt
        X = X + b * dt + dWi @ sigT
    return X, w


def galerkin_paths(damp, phidt, bdW, x0, f_kind, f_scale, f_const):
    """Exponential-Euler recursion in coefficient space, batched.

    damp[i] = exp(-lambda dt_i), phidt[i] = (1 - damp[i]) / lambda, both
    (m, K); bdW (P, m, K) holds beta-scaled noise increments. Each step:
    X <- damp_i * (X + bdW_i) + phidt_i * F(X), so the noise increment is
    carried undamped at the left endpoint and decays with the semigroup
    from there on.
    """
    P, m, K = bdW.shape
    X = np.tile(np.asarray(x0, dtype=np.float64), (P, 1))
    for i in range(m):
        if f_kind == NL_ZERO:
            fx = 0.0
        elif f_kind == NL_CONST:
            fx = f_const
        else:
            fx = f_scale * np.arctan(X)
        X = damp[i] * (X + bdW[:, i, :]) + phidt[i] * fx
    return X
