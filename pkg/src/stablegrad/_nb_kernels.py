"""Numba-jitted versions of the hot kernels.

Same signatures and step-for-step arithmetic as the numpy reference in
_np_kernels.py; all loops release the GIL so chunk workers can overlap.
The SDE kernel is specialized per drift kind and weight mode: a runtime
branch inside the innermost loop keeps LLVM from holding the state in
registers, so the dispatch happens once per call instead.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._np_kernels import (
    DRIFT_ARCTAN,
    DRIFT_LINEAR,
    NL_CONST,
    NL_ZERO,
    WEIGHT_FLOW,
)


@njit(cache=True, nogil=True)
def cms_stable(u, e, beta):
    n = u.shape[0]
    out = np.empty(n)
    c1 = 1.0 - beta
    ex = beta / c1
    exs = 1.0 / c1
    pw = c1 / beta
    for i in range(n):
        ui = u[i]
        a = np.sin(c1 * ui) * np.sin(beta * ui) ** ex / np.sin(ui) ** exs
        out[i] = (a / e[i]) ** pw
    return out


@njit(cache=True, nogil=True)
def _sde_linear_flow(A, sigma, sigma_inv, x0, h, t, dW):
    P, m, d = dW.shape
    XT = np.empty((P, d))
    w = np.zeros(P)
    X = np.empty(d)
    DX = np.empty(d)
    b = np.empty(d)
    jv = np.empty(d)
    for p in range(P):
        for k in range(d):
            X[k] = x0[k]
            DX[k] = h[k]
        acc = 0.0
        for i in range(m):
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += sigma_inv[r, c] * DX[c]
                acc += s * dW[p, i, r]
            dt = t[i + 1] - t[i]
            for r in range(d):
                s = 0.0
                s2 = 0.0
                for c in range(d):
                    s += A[r, c] * X[c]
                    s2 += A[r, c] * DX[c]
                b[r] = s
                jv[r] = s2
            for k in range(d):
                DX[k] = DX[k] + jv[k] * dt
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += sigma[r, c] * dW[p, i, c]
                X[r] = X[r] + b[r] * dt + s
        for k in range(d):
            XT[p, k] = X[k]
        w[p] = acc
    return XT, w


@njit(cache=True, nogil=True)
def _sde_linear_corrected(A, sigma, sigma_inv, x0, h, t, dW):
    P, m, d = dW.shape
    XT = np.empty((P, d))
    w = np.zeros(P)
    T = t[m]
    X = np.empty(d)
    b = np.empty(d)
    jh = np.empty(d)
    v = np.empty(d)
    for r in range(d):
        s = 0.0
        for c in range(d):
            s += A[r, c] * h[c]
        jh[r] = s
    for p in range(P):
        for k in range(d):
            X[k] = x0[k]
        acc = 0.0
        for i in range(m):
            tau = T - t[i]
            for k in range(d):
                v[k] = h[k] + tau * jh[k]
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += sigma_inv[r, c] * v[c]
                acc += s * dW[p, i, r]
            dt = t[i + 1] - t[i]
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += A[r, c] * X[c]
                b[r] = s
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += sigma[r, c] * dW[p, i, c]
                X[r] = X[r] + b[r] * dt + s
        for k in range(d):
            XT[p, k] = X[k]
        w[p] = acc
    return XT, w


@njit(cache=True, nogil=True)
def _sde_arctan_flow(scale, sigma, sigma_inv, x0, h, t, dW):
    P, m, d = dW.shape
    XT = np.empty((P, d))
    w = np.zeros(P)
    X = np.empty(d)
    DX = np.empty(d)
    b = np.empty(d)
    jv = np.empty(d)
    for p in range(P):
        for k in range(d):
            X[k] = x0[k]
            DX[k] = h[k]
        acc = 0.0
        for i in range(m):
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += sigma_inv[r, c] * DX[c]
                acc += s * dW[p, i, r]
            dt = t[i + 1] - t[i]
            for k in range(d):
                b[k] = scale * np.arctan(X[k])
                jv[k] = scale / (1.0 + X[k] * X[k]) * DX[k]
            for k in range(d):
                DX[k] = DX[k] + jv[k] * dt
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += sigma[r, c] * dW[p, i, c]
                X[r] = X[r] + b[r] * dt + s
        for k in range(d):
            XT[p, k] = X[k]
        w[p] = acc
    return XT, w


@njit(cache=True, nogil=True)
def _sde_arctan_corrected(scale, sigma, sigma_inv, x0, h, t, dW):
    P, m, d = dW.shape
    XT = np.empty((P, d))
    w = np.zeros(P)
    T = t[m]
    X = np.empty(d)
    b = np.empty(d)
    v = np.empty(d)
    for p in range(P):
        for k in range(d):
            X[k] = x0[k]
        acc = 0.0
        for i in range(m):
            tau = T - t[i]
            for k in range(d):
                v[k] = h[k] + tau * (scale / (1.0 + X[k] * X[k]) * h[k])
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += sigma_inv[r, c] * v[c]
                acc += s * dW[p, i, r]
            dt = t[i + 1] - t[i]
            for k in range(d):
                b[k] = scale * np.arctan(X[k])
            for r in range(d):
                s = 0.0
                for c in range(d):
                    s += sigma[r, c] * dW[p, i, c]
                X[r] = X[r] + b[r] * dt + s
        for k in range(d):
            XT[p, k] = X[k]
        w[p] = acc
    return XT, w


def sde_flow_stats(drift_kind, A, scale, sigma, sigma_inv, x0, h, t, dW,
                   weight_mode):
    if drift_kind == DRIFT_ARCTAN:
        if weight_mode == WEIGHT_FLOW:
            return _sde_arctan_flow(scale, sigma, sigma_inv, x0, h, t, dW)
        return _sde_arctan_corrected(scale, sigma, sigma_inv, x0, h, t, dW)
    # zero drift is the linear kernel with a zero matrix
    A_eff = A if drift_kind == DRIFT_LINEAR else np.zeros_like(A)
    if weight_mode == WEIGHT_FLOW:
        return _sde_linear_flow(A_eff, sigma, sigma_inv, x0, h, t, dW)
    return _sde_linear_corrected(A_eff, sigma, sigma_inv, x0, h, t, dW)


@njit(cache=True, nogil=True)
def galerkin_paths(damp, phidt, bdW, x0, f_kind, f_scale, f_const):
    P, m, K = bdW.shape
    out = np.empty((P, K))
    X = np.empty(K)
    for p in range(P):
        for k in range(K):
            X[k] = x0[k]
        for i in range(m):
            for k in range(K):
                if f_kind == NL_ZERO:
                    fx = 0.0
                elif f_kind == NL_CONST:
                    fx = f_const[k]
                else:
                    fx = f_scale * np.arctan(X[k])
                X[k] = damp[i, k] * (X[k] + bdW[p, i, k]) + phidt[i, k] * fx
        for k in range(K):
            out[p, k] = X[k]
    return out
