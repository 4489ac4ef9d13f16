"""Monte Carlo gradient estimators for semigroups of noise-driven SDEs.

The directional derivative of x -> E f(X_t(x)) is estimated without
differentiating f: each path weights f(X_t) by a stochastic-integral
functional of the derivative flow. For the subordinated driver the
weight is (1/S_t) * int_0^t <sigma^{-1} DX_s, dW_{S_s}>; for a standard
Brownian driver the normalization is 1/t and there is a second,
drift-corrected weight using h + (t-s) Jb(X_s) h in place of DX_s.

Sampling order mirrors the product structure of the noise: each path
first draws its subordinator increments, then the Brownian values along
that clock. Paths are processed in fixed-size chunks whose partial
results are merged in index order, so results depend on (seed, n_paths)
but never on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .sde import DiffusionMatrix, DriftModel, FlowState
from .stable import (
    StableParams,
    SubordinatorPath,
    ZERO_INCREMENT,
    _E_FLOOR,
    _U_FLOOR,
)
from .streams import RandomStream
from .timechange import ito_integral_time_changed

CHUNK = 1024

TAG_STABLE = "bel-stable"
TAG_BROWNIAN = "bel-brownian"
TAG_BISMUT = "bismut-brownian"
TAG_FD = "fd"


@dataclass(frozen=True)
class TestFunction:
    """Observable f with optional gradient and certified bounds."""

    f: Callable[[np.ndarray], np.ndarray]
    grad_f: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sup_bound: Optional[float] = None
    lip_bound: Optional[float] = None
    name: str = "custom"


@dataclass(frozen=True)
class GradientEstimate:
    value: float
    std_err: float
    n: int
    estimator_tag: str
    rejected: int = 0
    tail_share: float = 0.0
    flagged: bool = False


@dataclass(frozen=True)
class EstimatorConfig:
    drift: DriftModel
    diff: DiffusionMatrix
    x0: np.ndarray
    h: np.ndarray
    t: float
    params: Optional[StableParams] = None
    grid_size: int = 2048
    n_paths: int = 10 ** 4
    seed: int = 0
    driver: str = "stable"

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=np.float64))
        object.__setattr__(self, "h", np.asarray(self.h, dtype=np.float64))
        if self.t <= 0:
            raise ValueError("horizon t must be positive")
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if self.driver not in ("stable", "brownian"):
            raise ValueError("driver must be 'stable' or 'brownian'")
        if self.driver == "stable" and self.params is None:
            raise ValueError("stable driver requires StableParams")
        if self.x0.shape != self.h.shape or self.x0.ndim != 1:
            raise ValueError("x0 and h must be 1-d vectors of equal length")
        if self.diff.dim != self.x0.size:
            raise ValueError("diffusion matrix dimension does not match x0")

    @property
    def dim(self) -> int:
        return self.x0.size

    @property
    def t_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t, self.grid_size + 1)

    def with_horizon(self, t: float) -> "EstimatorConfig":
        return EstimatorConfig(self.drift, self.diff, self.x0, self.h, t,
                               self.params, self.grid_size, self.n_paths,
                               self.seed, self.driver)


def pathwise_weight(flow: FlowState, diff: DiffusionMatrix,
                    S_path: SubordinatorPath, w_at_s) -> float:
    """Weight (1/S_t) * sum_i <sigma^{-1} DX_i, W_{S_{i+1}} - W_{S_i}>.

    Shares the left-endpoint integral sum with the time-change module, so
    integrating against W along the sampled clock and substituting the
    clock afterwards is the same code path by construction.
    """
    if flow.DX is None:
        raise ValueError("flow state has no derivative-flow path")
    ST = S_path.terminal
    if ST <= 1e-300:
        raise ValueError(
            f"degenerate subordinator path: S_t = {ST} at t = {S_path.grid[-1]}")
    xi = flow.DX @ diff.sigma_inv.T
    return ito_integral_time_changed(xi, S_path.values, w_at_s) / ST


def _chunk_ranges(n: int, chunk: int = CHUNK):
    for start in range(0, n, chunk):
        yield start, min(start + chunk, n)


def _draw_noise(cfg: EstimatorConfig, start: int, stop: int):
    """Per-path noise for paths [start, stop): clock increments and dW.

    Path p owns the stream (seed, p); it draws uniforms and exponentials
    for the clock first, then the Gaussian block, so common-random-number
    reuse is exact across estimators sharing a seed.
    """
    m = cfg.grid_size
    d = cfg.dim
    P = stop - start
    dt = cfg.t / m
    z = np.empty((P, m * d))
    if cfg.driver == "stable":
        beta = cfg.params.beta
        scale = 0.0 if dt < ZERO_INCREMENT else dt ** (1.0 / beta)
        u = np.empty((P, m))
        e = np.empty((P, m))
        for j in range(P):
            rng = RandomStream(cfg.seed, start + j).generator()
            rng.random(out=u[j])
            rng.standard_exponential(out=e[j])
            rng.standard_normal(out=z[j])
        u *= np.pi
        np.maximum(u, _U_FLOOR, out=u)
        np.maximum(e, _E_FLOOR, out=e)
        dS = scale * kernels.cms_stable(u.ravel(), e.ravel(), beta).reshape(P, m)
    else:
        dS = np.full((P, m), dt)
        for j in range(P):
            rng = RandomStream(cfg.seed, start + j).generator()
            rng.standard_normal(out=z[j])
    dW = np.sqrt(dS)[:, :, None] * z.reshape(P, m, d)
    return dS, dW


def _flow_stats_callable(drift: DriftModel, diff: DiffusionMatrix, x0, h,
                         t, dW, weight_mode):
    """Generic-drift version of the fused kernel (vectorized over paths)."""
    P, m, d = dW.shape
    X = np.tile(x0, (P, 1))
    DX = np.tile(h, (P, 1))
    w = np.zeros(P)
    T = t[-1]
    sigT = diff.sigma.T
    sinvT = diff.sigma_inv.T
    for i in range(m):
        dWi = dW[:, i, :]
        if weight_mode == kernels.WEIGHT_FLOW:
            w += np.einsum("pd,pd->p", DX @ sinvT, dWi)
        else:
            J = drift.jacobian(t[i], X)
            v = h + (T - t[i]) * np.einsum("...de,e->...d", J, h)
            w += np.einsum("pd,pd->p", v @ sinvT, dWi)
        dt = t[i + 1] - t[i]
        b = drift.b(t[i], X)
        if weight_mode == kernels.WEIGHT_FLOW:
            J = drift.jacobian(t[i], X)
            DX = DX + np.einsum("...de,...e->...d", J, DX) * dt
        X = X + b * dt + dWi @ sigT
    return X, w


def _flow_stats(cfg: EstimatorConfig, dW, weight_mode, x0=None):
    x0 = cfg.x0 if x0 is None else np.asarray(x0, dtype=np.float64)
    t_grid = cfg.t_grid
    if cfg.drift.kernel is not None:
        kind, A, scale = cfg.drift.kernel
        return kernels.sde_flow_stats(
            int(kind), np.ascontiguousarray(A, dtype=np.float64), float(scale),
            np.ascontiguousarray(cfg.diff.sigma),
            np.ascontiguousarray(cfg.diff.sigma_inv),
            np.ascontiguousarray(x0), np.ascontiguousarray(cfg.h),
            t_grid, np.ascontiguousarray(dW), int(weight_mode))
    return _flow_stats_callable(cfg.drift, cfg.diff, x0, cfg.h, t_grid, dW,
                                weight_mode)


def _gather_chunks(n: int, workers: int, job):
    """Run `job(start, stop)` over fixed chunks, merged in index order."""
    ranges = list(_chunk_ranges(n))
    if workers <= 1:
        parts = [job(a, b) for a, b in ranges]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: job(*ab), ranges))
    return parts


def _top_share(values: np.ndarray) -> float:
    """Share of sum |values| carried by the largest 0.1% of them."""
    if values.size == 0:
        return 0.0
    absv = np.abs(values)
    total = float(np.sum(absv))
    if total == 0.0:
        return 0.0
    k = max(1, int(0.001 * values.size))
    return float(np.sum(np.sort(absv)[-k:])) / total


def _summarize(g: np.ndarray, tag: str, rejected: int,
               weights: Optional[np.ndarray] = None) -> GradientEstimate:
    n = g.size
    if n == 0:
        raise ValueError("all paths were rejected")
    value = float(np.mean(g))
    std_err = float(np.std(g, ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    # a heavy-tailed weight sample makes the reported SE unreliable
    share = _top_share(g if weights is None else weights)
    return GradientEstimate(value=value, std_err=std_err, n=n,
                            estimator_tag=tag, rejected=rejected,
                            tail_share=share, flagged=share > 0.2)


def _estimate(cfg: EstimatorConfig, f: TestFunction, weight_mode, tag,
              workers: int) -> GradientEstimate:
    def job(start, stop):
        dS, dW = _draw_noise(cfg, start, stop)
        XT, wint = _flow_stats(cfg, dW, weight_mode)
        ST = cfg.t * np.ones(stop - start) if cfg.driver == "brownian" \
            else np.sum(dS, axis=1)
        ok = ST > 1e-300
        w = wint[ok] / ST[ok]
        return f.f(XT[ok]) * w, w, int(np.sum(~ok))

    parts = _gather_chunks(cfg.n_paths, workers, job)
    g = np.concatenate([p[0] for p in parts])
    weights = np.concatenate([p[1] for p in parts])
    rejected = sum(p[2] for p in parts)
    return _summarize(g, tag, rejected, weights=weights)


def estimate_gradient_bel(cfg: EstimatorConfig, f: TestFunction,
                          workers: int = 1) -> GradientEstimate:
    """Subordinated-driver estimator of the h-directional derivative."""
    if cfg.driver != "stable":
        raise ValueError("estimate_gradient_bel requires the stable driver")
    return _estimate(cfg, f, kernels.WEIGHT_FLOW, TAG_STABLE, workers)


def estimate_gradient_brownian(cfg: EstimatorConfig, f: TestFunction,
                               workers: int = 1) -> GradientEstimate:
    """Brownian-driver baseline with the derivative-flow weight and 1/t."""
    if cfg.driver != "brownian":
        raise ValueError("Brownian estimator requires driver='brownian'")
    return _estimate(cfg, f, kernels.WEIGHT_FLOW, TAG_BROWNIAN, workers)


def estimate_gradient_bismut(cfg: EstimatorConfig, f: TestFunction,
                             workers: int = 1) -> GradientEstimate:
    """Brownian-driver baseline weighting by h + (t-s) Jb(X_s) h."""
    if cfg.driver != "brownian":
        raise ValueError("Bismut-form estimator requires driver='brownian'")
    return _estimate(cfg, f, kernels.WEIGHT_DRIFT_CORRECTED, TAG_BISMUT, workers)


def fd_oracle(cfg: EstimatorConfig, f: TestFunction, fd_step: float = 1e-3,
              workers: int = 1) -> GradientEstimate:
    """Central difference along h with common random numbers.

    Both shifted systems consume identical noise paths, so constant f
    gives exactly zero and the variance of the difference stays small.
    The step is relative: the applied shifts are x0 +- fd_step * h.
    """
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")

    def job(start, stop):
        _, dW = _draw_noise(cfg, start, stop)
        Xp, _ = _flow_stats(cfg, dW, kernels.WEIGHT_FLOW,
                            x0=cfg.x0 + fd_step * cfg.h)
        Xm, _ = _flow_stats(cfg, dW, kernels.WEIGHT_FLOW,
                            x0=cfg.x0 - fd_step * cfg.h)
        g = (f.f(Xp) - f.f(Xm)) / (2.0 * fd_step)
        return g, 0

    parts = _gather_chunks(cfg.n_paths, workers, job)
    g = np.concatenate([p[0] for p in parts])
    return _summarize(g, TAG_FD, 0)


def _weights_only(cfg: EstimatorConfig, workers: int) -> np.ndarray:
    def job(start, stop):
        dS, dW = _draw_noise(cfg, start, stop)
        _, wint = _flow_stats(cfg, dW, kernels.WEIGHT_FLOW)
        ST = cfg.t * np.ones(stop - start) if cfg.driver == "brownian" \
            else np.sum(dS, axis=1)
        ok = ST > 1e-300
        return (wint[ok] / ST[ok], int(np.sum(~ok)))

    parts = _gather_chunks(cfg.n_paths, workers, job)
    return np.concatenate([p[0] for p in parts])


def weight_moment_scaling(cfg: EstimatorConfig, q: float, t_grid,
                          workers: int = 1) -> dict:
    """Fit the log-log slope of t -> (E |weight|^q)^(1/q).

    For zero drift and identity sigma the q-th weight norm scales like
    t^(-1/alpha) regardless of q, which pins the small-time blowup rate
    of the gradient estimate.
    """
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.size < 3:
        raise ValueError("t_grid must contain at least 3 horizons")
    if q < 1:
        raise ValueError("q must be >= 1")
    rows = []
    for t in t_grid:
        w = _weights_only(cfg.with_horizon(float(t)), workers)
        aq = np.abs(w) ** q
        mean_q = float(np.mean(aq))
        se_q = float(np.std(aq, ddof=1) / np.sqrt(aq.size))
        mq = mean_q ** (1.0 / q)
        # delta method for the q-th root
        se_mq = se_q / q * mean_q ** (1.0 / q - 1.0)
        rows.append((float(t), mq, se_mq))
    logs = np.log([r[1] for r in rows])
    coef, cov = np.polyfit(np.log(t_grid), logs, 1, cov=True)
    return {
        "slope": float(coef[0]),
        "slope_se": float(np.sqrt(cov[0, 0])),
        "intercept": float(coef[1]),
        "rows": rows,
        "q": q,
    }


def _sup_values(cfg: EstimatorConfig, workers: int) -> np.ndarray:
    def job(start, stop):
        _, dW = _draw_noise(cfg, start, stop)
        proj = dW @ cfg.h
        cums = np.cumsum(proj, axis=1)
        return (np.max(np.abs(cums), axis=1), 0)

    parts = _gather_chunks(cfg.n_paths, workers, job)
    return np.concatenate([p[0] for p in parts])


def tail_exponent_check(cfg: EstimatorConfig, lambdas=None, n_lambda: int = 20,
                        q_lo: float = 0.90, q_hi: float = 0.999,
                        workers: int = 1) -> dict:
    """Log-log tail fit for sup_t |int_0^t <h, dW_S>| (constant integrand h).

    The running supremum of the projected driver has exact tail index
    alpha, so the fitted exponent should sit near -alpha. Levels default
    to a geometric grid between the empirical q_lo and q_hi quantiles.
    """
    sups = _sup_values(cfg, workers)
    if lambdas is None:
        lo = float(np.quantile(sups, q_lo))
        hi = float(np.quantile(sups, q_hi))
        lambdas = np.geomspace(lo, hi, n_lambda)
    else:
        lambdas = np.asarray(lambdas, dtype=np.float64)
    survival = np.array([float(np.mean(sups >= lam)) for lam in lambdas])
    exceed = int(np.sum(sups >= lambdas[-1]))
    if exceed < 100:
        raise ValueError(
            f"only {exceed} exceedances at the largest level; widen the "
            "range or increase n_paths")
    coef = np.polyfit(np.log(lambdas), np.log(survival), 1)
    return {
        "exponent": float(coef[0]),
        "lambdas": lambdas,
        "survival": survival,
        "n": int(sups.size),
        "exceedances_at_top": exceed,
    }
