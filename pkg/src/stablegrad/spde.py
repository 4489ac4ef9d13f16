"""Spectral Galerkin simulation of semilinear heat-type SPDEs.

Everything runs on the first n spectral coefficients of a diagonal
negative operator; rendering a solution on a space grid is a view. The
driving noise is a subordinated cylindrical Brownian motion: one
subordinator clock per sample, independent Brownian coordinates along
it. Time stepping is exponential Euler (the plain Euler step is unstable
once lambda_k * dt > 2): the nonlinearity enters through
(1 - exp(-lambda dt)) / lambda and the noise increment is carried from
its left endpoint, decaying with the semigroup afterwards, which makes
the stochastic convolution a one-line recursion.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from . import kernels
from .sde import DivergenceError
from .stable import StableParams, ZERO_INCREMENT, _E_FLOOR, _U_FLOOR
from .streams import MAXK, RandomStream, sample_stream

CHUNK = 512


@dataclass(frozen=True)
class SpectralModel:
    """Truncated diagonal model: eigenvalues, noise intensities, clock index."""

    n: int
    lambdas: np.ndarray
    betas: np.ndarray
    delta: float
    params: StableParams

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        bet = np.asarray(self.betas, dtype=np.float64)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "betas", bet)
        if lam.shape != (self.n,) or bet.shape != (self.n,):
            raise ValueError("lambdas and betas must have length n")
        if np.any(lam <= 0) or np.any(np.diff(lam) < 0):
            raise ValueError("lambdas must be positive and nondecreasing")
        # delta = 0 admits degenerate noise-free coordinates; the gap
        # estimate is only meaningful for delta > 0
        if self.delta < 0 or np.any(bet < self.delta):
            raise ValueError("betas must satisfy beta_k >= delta >= 0")

    @property
    def series_mass(self) -> float:
        """sum beta_k^2 / lambda_k over the truncation (finite by construction)."""
        return float(np.sum(self.betas ** 2 / self.lambdas))


@dataclass(frozen=True)
class NonlinearityF:
    """Lipschitz map on coefficient space, vectorized over leading axes."""

    F: Callable[[np.ndarray], np.ndarray]
    lip_bound: float
    sup_bound: Optional[float] = None
    name: str = "custom"
    kernel: Optional[tuple] = None  # (kind, scale, const vector or None)


@dataclass(frozen=True)
class GalerkinState:
    grid: np.ndarray
    coeffs: np.ndarray


def heat_eigenpairs(n: int):
    """Dirichlet Laplacian on [0, 1]: lambda_k = pi^2 k^2, e_k = sqrt2 sin(pi k .).

    Returns (lambdas, evaluate) where evaluate(zeta) -> matrix of e_k
    values, shape (len(zeta), n), used only to render coefficient-space
    states on a space grid.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(1, n + 1)
    lambdas = np.pi ** 2 * k ** 2

    def evaluate(zeta):
        zeta = np.atleast_1d(np.asarray(zeta, dtype=np.float64))
        return np.sqrt(2.0) * np.sin(np.pi * np.outer(zeta, k))

    return lambdas.astype(np.float64), evaluate


def make_heat_model(n: int, params: StableParams, beta: float = 1.0) -> SpectralModel:
    lambdas, _ = heat_eigenpairs(n)
    betas = np.full(n, float(beta))
    return SpectralModel(n=n, lambdas=lambdas, betas=betas,
                         delta=float(beta), params=params)


def render_on_interval(coeffs, zeta) -> np.ndarray:
    """Function-space view u(zeta) = sum_k coeffs_k e_k(zeta) for the heat basis."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    _, ev = heat_eigenpairs(coeffs.shape[-1])
    return ev(zeta) @ coeffs


def nl_zero() -> NonlinearityF:
    return NonlinearityF(F=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
                         lip_bound=0.0, sup_bound=0.0, name="zero",
                         kernel=(kernels.NL_ZERO, 0.0, None))


def nl_const(c) -> NonlinearityF:
    c = np.asarray(c, dtype=np.float64)
    return NonlinearityF(
        F=lambda x, c=c: np.broadcast_to(c, np.asarray(x).shape).copy(),
        lip_bound=0.0, sup_bound=float(np.linalg.norm(c)), name="const",
        kernel=(kernels.NL_CONST, 0.0, c))


def nl_arctan(scale: float) -> NonlinearityF:
    """Componentwise scale * arctan: diagonal, Lipschitz with constant |scale|."""
    return NonlinearityF(
        F=lambda x, s=scale: s * np.arctan(np.asarray(x, dtype=np.float64)),
        lip_bound=abs(scale), sup_bound=None, name="arctan",
        kernel=(kernels.NL_ARCTAN, float(scale), None))


def lipschitz_gap(F: NonlinearityF, dim: int, rng, n_pairs: int = 50) -> float:
    """Largest sampled ratio |F(x) - F(y)| / |x - y| over random pairs."""
    worst = 0.0
    for _ in range(n_pairs):
        x = rng.standard_normal(dim) * 3.0
        y = rng.standard_normal(dim) * 3.0
        nxy = float(np.linalg.norm(x - y))
        if nxy == 0.0:
            continue
        worst = max(worst, float(np.linalg.norm(F.F(x) - F.F(y))) / nxy)
    return worst


def coordinate_streams(seed: int, sample: int, n: int) -> list[RandomStream]:
    """Streams for Brownian coordinates 1..n of one sample (slot 0 is the clock)."""
    if n >= MAXK:
        raise ValueError(f"truncation must stay below {MAXK}")
    return [sample_stream(seed, sample, k) for k in range(1, n + 1)]


def _step_weights(lambdas: np.ndarray, dt: np.ndarray):
    """damp[i,k] = exp(-lambda_k dt_i) and phidt[i,k] = (1 - damp[i,k])/lambda_k."""
    z = np.outer(dt, lambdas)
    damp = np.exp(-z)
    phidt = -np.expm1(-z) / lambdas
    return damp, phidt


def _nl_dispatch(F: NonlinearityF, K: int):
    if F.kernel is None:
        return None
    kind, scale, const = F.kernel
    if kind == kernels.NL_CONST:
        const = np.ascontiguousarray(const, dtype=np.float64)
        if const.shape != (K,):
            raise ValueError("constant nonlinearity has wrong dimension")
    else:
        const = np.zeros(K)
    return int(kind), float(scale), const


def _galerkin_batch(lambdas, betas, F: NonlinearityF, x0, dt, dW) -> np.ndarray:
    """Terminal coefficients for a batch of noise panels dW (P, m, K)."""
    damp, phidt = _step_weights(lambdas, dt)
    bdW = dW * betas
    disp = _nl_dispatch(F, lambdas.size)
    if disp is not None:
        kind, scale, const = disp
        return kernels.galerkin_paths(damp, phidt, np.ascontiguousarray(bdW),
                                      np.ascontiguousarray(x0, dtype=np.float64),
                                      kind, scale, const)
    X = np.tile(np.asarray(x0, dtype=np.float64), (dW.shape[0], 1))
    for i in range(dt.size):
        X = damp[i] * (X + bdW[:, i, :]) + phidt[i] * F.F(X)
    return X


def _draw_spde_noise(model: SpectralModel, t: float, grid_size: int, seed: int,
                     start: int, stop: int):
    """Clock increments dS (P, m) and coordinate increments dW (P, m, K)."""
    m = grid_size
    K = model.n
    P = stop - start
    dt = t / m
    beta_clock = model.params.beta
    scale = 0.0 if dt < ZERO_INCREMENT else dt ** (1.0 / beta_clock)
    u = np.empty((P, m))
    e = np.empty((P, m))
    z = np.empty((P, K, m))
    for j in range(P):
        sample = start + j
        rng = sample_stream(seed, sample, 0).generator()
        rng.random(out=u[j])
        rng.standard_exponential(out=e[j])
        for k in range(K):
            sample_stream(seed, sample, k + 1).generator().standard_normal(out=z[j, k])
    u *= np.pi
    np.maximum(u, _U_FLOOR, out=u)
    np.maximum(e, _E_FLOOR, out=e)
    dS = scale * kernels.cms_stable(u.ravel(), e.ravel(), beta_clock).reshape(P, m)
    dW = np.sqrt(dS)[:, :, None] * np.swapaxes(z, 1, 2)
    return dS, dW


def sample_stochastic_convolution(model: SpectralModel, t: float, S_path,
                                  streams: Sequence[RandomStream]) -> np.ndarray:
    """One draw of the damped noise sum Z_t, coordinate space.

    Coordinate k accumulates beta_k * exp(-lambda_k (t - t_i)) dW^k_i with
    left-endpoint damping; conditionally on the clock, coordinate k is
    centered Gaussian with variance beta_k^2 sum_i exp(-2 lambda_k (t-t_i)) dS_i.
    """
    grid = np.asarray(S_path.grid, dtype=np.float64)
    if abs(grid[-1] - t) > 1e-12 or grid[0] != 0.0:
        raise ValueError("subordinator grid must cover [0, t] and end at t")
    if len(streams) != model.n:
        raise ValueError("need one stream per coordinate")
    m = grid.size - 1
    dt = np.diff(grid)
    dS = S_path.increments
    sig = np.sqrt(np.maximum(dS, 0.0))
    dW = np.empty((1, m, model.n))
    for k, st in enumerate(streams):
        dW[0, :, k] = sig * st.generator().standard_normal(m)
    return _galerkin_batch(model.lambdas, model.betas, nl_zero(),
                           np.zeros(model.n), dt, dW)[0]


def _gather(n: int, workers: int, job):
    ranges = [(a, min(a + CHUNK, n)) for a in range(0, n, CHUNK)]
    if workers <= 1:
        return [job(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: job(*ab), ranges))


def convolution_norms(model: SpectralModel, t: float, n_samples: int, seed: int,
                      grid_size: int = 256, workers: int = 1) -> np.ndarray:
    """Monte Carlo draws of ||Z_t|| over the truncated coordinates."""
    dt = np.full(grid_size, t / grid_size)

    def job(start, stop):
        _, dW = _draw_spde_noise(model, t, grid_size, seed, start, stop)
        Z = _galerkin_batch(model.lambdas, model.betas, nl_zero(),
                            np.zeros(model.n), dt, dW)
        return np.linalg.norm(Z, axis=1)

    return np.concatenate(_gather(n_samples, workers, job))


def convolution_moment_check(model: SpectralModel, p: float, t_grid,
                             n_samples: int, seed: int, grid_size: int = 256,
                             slack: float = 1.5, workers: int = 1) -> dict:
    """E ||Z_t||^p against the envelope C * mass^(alpha/2) * t^(1-alpha/2).

    C is fitted at the smallest horizon; the report checks that the
    envelope with the given slack dominates the Monte Carlo estimates at
    every other horizon, and returns the log-log slope across the grid.
    """
    alpha = model.params.alpha
    if p >= alpha:
        raise ValueError("p must be strictly below alpha (moment may diverge)")
    t_grid = np.sort(np.asarray(t_grid, dtype=np.float64))
    mass = model.series_mass
    rows = []
    for t in t_grid:
        norms = convolution_norms(model, float(t), n_samples, seed, grid_size,
                                  workers)
        vals = norms ** p
        est = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / np.sqrt(vals.size))
        rows.append({"t": float(t), "estimate": est, "std_err": se})
    shape = mass ** (alpha / 2.0) * t_grid ** (1.0 - alpha / 2.0)
    C = rows[0]["estimate"] / shape[0]
    ok = True
    for row, sh in zip(rows, shape):
        row["bound"] = slack * C * float(sh)
        ok = ok and row["estimate"] <= row["bound"]
    slope = float(np.polyfit(np.log(t_grid),
                             np.log([r["estimate"] for r in rows]), 1)[0])
    return {"rows": rows, "C": float(C), "bound_ok": ok, "slope": slope,
            "mass": mass, "p": p, "slack": slack}


def gaussian_abs_moment(p: float) -> float:
    """A_p = E |xi|^p for standard normal xi: 2^(p/2) Gamma((p+1)/2) / sqrt(pi)."""
    if p <= 0:
        raise ValueError("p must be positive")
    return float(2.0 ** (p / 2.0) * gamma_fn((p + 1.0) / 2.0) / np.sqrt(np.pi))


def gaussian_abs_moment_mc(coeffs, p: float, n: int,
                           stream: RandomStream) -> dict:
    """Monte Carlo check of E |sum c_k xi_k|^p = A_p (sum c_k^2)^(p/2)."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    xi = stream.generator().standard_normal((n, coeffs.size))
    vals = np.abs(xi @ coeffs) ** p
    emp = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(n))
    exact = gaussian_abs_moment(p) * float(np.sum(coeffs ** 2)) ** (p / 2.0)
    z = 0.0 if se == 0 else (emp - exact) / se
    return {"empirical": emp, "exact": exact, "std_err": se, "z": z}


def solve_mild_galerkin(model: SpectralModel, F: NonlinearityF, x, grid,
                        noise) -> GalerkinState:
    """Exponential-Euler path of the truncated mild equation, one sample.

    noise is either a (m, n) array of raw coordinate increments dW^k
    along the clock, or a (S_path, streams) pair from which they are
    drawn. With zero nonlinearity and zero start the terminal state
    reproduces sample_stochastic_convolution bit for bit on shared
    increments.
    """
    grid = np.asarray(grid, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n,):
        raise ValueError("initial state must live on the truncated coordinates")
    m = grid.size - 1
    dt = np.diff(grid)
    if np.any(dt <= 0):
        raise ValueError("grid must be strictly increasing")
    if isinstance(noise, tuple):
        S_path, streams = noise
        if len(streams) != model.n:
            raise ValueError("need one stream per coordinate")
        dS = S_path.increments
        if dS.size != m:
            raise ValueError("subordinator path does not match the grid")
        sig = np.sqrt(np.maximum(dS, 0.0))
        dW = np.empty((m, model.n))
        for k, st in enumerate(streams):
            dW[:, k] = sig * st.generator().standard_normal(m)
    else:
        dW = np.asarray(noise, dtype=np.float64)
        if dW.shape != (m, model.n):
            raise ValueError("noise increments must have shape (len(grid)-1, n)")
    damp, phidt = _step_weights(model.lambdas, dt)
    bdW = dW * model.betas
    coeffs = np.empty((m + 1, model.n))
    coeffs[0] = x
    X = x.copy()
    for i in range(m):
        X = damp[i] * (X + bdW[i]) + phidt[i] * F.F(X)
        if not np.all(np.isfinite(X)) or np.linalg.norm(X) > 1e12:
            raise DivergenceError(
                f"spectral state diverged at t={grid[i + 1]:.6g}",
                t=float(grid[i + 1]))
        coeffs[i + 1] = X
    return GalerkinState(grid=grid, coeffs=coeffs)


def strong_feller_gap(model: SpectralModel, F: NonlinearityF, f, x, y, t: float,
                      n_samples: int, seed: int, grid_size: int = 256,
                      workers: int = 1) -> dict:
    """Coupled-noise estimate of |E f(X_t(x)) - E f(X_t(y))|.

    Both initial states consume identical noise, so the gap is exactly 0
    when x == y or f is constant. The effective constant reported is
    gap / (exp(Lip(F) t) t^(-1/alpha) sup|f| ||x - y||).
    """
    if f.sup_bound is None:
        raise ValueError("f needs a certified sup bound")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != (model.n,) or y.shape != (model.n,):
        raise ValueError("x and y must live on the truncated coordinates")
    dt = np.full(grid_size, t / grid_size)

    def job(start, stop):
        _, dW = _draw_spde_noise(model, t, grid_size, seed, start, stop)
        Xx = _galerkin_batch(model.lambdas, model.betas, F, x, dt, dW)
        Xy = _galerkin_batch(model.lambdas, model.betas, F, y, dt, dW)
        return f.f(Xx) - f.f(Xy)

    diffs = np.concatenate(_gather(n_samples, workers, job))
    gap = float(abs(np.mean(diffs)))
    se = float(np.std(diffs, ddof=1) / np.sqrt(diffs.size))
    dist = float(np.linalg.norm(x - y))
    alpha = model.params.alpha
    denom = np.exp(F.lip_bound * t) * t ** (-1.0 / alpha) * f.sup_bound * dist
    eff = gap / denom if denom > 0 else float("nan")
    return {"gap": gap, "std_err": se, "eff_const": eff, "dist": dist,
            "t": t, "n": int(diffs.size)}


def galerkin_convergence_check(model: SpectralModel, levels, F: NonlinearityF,
                               x, t: float, n_samples: int, seed: int,
                               grid_size: int = 256, workers: int = 1) -> dict:
    """Shared-noise deviations between consecutive truncation levels.

    Coordinate k keeps its stream at every truncation, so raising the
    level only adds coordinates. Reports per-sample deviations
    ||X^{n_{j+1}}_t - X^{n_j}_t|| (smaller state zero-padded) and their
    medians, which should decay as the spectral tail mass shrinks.
    """
    levels = sorted(int(v) for v in levels)
    if len(levels) < 2:
        raise ValueError("need at least two truncation levels")
    if levels[-1] > model.n:
        raise ValueError("largest level exceeds the model truncation")
    if F.kernel is None:
        raise ValueError("convergence check needs a diagonal registered "
                         "nonlinearity (applies at every truncation)")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n,):
        raise ValueError("x must live on the full truncation")
    dt = np.full(grid_size, t / grid_size)

    def job(start, stop):
        _, dW = _draw_spde_noise(model, t, grid_size, seed, start, stop)
        outs = []
        for lev in levels:
            outs.append(_galerkin_batch(model.lambdas[:lev], model.betas[:lev],
                                        F, x[:lev], dt, dW[:, :, :lev]))
        devs = np.empty((stop - start, len(levels) - 1))
        for j in range(len(levels) - 1):
            small, big = outs[j], outs[j + 1]
            pad = big.copy()
            pad[:, :levels[j]] -= small
            devs[:, j] = np.linalg.norm(pad, axis=1)
        return devs

    devs = np.vstack(_gather(n_samples, workers, job))
    medians = np.median(devs, axis=0)
    tail_mass = [float(np.sum(model.betas[lev:] ** 2 / model.lambdas[lev:]))
                 for lev in levels[:-1]]
    return {"levels": levels, "medians": [float(v) for v in medians],
            "deviations": devs, "tail_mass": tail_mass}
