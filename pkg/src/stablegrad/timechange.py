"""Deterministic increasing clocks: smoothing, inversion, integral sums.

A clock is a finite-knot increasing path, either piecewise-constant
right-continuous ("step") or piecewise-linear ("linear"). Smoothing
replaces the clock by its forward epsilon-average plus a strictly
increasing ramp,

    smoothed(t) = (1/eps) * int_t^{t+eps} ell(s) ds + eps * t,

evaluated in closed form from the knots (no quadrature error). Past its
last knot the clock is extended as a constant, which leaves smoothed
values at t <= T - eps untouched.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

RULES = ("step", "linear")


@dataclass(frozen=True)
class CadlagIncreasingPath:
    """Finite-knot increasing path on [0, T], constant beyond T."""

    times: np.ndarray
    values: np.ndarray
    rule: str = "step"

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if times.ndim != 1 or times.size == 0 or times.size != values.size:
            raise ValueError("times and values must be equal-length 1-d arrays")
        if times[0] != 0.0:
            raise ValueError("first knot must be at time 0")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("knot times must be strictly increasing")
        if np.any(np.diff(values) < 0):
            raise ValueError("knot values must be nondecreasing")
        # cumulative exact integral of the path at each knot
        if times.size > 1:
            dt = np.diff(times)
            if self.rule == "step":
                seg = values[:-1] * dt
            else:
                seg = 0.5 * (values[:-1] + values[1:]) * dt
            cum = np.concatenate(([0.0], np.cumsum(seg)))
        else:
            cum = np.zeros(1)
        object.__setattr__(self, "_cum", cum)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def value(self, t):
        """Path value at t (array ok); right-continuous for the step rule."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0):
            raise ValueError("time must be >= 0")
        if self.rule == "linear":
            out = np.interp(t, self.times, self.values)
        else:
            idx = np.searchsorted(self.times, t, side="right") - 1
            out = self.values[idx]
        return out if out.ndim else float(out)

    def antiderivative(self, t):
        """Exact int_0^t of the path, constant extension past the horizon."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < 0):
            raise ValueError("time must be >= 0")
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1,
                      0, self.times.size - 1)
        t0 = self.times[idx]
        v0 = self.values[idx]
        base = self._cum[idx]
        off = t - t0
        if self.rule == "linear":
            nxt = np.minimum(idx + 1, self.times.size - 1)
            dt = self.times[nxt] - t0
            slope = np.where(dt > 0, (self.values[nxt] - v0) / np.where(dt > 0, dt, 1.0), 0.0)
            out = base + v0 * off + 0.5 * slope * off * off
        else:
            out = base + v0 * off
        return out if out.ndim else float(out)

    def integral(self, a, b):
        """Exact int_a^b of the path."""
        return self.antiderivative(b) - self.antiderivative(a)


@dataclass(frozen=True)
class SmoothedPath:
    """Forward eps-average of a clock plus the eps*t ramp; strictly increasing."""

    base: CadlagIncreasingPath
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must be in (0, 1)")

    def value(self, t):
        t = np.asarray(t, dtype=np.float64)
        out = self.base.integral(t, t + self.epsilon) / self.epsilon + self.epsilon * t
        return out if out.ndim else float(out)

    def derivative(self, t):
        """Right derivative: (ell(t+eps) - ell(t)) / eps + eps."""
        t = np.asarray(t, dtype=np.float64)
        out = (self.base.value(t + self.epsilon) - self.base.value(t)) / self.epsilon \
            + self.epsilon
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class InversePath:
    """Inverse of a smoothed clock, defined on [smoothed(0), infinity)."""

    source: SmoothedPath

    @property
    def domain_start(self) -> float:
        return self.source.value(0.0)

    def value(self, s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=np.float64))
        lo_val = self.domain_start
        if np.any(s_arr < lo_val - 1e-12):
            raise ValueError("query below the smoothed path's value at 0")
        out = np.empty_like(s_arr)
        for i, si in enumerate(s_arr):
            if si <= lo_val:
                out[i] = 0.0
                continue
            hi = max(self.source.base.horizon, 1.0)
            while self.source.value(hi) < si:
                hi *= 2.0
            out[i] = brentq(lambda u: self.source.value(u) - si, 0.0, hi,
                            xtol=1e-14, rtol=8.9e-16, maxiter=200)
        return out if np.ndim(s) else float(out[0])

    def derivative(self, s):
        t = self.value(s)
        d = self.source.derivative(np.asarray(t))
        out = 1.0 / d
        return out if np.ndim(s) else float(out)


def smooth(path: CadlagIncreasingPath, epsilon: float) -> SmoothedPath:
    """Smoothed clock; exact by piecewise closed-form integration."""
    return SmoothedPath(path, float(epsilon))


def invert(smoothed: SmoothedPath) -> InversePath:
    """Monotone inverse of a smoothed clock (bracketed root-finding)."""
    return InversePath(smoothed)


def ito_integral_time_changed(integrand, ell_values, w_values) -> float:
    """Left-endpoint sum  sum_i <xi_i, W_{i+1} - W_i>  along a clock.

    The same sum serves integrals against any time-changed Brownian
    motion: substituting one clock's values for another's changes only
    the inputs, never this code path. The integrand must be adapted
    (value at t_i computed from data up to t_i; caller contract).
    """
    xi = np.atleast_2d(np.asarray(integrand, dtype=np.float64).T).T
    w = np.atleast_2d(np.asarray(w_values, dtype=np.float64).T).T
    ell = np.asarray(ell_values, dtype=np.float64)
    if not (xi.shape[0] == w.shape[0] == ell.shape[0]):
        raise ValueError("integrand, clock values and W values must share length")
    if xi.shape[1] != w.shape[1]:
        raise ValueError("integrand and W values must share dimension")
    dw = np.diff(w, axis=0)
    return float(np.sum(xi[:-1] * dw))


def discrete_bracket(ell_values, w_values, abs_threshold: float = 0.0) -> float:
    """Discrete quadratic variation of W along the clock ell.

    Grid increments of ell larger than max(10 * median increment,
    abs_threshold) are classified as jumps; the bracket is the remaining
    (continuous) growth of ell plus the squared W increments across the
    jumps. A coarse grid cannot distinguish small jumps from continuous
    accrual, hence the threshold rule.
    """
    ell = np.asarray(ell_values, dtype=np.float64)
    w = np.asarray(w_values, dtype=np.float64)
    if ell.ndim != 1 or w.ndim != 1 or ell.size != w.size:
        raise ValueError("ell and W values must be equal-length 1-d arrays")
    if ell.size < 2:
        return 0.0
    dl = np.diff(ell)
    if np.any(dl < 0):
        raise ValueError("clock values must be nondecreasing")
    thr = max(10.0 * float(np.median(dl)), float(abs_threshold))
    jumps = dl > thr
    dw = np.diff(w)
    cont = float(ell[-1] - ell[0] - np.sum(dl[jumps]))
    return cont + float(np.sum(dw[jumps] ** 2))


def save_path(path: CadlagIncreasingPath, file) -> None:
    """Two-column CSV (time,value) with a header comment naming the rule."""
    own = isinstance(file, (str, bytes))
    fh = open(file, "w", encoding="utf-8") if own else file
    try:
        fh.write(f"# rule={path.rule}\n")
        fh.write("time,value\n")
        for t, v in zip(path.times, path.values):
            fh.write(f"{t:.17g},{v:.17g}\n")
    finally:
        if own:
            fh.close()


def load_path(file) -> CadlagIncreasingPath:
    own = isinstance(file, (str, bytes))
    fh = open(file, "r", encoding="utf-8") if own else file
    try:
        first = fh.readline().strip()
        if not first.startswith("# rule="):
            raise ValueError("missing '# rule=' header line")
        rule = first.split("=", 1)[1].strip()
        header = fh.readline().strip()
        if header != "time,value":
            raise ValueError("expected 'time,value' header")
        data = np.loadtxt(io.StringIO(fh.read()), delimiter=",", ndmin=2)
        return CadlagIncreasingPath(data[:, 0], data[:, 1], rule=rule)
    finally:
        if own:
            fh.close()
