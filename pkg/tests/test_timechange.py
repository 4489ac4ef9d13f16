"""Clock smoothing, inversion and integral sums against analytic cases.

The smoothed clock has the closed form avg + eps*t; on flat stretches of
a step clock that is exactly ell_t + eps*t, and for the identity clock
ell_t = t it is t + eps/2 + eps*t. Quadrature (scipy) supplies an
independent oracle for the piecewise integration.
"""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from stablegrad import (
    CadlagIncreasingPath,
    RandomStream,
    StableParams,
    discrete_bracket,
    invert,
    ito_integral_time_changed,
    load_path,
    sample_subordinator_path,
    save_path,
    smooth,
    stable_draws,
)

LINEAR = CadlagIncreasingPath([0.0, 2.0], [0.0, 2.0], rule="linear")
STEP = CadlagIncreasingPath([0.0, 1.0], [0.0, 2.0], rule="step")


def test_linear_clock_smoothing_exact():
    sm = smooth(LINEAR, 0.1)
    # (1/eps) int_t^{t+eps} s ds = t + eps/2
    assert sm.value(1.0) == pytest.approx(1.0 + 0.05 + 0.1, abs=1e-12)
    assert sm.value(0.0) == pytest.approx(0.05, abs=1e-12)


def test_step_clock_smoothing_exact():
    sm = smooth(STEP, 0.5)
    # int_{0.75}^{1.25} ell = 2 * 0.25, so value = 1 + eps * t
    assert sm.value(0.75) == pytest.approx(1.375, abs=1e-12)


def test_smoothing_validation():
    with pytest.raises(ValueError):
        smooth(LINEAR, 0.0)
    with pytest.raises(ValueError):
        smooth(LINEAR, 1.0)
    with pytest.raises(ValueError):
        CadlagIncreasingPath([0.0, 1.0], [1.0, 0.5])
    with pytest.raises(ValueError):
        CadlagIncreasingPath([0.5, 1.0], [0.0, 1.0])


def test_smoothing_against_quadrature():
    knots_t = np.array([0.0, 0.3, 0.9, 1.7, 2.0])
    knots_v = np.array([0.1, 0.4, 0.4, 1.9, 2.3])
    for rule in ("step", "linear"):
        path = CadlagIncreasingPath(knots_t, knots_v, rule=rule)
        sm = smooth(path, 0.17)
        for t in (0.0, 0.25, 0.8, 1.3, 1.95):
            quad, _ = integrate.quad(path.value, t, t + 0.17, limit=200,
                                     points=knots_t[(knots_t > t) &
                                                    (knots_t < t + 0.17)])
            expected = quad / 0.17 + 0.17 * t
            assert sm.value(t) == pytest.approx(expected, abs=1e-9)


def test_smoothed_decreases_to_clock():
    # at a continuity point the gap is exactly eps * t once eps clears the
    # next knot, so it vanishes along eps -> 0
    path = CadlagIncreasingPath([0.0, 0.05, 0.5], [0.0, 1.0, 1.5], rule="step")
    t = 0.2
    eps_seq = [0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.002]
    vals = [smooth(path, e).value(t) for e in eps_seq]
    assert all(a >= b - 1e-14 for a, b in zip(vals, vals[1:]))
    assert all(v >= path.value(t) for v in vals)
    assert vals[-1] - path.value(t) < 0.005 * t + 1e-12
    # with eps = 1e-4, points with eps * t below 1e-6 sit within 1e-6
    sm = smooth(path, 1e-4)
    for tt in (0.001, 0.004, 0.009):
        assert abs(sm.value(tt) - path.value(tt)) < 1e-6


def test_inverse_affine_clock():
    sm = smooth(CadlagIncreasingPath([0.0, 5.0], [0.0, 5.0], rule="linear"), 0.1)
    gamma = invert(sm)
    # smoothed value is 1.1 t + 0.05, so the inverse is (s - 0.05) / 1.1
    assert gamma.value(1.15) == pytest.approx(1.0, abs=1e-10)
    for s in (0.06, 0.5, 3.0):
        assert gamma.value(s) == pytest.approx((s - 0.05) / 1.1, abs=1e-10)
    with pytest.raises(ValueError):
        gamma.value(0.0)


def test_inverse_round_trip():
    rng = np.random.default_rng(2)
    knots_t = np.concatenate(([0.0], np.cumsum(rng.uniform(0.05, 0.4, 6))))
    knots_v = np.cumsum(np.concatenate(([0.0], rng.uniform(0.0, 0.8, 6))))
    for rule in ("step", "linear"):
        path = CadlagIncreasingPath(knots_t, knots_v, rule=rule)
        sm = smooth(path, 0.13)
        gamma = invert(sm)
        ts = rng.uniform(0.0, path.horizon, 100)
        err = np.abs(gamma.value(sm.value(ts)) - ts)
        assert err.max() < 1e-10
        # monotone increasing inverse on a sampled range
        ss = np.linspace(sm.value(0.0), sm.value(path.horizon), 50)
        gs = gamma.value(ss)
        assert np.all(np.diff(gs) > 0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 0.5), st.floats(0.0, 1.0)),
                min_size=1, max_size=6),
       st.sampled_from(["step", "linear"]),
       st.floats(0.01, 0.5))
def test_smoothing_invariants_random_paths(incs, rule, eps):
    dts = np.array([a for a, _ in incs])
    dvs = np.array([b for _, b in incs])
    path = CadlagIncreasingPath(np.concatenate(([0.0], np.cumsum(dts))),
                                np.concatenate(([0.0], np.cumsum(dvs))),
                                rule=rule)
    sm = smooth(path, eps)
    ts = np.linspace(0.0, path.horizon, 17)
    vals = sm.value(ts)
    # dominates the clock and grows at least eps per unit time
    assert np.all(vals >= path.value(ts) - 1e-12)
    gaps = np.diff(vals) - eps * np.diff(ts)
    assert np.all(gaps >= -1e-12)


def test_ito_integral_basics():
    w = np.array([0.0, 0.3, -0.2, 0.5])
    ell = np.array([0.0, 1.0, 1.5, 2.0])
    assert ito_integral_time_changed(np.zeros(4), ell, w) == 0.0
    # constant integrand telescopes
    assert ito_integral_time_changed(np.full(4, 2.5), ell, w) == \
        pytest.approx(2.5 * 0.5, abs=1e-14)
    w2 = np.random.default_rng(0).standard_normal((4, 2))
    xi2 = np.random.default_rng(1).standard_normal((4, 2))
    manual = sum(xi2[i] @ (w2[i + 1] - w2[i]) for i in range(3))
    assert ito_integral_time_changed(xi2, ell, w2) == pytest.approx(manual, abs=1e-14)
    with pytest.raises(ValueError):
        ito_integral_time_changed(np.zeros(3), ell, w)


def test_ito_integral_median_against_conditional_gaussian_oracle():
    # |int_0^1 dW_S|^2 = S_1 * xi^2; its median solves
    # E Phi_chi2(m / S_1) = 1/2, which quadrature puts at exactly 1/2
    # (the alpha = 1 projected driver is Cauchy with scale 1/sqrt(2)).
    params = StableParams(1.0)
    n, m = 100_000, 8
    dt = 1.0 / m
    s1 = stable_draws(params, n * m, RandomStream(81, 0)).reshape(n, m) * dt ** 2
    z = RandomStream(82, 0).generator().standard_normal((n, m))
    integrals = np.sum(np.sqrt(s1) * z, axis=1)
    # the vectorized integral agrees with the op on a sample of paths
    for i in range(50):
        w = np.concatenate(([0.0], np.cumsum(np.sqrt(s1[i]) * z[i])))
        ell = np.concatenate(([0.0], np.cumsum(s1[i])))
        assert ito_integral_time_changed(np.ones(m + 1), ell, w) == \
            pytest.approx(integrals[i], abs=1e-14)
    med = np.median(integrals ** 2)
    assert abs(med - 0.5) < 0.05 * 0.5


def test_discrete_bracket_cases():
    # continuous clock: no classified jumps, bracket is the total growth
    grid_vals = np.linspace(0.0, 1.3, 65)
    w = np.random.default_rng(3).standard_normal(65)
    assert discrete_bracket(grid_vals, w) == pytest.approx(1.3, abs=1e-12)
    # single pure jump: bracket is the squared W increment across it
    ell = np.array([0.0, 0.0, 0.0, 2.0, 2.0])
    w = np.array([0.0, 0.0, 0.0, 1.7, 1.7])
    assert discrete_bracket(ell, w) == pytest.approx(1.7 ** 2, abs=1e-14)
    with pytest.raises(ValueError):
        discrete_bracket(np.array([0.0, -1.0]), np.array([0.0, 0.0]))


def test_discrete_bracket_mean_matches_clock():
    # E[bracket | clock] = ell_T regardless of jump classification;
    # condition on S_T < 10 so the comparison has finite moments
    params = StableParams(1.0)
    m, n = 64, 4000
    grid = np.linspace(0.0, 1.0, m + 1)
    diffs = []
    for i in range(n):
        path = sample_subordinator_path(params, grid, RandomStream(90, i))
        if path.terminal >= 10.0:
            continue
        z = RandomStream(91, i).generator().standard_normal(m)
        w = np.concatenate(([0.0], np.cumsum(np.sqrt(path.increments) * z)))
        diffs.append(discrete_bracket(path.values, w) - path.terminal)
    diffs = np.array(diffs)
    se = np.std(diffs, ddof=1) / np.sqrt(diffs.size)
    assert abs(np.mean(diffs)) < 3.5 * se


def test_martingale_sup_second_moment_bound():
    # E sup |int xi dW_ell|^2 <= 4 E int xi^2 d ell  (Doob constant)
    path = CadlagIncreasingPath([0.0, 0.3, 0.7, 1.0], [0.0, 0.4, 0.9, 1.3],
                                rule="step")
    grid = np.linspace(0.0, 1.0, 65)
    ell = np.asarray(path.value(grid))
    dl = np.diff(ell)
    xi = np.cos(3.0 * grid)[:-1]
    rhs = 4.0 * float(np.sum(xi ** 2 * dl))
    n = 20_000
    z = RandomStream(95, 0).generator().standard_normal((n, dl.size))
    partial = np.cumsum(xi * np.sqrt(dl) * z, axis=1)
    sups = np.max(np.abs(partial), axis=1) ** 2
    se = np.std(sups, ddof=1) / np.sqrt(n)
    assert np.mean(sups) <= rhs + 3.0 * se


def test_smoothed_integral_converges_to_clock_integral():
    # mean-square gap between integrating against W of the smoothed clock
    # and of the raw clock vanishes along eps -> 0
    path = CadlagIncreasingPath([0.0, 0.35, 0.8, 1.0], [0.0, 0.5, 1.2, 1.4],
                                rule="step")
    grid = np.linspace(0.0, 1.0, 65)
    xi = np.cos(2.0 * grid)[:-1]
    eps_seq = [0.2, 0.08, 0.032, 0.0128, 0.005, 0.002, 0.0008, 0.0002]
    ell = np.asarray(path.value(grid))
    smoothed_vals = [np.asarray(smooth(path, e).value(grid)) for e in eps_seq]
    times = np.unique(np.concatenate([ell] + smoothed_vals))
    dt = np.diff(times)
    n = 4000
    z = RandomStream(99, 0).generator().standard_normal((n, dt.size))
    W = np.concatenate((np.zeros((n, 1)), np.cumsum(np.sqrt(dt) * z, axis=1)),
                       axis=1)
    idx_ell = np.searchsorted(times, ell)
    base = np.sum(xi * np.diff(W[:, idx_ell], axis=1), axis=1)
    means = []
    for sv in smoothed_vals:
        idx = np.searchsorted(times, sv)
        integ = np.sum(xi * np.diff(W[:, idx], axis=1), axis=1)
        means.append(float(np.mean((integ - base) ** 2)))
    assert all(a > b for a, b in zip(means, means[1:]))
    assert means[-1] < 1e-3


def test_path_csv_round_trip():
    path = CadlagIncreasingPath([0.0, 0.5, 1.0], [0.0, 0.2, 0.9], rule="linear")
    buf = io.StringIO()
    save_path(path, buf)
    buf.seek(0)
    loaded = load_path(buf)
    assert loaded.rule == "linear"
    assert np.array_equal(loaded.times, path.times)
    assert np.array_equal(loaded.values, path.values)
