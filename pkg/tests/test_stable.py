"""Sampler correctness against closed-form oracles.

For beta = 1/2 the positive stable law is the Levy distribution with
density (1/(2 sqrt(pi))) s^(-3/2) exp(-1/(4s)), which pins the median;
the Laplace transform exp(-lam^beta) and the negative-moment identity
Gamma(r/beta)/(beta Gamma(r)) t^(-r/beta) pin everything else.
"""

import numpy as np
import pytest
from scipy import integrate, optimize
from scipy.stats import ks_2samp

from stablegrad import (
    RandomStream,
    StableParams,
    SubordinatorPath,
    empirical_laplace_check,
    negative_moment_oracle,
    sample_brownian_at_subordinated_times,
    sample_positive_stable,
    sample_subordinator_path,
    stable_draws,
)


def levy_median_by_quadrature():
    dens = lambda s: 1.0 / (2.0 * np.sqrt(np.pi)) * s ** -1.5 * np.exp(-1.0 / (4.0 * s))
    cdf = lambda x: integrate.quad(dens, 0.0, x)[0]
    return optimize.brentq(lambda x: cdf(x) - 0.5, 0.1, 10.0, xtol=1e-12)


def test_params_validation():
    assert StableParams(1.2).beta == 0.6
    for bad in (0.0, 2.0, -1.0, 2.5):
        with pytest.raises(ValueError):
            StableParams(bad)


def test_determinism_bitwise():
    p = StableParams(1.0)
    a = stable_draws(p, 1000, RandomStream(123, 7))
    b = stable_draws(p, 1000, RandomStream(123, 7))
    c = stable_draws(p, 1000, RandomStream(123, 8))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert sample_positive_stable(p, RandomStream(5, 0)) == \
        sample_positive_stable(p, RandomStream(5, 0))


def test_levy_median():
    oracle = levy_median_by_quadrature()
    assert abs(oracle - 1.0990) < 1e-3
    n = 200_000
    s = stable_draws(StableParams(1.0), n, RandomStream(11, 0))
    med = np.median(s)
    # SE of the sample median: 1 / (2 f(m) sqrt(n))
    fm = 1.0 / (2.0 * np.sqrt(np.pi)) * oracle ** -1.5 * np.exp(-1.0 / (4.0 * oracle))
    se = 1.0 / (2.0 * fm * np.sqrt(n))
    assert abs(med - oracle) < 3.0 * se


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5, 1.9])
def test_laplace_transform(alpha):
    p = StableParams(alpha)
    rows = empirical_laplace_check(p, [0.0, 0.25, 1.0, 4.0], 200_000,
                                   RandomStream(21, int(alpha * 10)))
    lam0 = rows[0]
    assert lam0[1] == 1.0 and lam0[2] == 1.0 and lam0[3] == 0.0
    for lam, emp, exact, z in rows[1:]:
        assert exact == pytest.approx(np.exp(-(lam ** p.beta)), rel=1e-12)
        assert abs(z) < 3.5


def test_laplace_check_validation():
    p = StableParams(1.0)
    with pytest.raises(ValueError):
        empirical_laplace_check(p, [1.0], 100, RandomStream(0, 0))
    with pytest.raises(ValueError):
        empirical_laplace_check(p, [-1.0], 2000, RandomStream(0, 0))


def test_subordinator_path_basics():
    p = StableParams(1.5)
    path = sample_subordinator_path(p, [0.0], RandomStream(3, 0))
    assert path.values.tolist() == [0.0]

    grid = np.linspace(0.0, 2.0, 65)
    path = sample_subordinator_path(p, grid, RandomStream(3, 1))
    assert path.values[0] == 0.0
    assert np.all(np.diff(path.values) >= 0)
    assert path.values.size == grid.size

    with pytest.raises(ValueError):
        sample_subordinator_path(p, [], RandomStream(3, 2))
    with pytest.raises(ValueError):
        sample_subordinator_path(p, [0.0, 2.0, 1.0], RandomStream(3, 2))
    with pytest.raises(ValueError):
        sample_subordinator_path(p, [1.0, 2.0], RandomStream(3, 2))


def test_subordinator_laplace_on_path():
    p = StableParams(1.0)
    vals = np.array([sample_subordinator_path(p, [0.0, 1.0],
                                              RandomStream(40, i)).terminal
                     for i in range(20_000)])
    transformed = np.exp(-vals)
    z = (np.mean(transformed) - np.exp(-1.0)) / \
        (np.std(transformed, ddof=1) / np.sqrt(vals.size))
    assert abs(z) < 3.5


def test_self_similarity_ks():
    # S_2 should match 2**(1/beta) * S_1 in law
    p = StableParams(1.5)
    n = 10_000
    s2 = np.empty(n)
    for i in range(n):
        s2[i] = sample_subordinator_path(p, [0.0, 1.0, 2.0],
                                         RandomStream(50, i)).terminal
    s1 = stable_draws(p, n, RandomStream(51, 0))
    stat = ks_2samp(s2, 2.0 ** (1.0 / p.beta) * s1).statistic
    assert stat < 0.02


def test_brownian_at_subordinated_times():
    grid = np.array([0.0, 1.0])
    frozen = SubordinatorPath(grid, np.array([0.0, 0.0]))
    w = sample_brownian_at_subordinated_times(frozen, 3, RandomStream(6, 0))
    assert np.array_equal(w, np.zeros((2, 3)))

    path = SubordinatorPath(grid, np.array([0.0, 4.0]))
    n = 100_000
    vals = np.array([
        sample_brownian_at_subordinated_times(path, 1, RandomStream(7, i))[1, 0]
        for i in range(n)])
    var = np.var(vals, ddof=1)
    se = 4.0 * np.sqrt(2.0 / n)
    assert abs(var - 4.0) < 3.0 * se

    w2 = np.array([
        sample_brownian_at_subordinated_times(path, 2, RandomStream(8, i))[1]
        for i in range(10_000)])
    corr = np.corrcoef(w2.T)[0, 1]
    assert abs(corr) < 0.03

    with pytest.raises(ValueError):
        sample_brownian_at_subordinated_times(path, 0, RandomStream(9, 0))


def test_negative_moment_oracle_values():
    p = StableParams(1.0)  # beta = 1/2
    assert negative_moment_oracle(p, 0.5, 1.0) == pytest.approx(
        2.0 / np.sqrt(np.pi), rel=1e-12)
    assert negative_moment_oracle(p, 0.5, 2.0) == pytest.approx(
        0.5 * 2.0 / np.sqrt(np.pi), rel=1e-12)
    # t-scaling exponent is -r/beta
    r, beta = 1.5, 0.5
    ratio = negative_moment_oracle(p, r, 3.0) / negative_moment_oracle(p, r, 1.0)
    assert ratio == pytest.approx(3.0 ** (-r / beta), rel=1e-12)
    for bad in ((0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)):
        with pytest.raises(ValueError):
            negative_moment_oracle(p, *bad)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_negative_moment_monte_carlo(r):
    p = StableParams(1.0)
    t = 2.0
    s = t ** (1.0 / p.beta) * stable_draws(p, 200_000, RandomStream(60, int(r * 2)))
    vals = s ** (-r)
    z = (np.mean(vals) - negative_moment_oracle(p, r, t)) / \
        (np.std(vals, ddof=1) / np.sqrt(vals.size))
    assert abs(z) < 3.5


def test_zero_increment_guard():
    # steps below the zero-increment floor draw no noise at all
    p = StableParams(1.0)
    grid = np.array([0.0, 1e-13, 1.0])
    path = sample_subordinator_path(p, grid, RandomStream(70, 0))
    assert path.values[1] == 0.0
    assert path.values[2] > 0.0
