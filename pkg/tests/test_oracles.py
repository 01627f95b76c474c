import math
from functools import partial

import numpy as np
import pytest
from scipy import stats

from rdp_audit import oracles
from rdp_audit.oracles import (
    binomial_central_moment,
    div_ngd,
    div_shuffled_rr,
    eps_gaussian,
    eps_laplace,
    eps_rr,
    eps_subsampled,
    renyi_numeric_reference,
)

LAMS = [1.5, 2, 3, 5, 7]


def _lap(mu, b):
    return stats.laplace(mu, b).pdf


def _norm(mu, s):
    return stats.norm(mu, s).pdf


def test_eps_laplace_value():
    # direct evaluation of log((2/3) e^0.2 + (1/3) e^-0.4)
    expected = math.log(2 / 3 * math.exp(0.2) + 1 / 3 * math.exp(-0.4))
    assert eps_laplace(2, 5) == pytest.approx(expected, abs=1e-15)
    assert eps_laplace(2, 5) == pytest.approx(0.0370149368, abs=1e-10)


def test_eps_laplace_no_noise_difference_limit():
    assert 0 < eps_laplace(2, 1e6) < 1e-5


def test_eps_gaussian_values():
    assert eps_gaussian(2, 5) == 0.04
    assert eps_gaussian(5, 5) == 0.1
    assert eps_gaussian(7, 5) == pytest.approx(0.14, abs=1e-15)


@pytest.mark.parametrize("lam", [2, 5])
def test_closed_forms_match_quadrature(lam):
    gauss = renyi_numeric_reference(_norm(1, 5), _norm(0, 5), lam, (-120, 120))
    lap = renyi_numeric_reference(_lap(1, 5), _lap(0, 5), lam, (-250, 250), (0.0, 1.0))
    assert gauss == pytest.approx(eps_gaussian(lam, 5), abs=1e-8)
    assert lap == pytest.approx(eps_laplace(lam, 5), abs=1e-8)


def test_numeric_reference_identical_densities():
    assert abs(renyi_numeric_reference(_norm(0, 1), _norm(0, 1), 3, (-40, 40))) < 1e-10


def test_eps_subsampled_lambda_two():
    value = eps_subsampled(2, 0.5, partial(eps_gaussian, b=5))
    assert value == pytest.approx(math.log(0.75 + 0.25 * math.exp(0.04)), abs=1e-14)
    assert value == pytest.approx(0.0101510, abs=1e-7)


@pytest.mark.parametrize("formula", ["fixed_order", "order_j"])
def test_eps_subsampled_no_subsampling_limit(formula):
    base = partial(eps_laplace, b=5)
    for lam in (2, 5, 7):
        assert eps_subsampled(lam, 1 - 1e-10, base, formula) == pytest.approx(base(lam), abs=1e-6)


def test_eps_subsampled_rejects_fractional_order():
    with pytest.raises(ValueError):
        eps_subsampled(2.5, 0.5, partial(eps_gaussian, b=5))


@pytest.mark.parametrize("lam", [2, 3, 5])
def test_subsampled_order_j_is_exact_mixture_divergence(lam):
    b, g = 5.0, 0.5

    def mix(t):
        return (1 - g) * stats.laplace(0, b).pdf(t) + g * stats.laplace(1, b).pdf(t)

    ref = renyi_numeric_reference(mix, _lap(0, b), lam, (-250, 250), (0.0, 1.0))
    value = eps_subsampled(lam, g, partial(eps_laplace, b=b), "order_j")
    assert value == pytest.approx(ref, abs=1e-8)
    assert eps_subsampled(lam, g, partial(eps_laplace, b=b), "fixed_order") >= value - 1e-15


@pytest.mark.parametrize("gamma", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("lam", [2, 5, 7])
@pytest.mark.parametrize("base", [partial(eps_gaussian, b=5), partial(eps_laplace, b=5)])
def test_subsampling_amplifies(gamma, lam, base):
    for formula in oracles.SUBSAMPLE_FORMULAS:
        assert eps_subsampled(lam, gamma, base, formula) <= base(lam)


def test_eps_rr_values():
    assert eps_rr(2, 0.0) == pytest.approx(0.0, abs=1e-15)
    keep = math.exp(1.5) / (1 + math.exp(1.5))
    flip = 1 - keep
    assert eps_rr(2, 1.5) == pytest.approx(math.log(keep**2 / flip + flip**2 / keep), abs=1e-13)
    assert eps_rr(2, 1.5) == pytest.approx(1.30963, abs=1e-5)
    for lam in (2, 5, 7):
        assert eps_rr(lam, 1.5) <= 1.5


def test_div_shuffled_rr_lambda_two():
    e = math.exp(1.5)
    assert div_shuffled_rr(2, 1.5, 10) == pytest.approx(math.log(1 + (e - 1) ** 2 / (10 * e)), abs=1e-14)
    assert div_shuffled_rr(2, 1.5, 10) == pytest.approx(0.239397, abs=1e-6)
    assert div_shuffled_rr(2, 1.5, 10) < 0.4 * eps_rr(2, 1.5)


@pytest.mark.parametrize("lam", [2, 3, 5, 7])
def test_div_shuffled_rr_matches_exact_count_distribution(lam):
    # count of ones on (1, 0, ..., 0) vs (0, ..., 0), summed over z = 0..m
    m, e0 = 10, 1.5
    flip = 1 / (math.exp(e0) + 1)
    z = np.arange(m + 1)
    q = stats.binom.pmf(z, m, flip)
    p = (1 - flip) * stats.binom.pmf(z - 1, m - 1, flip) + flip * stats.binom.pmf(z, m - 1, flip)
    exact = math.log(np.sum(p**lam * q ** (1 - lam))) / (lam - 1)
    assert div_shuffled_rr(lam, e0, m) == pytest.approx(exact, abs=1e-12)


def test_binomial_first_central_moment_vanishes():
    assert abs(binomial_central_moment(10, 0.182, 1)) < 1e-14
    assert binomial_central_moment(10, 0.3, 2) == pytest.approx(10 * 0.3 * 0.7, abs=1e-13)


def test_div_shuffled_rr_decreases_in_m():
    values = [div_shuffled_rr(2, 1.5, m) for m in (5, 10, 50, 100)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_div_ngd_values():
    assert div_ngd(2, 1, 10, 0.2, 10) == pytest.approx(
        2 / 400 * 1.8 / (1 + 0.1073741824) * (1 - 0.1073741824), abs=1e-15)
    assert div_ngd(2, 1, 10, 0.2, 10) == pytest.approx(0.0072547, abs=1e-7)
    assert div_ngd(2, 1, 10, 0.2, 10_000) == pytest.approx(2 * 1.8 / 400, abs=1e-10)
    assert div_ngd(3, 2, 10, 0.3, 1) == pytest.approx(3 * 0.3 / (4 * 4 * 100), abs=1e-15)


def test_div_ngd_matches_gaussian_recursion():
    # final iterate is N(mean, var) with means differing by (1 - (1-eta)^K) / m
    lam, b, m, eta, k = 3.0, 1.0, 10, 0.2, 10
    shift = (1 - (1 - eta) ** k) / m
    var = 2 * eta * b**2 * sum((1 - eta) ** (2 * j) for j in range(k))
    assert div_ngd(lam, b, m, eta, k) == pytest.approx(lam * shift**2 / (2 * var), rel=1e-12)


@pytest.mark.parametrize("fn", [partial(eps_gaussian, b=5), partial(eps_laplace, b=5)])
def test_monotone_in_order(fn):
    values = [fn(lam) for lam in LAMS]
    assert all(a <= b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("bad", [0.5, 1.0])
def test_order_must_exceed_one(bad):
    with pytest.raises(ValueError):
        eps_gaussian(bad, 5)
