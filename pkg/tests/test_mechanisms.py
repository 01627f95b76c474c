import math

import numpy as np
import pytest

from rdp_audit.mechanisms import (
    AdjacentPair,
    Database,
    Gaussian,
    Laplace,
    NoisyGradientDescent,
    RandomizedResponse,
    SampleSet,
    ShuffledRandomizedResponse,
    SubsampledGaussian,
    SubsampledLaplace,
    build_mechanism,
    default_adjacent_pair,
    sample,
)


def rng(seed=0):
    return np.random.default_rng(seed)


@pytest.mark.parametrize("m", [1, 2, 10])
def test_default_adjacent_pair(m):
    pair = default_adjacent_pair(m)
    assert pair.left.entries == (1.0,) + (0.0,) * (m - 1)
    assert pair.right.entries == (0.0,) * m


def test_default_adjacent_pair_rejects_zero():
    with pytest.raises(ValueError):
        default_adjacent_pair(0)


def test_database_invariants():
    with pytest.raises(ValueError):
        Database(())
    with pytest.raises(ValueError):
        Database((0.5, 1.2))
    with pytest.raises(ValueError):
        AdjacentPair(Database((0.0, 0.0)), Database((1.0, 1.0)))
    with pytest.raises(ValueError):
        AdjacentPair(Database((0.0,)), Database((1.0, 0.0)))


@pytest.mark.parametrize("bad", [
    lambda: Laplace(0),
    lambda: Gaussian(-1),
    lambda: SubsampledLaplace(5, 1.0),
    lambda: SubsampledGaussian(5, 0.0),
    lambda: RandomizedResponse(-0.1),
    lambda: NoisyGradientDescent(1.0, 1, 10),
    lambda: NoisyGradientDescent(0.2, 1, 0),
])
def test_spec_ranges(bad):
    with pytest.raises(ValueError):
        bad()


def test_build_mechanism_defaults_and_overrides():
    assert build_mechanism("sub-gaussian") == SubsampledGaussian(5.0, 0.5)
    assert build_mechanism("ngd", b=2.0) == NoisyGradientDescent(0.2, 2.0, 10)
    with pytest.raises(ValueError):
        build_mechanism("exponential")


def test_sample_set_validation():
    with pytest.raises(ValueError):
        SampleSet("discrete", np.array([0, 3]), alphabet_size=3)
    with pytest.raises(ValueError):
        SampleSet("discrete", np.array([0.5]), alphabet_size=3)
    assert SampleSet("continuous", [1, 2]).n == 2


def test_sample_rejects_bad_arguments():
    pair = default_adjacent_pair(3)
    with pytest.raises(ValueError):
        sample(Gaussian(1), pair.left, 0, rng())
    with pytest.raises(ValueError):
        sample(RandomizedResponse(1.0), Database((0.5, 0.0)), 10, rng())


@pytest.mark.parametrize("spec", [
    Laplace(5), Gaussian(5), SubsampledLaplace(5, 0.5), SubsampledGaussian(5, 0.5),
    RandomizedResponse(1.5), ShuffledRandomizedResponse(1.5), NoisyGradientDescent(0.2, 1, 10),
])
def test_same_seed_same_samples(spec):
    db = default_adjacent_pair(10).left
    a = sample(spec, db, 1000, rng(3))
    b = sample(spec, db, 1000, rng(3))
    assert a.kind == spec.kind
    assert a.n == 1000
    np.testing.assert_array_equal(a.values, b.values)


def test_gaussian_mean():
    out = sample(Gaussian(5), default_adjacent_pair(10).left, 10**6, rng(1))
    assert abs(out.values.mean() - 1.0) < 0.02


def test_laplace_moments():
    out = sample(Laplace(5), default_adjacent_pair(10).left, 10**6, rng(2)).values
    # Lap(1, 5): mean 1, variance 2 b^2 = 50, median absolute deviation b ln 2
    assert abs(out.mean() - 1.0) < 4 * math.sqrt(50 / 1e6)
    assert out.var() == pytest.approx(50, rel=0.02)
    assert np.median(np.abs(out - 1)) == pytest.approx(5 * math.log(2), rel=0.01)


def test_rr_zero_epsilon_is_uniform():
    db = Database((1.0, 0.0, 1.0))
    atoms = sample(RandomizedResponse(0.0), db, 200_000, rng(4)).values
    bits = (atoms[:, None] >> np.arange(3)) & 1
    np.testing.assert_allclose(bits.mean(axis=0), 0.5, atol=0.005)


def test_rr_large_epsilon_keeps_bits():
    db = Database((1.0, 0.0, 1.0, 1.0))
    atoms = sample(RandomizedResponse(20.0), db, 10**5, rng(5)).values
    expected = 1 + 4 + 8
    assert np.mean(atoms != expected) < 1e-6


def test_rr_unchanged_atom_mass():
    keep = math.exp(1.5) / (1 + math.exp(1.5))
    atoms = sample(RandomizedResponse(1.5), default_adjacent_pair(10).left, 10**6, rng(6)).values
    assert np.mean(atoms == 1) == pytest.approx(keep**10, abs=0.003)


def test_shuffled_count_matches_rr_popcount():
    db = default_adjacent_pair(10).left
    n = 10**5
    counts = sample(ShuffledRandomizedResponse(1.5), db, n, rng(7)).values
    atoms = sample(RandomizedResponse(1.5), db, n, rng(8)).values
    popcount = ((atoms[:, None] >> np.arange(10)) & 1).sum(axis=1)
    h1 = np.bincount(counts, minlength=11) / n
    h2 = np.bincount(popcount, minlength=11) / n
    # symmetric chi-square distance between the two histograms
    mask = (h1 + h2) > 0
    chi2 = np.sum((h1[mask] - h2[mask]) ** 2 / (h1[mask] + h2[mask]))
    assert chi2 < 1e-3


@pytest.mark.parametrize("plain, sub", [
    (Gaussian(5), SubsampledGaussian(5, 1 - 1e-15)),
    (Laplace(5), SubsampledLaplace(5, 1 - 1e-15)),
])
def test_subsampling_with_gamma_one_is_plain(plain, sub):
    db = Database((1.0, 0.5, 0.0, 1.0))
    n = 10**5
    a = sample(plain, db, n, rng(9)).values
    b = sample(sub, db, n, rng(10)).values
    se = math.sqrt(a.var() / n + b.var() / n)
    assert abs(a.mean() - b.mean()) < 3 * se
    se_var = math.sqrt(2 / n) * a.var() * 3  # generous for heavy Laplace tails
    assert abs(a.var() - b.var()) < 3 * se_var


def test_subsampled_mean():
    out = sample(SubsampledGaussian(1, 0.3), Database((1.0, 1.0, 0.0)), 10**6, rng(11)).values
    assert out.mean() == pytest.approx(0.6, abs=0.005)


def test_ngd_variance_closed_form():
    out = sample(NoisyGradientDescent(0.2, 1.0, 10), Database((0.0,) * 10), 10**6, rng(12)).values
    expected = 0.4 * (1 - 0.8**20) / (1 - 0.8**2)
    assert expected == pytest.approx(1.0983, abs=1e-4)
    assert out.var() == pytest.approx(expected, rel=0.02)
    assert abs(out.mean()) < 0.005


def test_ngd_mean_shift():
    out = sample(NoisyGradientDescent(0.2, 1.0, 10), default_adjacent_pair(10).left, 10**6, rng(13))
    assert out.values.mean() == pytest.approx(0.1 * (1 - 0.8**10), abs=0.005)
