"""
Tests for the splittable random streams.
"""

import numpy as np
import pytest
from scipy.stats import chi2

from src.models.errors import InvalidArgumentError
from src.models.rng import RngStream, categorical_from_uniforms, replica_streams


def test_same_identity_gives_same_normal():
    assert RngStream(7, (1, 2)).standard_normal() == RngStream(7, (1, 2)).standard_normal()


def test_counter_addresses_blocks():
    stream = RngStream(3)
    stream.standard_normal()
    second = stream.standard_normal()
    assert stream.counter == 2
    assert RngStream(3).at(1).standard_normal() == second


def test_normal_moments():
    draws = RngStream(11).normals(10 ** 6)
    assert abs(draws.mean()) < 0.01
    assert abs(draws.var() - 1.0) < 0.02


def test_split_streams_are_uncorrelated():
    root = RngStream(5)
    a = root.split(0).normals(10 ** 5)
    b = root.split(1).normals(10 ** 5)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_split_streams_differ_from_parent():
    root = RngStream(5)
    assert root.split(0).standard_normal() != root.standard_normal()
    assert root.split(0).path == (0,)


def test_chunked_draws_match_single_steps():
    chunk_u, chunk_n = RngStream(9, (4,)).draw_steps(10, 3, 5)
    single = RngStream(9, (4,))
    for t in range(10):
        u, n = single.draw_steps(1, 3, 5)
        np.testing.assert_array_equal(u[0], chunk_u[t])
        np.testing.assert_array_equal(n[0], chunk_n[t])


def test_uniforms_lie_strictly_inside_unit_interval():
    u = RngStream(1).uniforms(10 ** 5)
    assert u.min() > 0.0 and u.max() < 1.0


def test_dirichlet_length_one():
    np.testing.assert_array_equal(RngStream(0).sample_dirichlet([3.5]), [1.0])


def test_dirichlet_normalized():
    stream = RngStream(2)
    for _ in range(20):
        sample = stream.sample_dirichlet(np.ones(3))
        assert sample.shape == (3,)
        assert np.all(sample >= 0)
        assert abs(sample.sum() - 1.0) < 1e-12


def test_dirichlet_concentrated():
    stream = RngStream(4)
    hits = sum(stream.sample_dirichlet([1000.0, 1.0])[0] > 0.99 for _ in range(200))
    assert hits >= 198


def test_dirichlet_advances_one_block():
    stream = RngStream(4)
    stream.sample_dirichlet(np.ones(5))
    assert stream.counter == 1


@pytest.mark.parametrize("concentration", [[1.0, 0.0], [-1.0, 2.0], []])
def test_dirichlet_rejects_bad_concentration(concentration):
    with pytest.raises(InvalidArgumentError):
        RngStream(0).sample_dirichlet(concentration)


def test_categorical_degenerate():
    stream = RngStream(6)
    assert all(stream.sample_categorical([0.0, 1.0, 0.0]) == 1 for _ in range(1000))


def test_categorical_fair_coin():
    stream = RngStream(8)
    draws = np.array([stream.sample_categorical([0.5, 0.5]) for _ in range(10 ** 5)])
    assert abs(np.mean(draws == 0) - 0.5) < 0.01


def test_categorical_goodness_of_fit():
    probs = np.array([0.2, 0.3, 0.5])
    stream = RngStream(10)
    draws = np.array([stream.sample_categorical(probs) for _ in range(10 ** 5)])
    observed = np.bincount(draws, minlength=3)
    expected = probs * draws.size
    statistic = np.sum((observed - expected) ** 2 / expected)
    assert statistic < chi2.ppf(0.999, df=2)


@pytest.mark.parametrize("probs", [[0.5, 0.6], [1.5, -0.5], [np.nan, 1.0], []])
def test_categorical_rejects_malformed(probs):
    with pytest.raises(InvalidArgumentError):
        RngStream(0).sample_categorical(probs)


def test_categorical_from_uniforms_vectorized():
    cdf = np.cumsum([[0.25, 0.75], [1.0, 0.0]], axis=1)
    index = categorical_from_uniforms(cdf, np.array([[0.1, 0.9], [0.3, 0.99]]))
    np.testing.assert_array_equal(index, [[0, 0], [1, 0]])


def test_categorical_never_returns_massless_category():
    cdf = np.cumsum([0.5, 0.5 - 1e-12, 0.0])
    uniforms = np.array([0.25, 0.75, 1.0 - 2.0 ** -53])
    np.testing.assert_array_equal(categorical_from_uniforms(cdf, uniforms), [0, 1, 1])


def test_replica_streams_paths():
    streams = replica_streams(RngStream(5), 2, [0, 3])
    assert [s.path for s in streams] == [(2, 0), (2, 3)]


@pytest.mark.parametrize("seed", [-1, 2 ** 64])
def test_seed_range(seed):
    with pytest.raises(InvalidArgumentError):
        RngStream(seed)
