import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import gram_scatters, rel_err, sample_scatters
from sketchda import (
    ClassStatistics,
    ConfigurationError,
    FrequentDirections,
    StateError,
    StreamFormatError,
    approx_scatters,
    between_scatter,
)


def streamed(X, y, ell):
    stats = ClassStatistics(X.shape[1])
    fd = FrequentDirections(ell, X.shape[1])
    for x, label in zip(X, y):
        stats.observe(x, label)
        fd.update(x)
    return stats, fd


class TestObserve:
    def test_first_sample(self):
        x = np.array([0.5, -2.0, 4.0])
        stats = ClassStatistics(3).observe(x, 7)
        np.testing.assert_array_equal(stats.class_means[7], x)
        assert stats.class_counts[7] == 1
        np.testing.assert_array_equal(stats.population_mean, x)
        assert stats.population_count == 1

    def test_midpoint(self):
        stats = ClassStatistics(2).observe([0.0, 0.0], 1).observe([2.0, 2.0], 1)
        np.testing.assert_array_equal(stats.class_means[1], [1.0, 1.0])

    def test_population_mean_matches_batch(self):
        rng = np.random.default_rng(0)
        X = rng.normal(3.0, 2.0, size=(100, 6))
        stats = ClassStatistics(6)
        for x, label in zip(X, rng.integers(0, 4, size=100)):
            stats.observe(x, label)
        assert rel_err(stats.population_mean, X.mean(axis=0)) <= 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(StreamFormatError):
            ClassStatistics(3).observe([1.0, 2.0], 0)

    def test_bad_dim(self):
        with pytest.raises(ConfigurationError):
            ClassStatistics(0)

    def test_labels_need_not_be_contiguous(self):
        stats = ClassStatistics(1)
        for label in (905, -3, 12, 905):
            stats.observe([float(label)], label)
        assert stats.labels == [-3, 12, 905]
        assert stats.class_counts[905] == 2


class TestBetweenScatter:
    def test_single_class_is_zero(self):
        rng = np.random.default_rng(1)
        stats = ClassStatistics(3)
        for x in rng.standard_normal((10, 3)):
            stats.observe(x, 0)
        np.testing.assert_allclose(between_scatter(stats), 0.0, atol=1e-15)

    def test_two_symmetric_classes(self):
        # m0 = 0, each class has weight 1/2: 1/2 e1 e1^T + 1/2 e1 e1^T
        stats = ClassStatistics(2).observe([-1.0, 0.0], 0).observe([1.0, 0.0], 1)
        np.testing.assert_allclose(between_scatter(stats), np.diag([1.0, 0.0]), atol=1e-15)

    def test_random_three_classes(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((90, 5)) + rng.integers(0, 3, size=(90, 1)) * 2.0
        y = rng.integers(0, 3, size=90)
        stats, _ = streamed(X, y, 2)
        _, between, _ = gram_scatters(X, y)
        assert rel_err(between_scatter(stats), between) <= 1e-10

    def test_empty(self):
        with pytest.raises(StateError):
            between_scatter(ClassStatistics(2))


class TestApproxScatters:
    def test_lossless_sketch_recovers_within(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((200, 3)) @ rng.standard_normal((3, 9)) + 1.5
        y = rng.integers(0, 4, size=200)
        stats, fd = streamed(X, y, 4)  # rank(X) <= 4 with the mean offset
        b_plus, _ = fd.finalize()
        scat = approx_scatters(stats, b_plus)
        assert rel_err(scat.within_approx, sample_scatters(X, y)) <= 1e-8

    def test_decomposition_exact(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((60, 7))
        y = rng.integers(0, 5, size=60)
        stats, fd = streamed(X, y, 2)
        scat = approx_scatters(stats, fd.finalize()[0])
        np.testing.assert_array_equal(scat.within_approx + scat.between, scat.total_approx)
        for m in (scat.between, scat.total_approx, scat.within_approx):
            np.testing.assert_array_equal(m, m.T)

    def test_dimension_mismatch(self):
        stats = ClassStatistics(3).observe([1.0, 2.0, 3.0], 0)
        with pytest.raises(ConfigurationError):
            approx_scatters(stats, np.zeros((2, 4)))

    def test_empty(self):
        with pytest.raises(StateError):
            approx_scatters(ClassStatistics(2), np.zeros((1, 2)))


@st.composite
def labeled_streams(draw):
    d = draw(st.integers(1, 10))
    n = draw(st.integers(2, 120))
    c = draw(st.integers(1, 6))
    ell = draw(st.integers(1, 12))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    y = rng.integers(0, c, size=n) * 17 - 5
    X = rng.standard_normal((n, d)) * rng.uniform(0.1, 5.0, size=d) + rng.normal(0, 3, size=d)
    return X, y, ell


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(labeled_streams())
    def test_within_gap_bounds(self, case):
        X, y, ell = case
        stats, fd = streamed(X, y, ell)
        scat = approx_scatters(stats, fd.finalize()[0])
        exact = sample_scatters(X, y)
        gap = np.linalg.eigvalsh(exact - scat.within_approx)
        norm = np.linalg.norm(exact, 2)
        assert gap.min() >= -1e-9 * max(norm, 1.0)
        assert np.max(np.abs(gap)) <= 2 * np.sum(X**2) / (len(X) * ell) + 1e-9 * max(norm, 1.0)

    @settings(max_examples=50, deadline=None)
    @given(labeled_streams(), st.randoms(use_true_random=False))
    def test_means_are_order_invariant(self, case, rnd):
        X, y, _ = case
        perm = list(range(len(X)))
        rnd.shuffle(perm)
        a = ClassStatistics(X.shape[1])
        b = ClassStatistics(X.shape[1])
        for i in range(len(X)):
            a.observe(X[i], y[i])
            b.observe(X[perm[i]], y[perm[i]])
        assert a.class_counts == b.class_counts
        for c in a.labels:
            batch = X[y == c].mean(axis=0)
            assert rel_err(a.class_means[c], batch) <= 1e-12
            assert rel_err(b.class_means[c], batch) <= 1e-12
