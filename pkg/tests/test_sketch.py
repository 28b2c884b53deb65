import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchda import ConfigurationError, FrequentDirections, NumericalError, StateError, StreamFormatError


def dense_gap(X, sketch):
    """Eigenvalues of X^T X - B^T B by dense eigensolve."""
    return np.linalg.eigvalsh(X.T @ X - sketch.gram())


class TestConstruction:
    def test_small(self):
        fd = FrequentDirections(1, 2)
        assert fd.buffer.shape == (2, 2)
        assert not fd.buffer.any()
        assert fd.fill_count == 0
        assert fd.frobenius_accum == 0.0

    def test_buffer_has_twice_sketch_rows(self):
        assert FrequentDirections(3, 5).buffer.shape == (6, 5)

    @pytest.mark.parametrize("ell,d", [(0, 5), (3, 0), (-1, 2), (2.5, 3)])
    def test_rejects_bad_sizes(self, ell, d):
        with pytest.raises(ConfigurationError):
            FrequentDirections(ell, d)


class TestUpdate:
    def test_first_row_is_verbatim(self):
        fd = FrequentDirections(2, 3).update([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(fd.buffer[0], [1.0, 2.0, 3.0])
        assert fd.fill_count == 1
        assert fd.n_shrinks == 0
        assert fd.frobenius_accum == 14.0

    def test_identity_rows_shrink_to_zero(self):
        # SVD of I_2: singular values (1, 1), so xi = 1 and both shrink to 0
        fd = FrequentDirections(1, 2).update([1.0, 0.0]).update([0.0, 1.0])
        assert fd.n_shrinks == 1
        assert fd.fill_count == 0
        np.testing.assert_array_equal(fd.buffer, np.zeros((2, 2)))
        assert fd.shrink_mass == pytest.approx(1.0)

    def test_random_stream_within_bound(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((20, 5))
        fd = FrequentDirections(2, 5).extend(X)
        gap = dense_gap(X, fd)
        assert np.max(np.abs(gap)) <= 2 * np.sum(X**2) / 2
        assert gap.min() >= -1e-9 * np.linalg.norm(X.T @ X, 2)

    def test_dimension_mismatch(self):
        fd = FrequentDirections(2, 3)
        with pytest.raises(StreamFormatError):
            fd.update([1.0, 2.0])
        assert fd.n_rows == 0

    def test_non_finite_reports_row_range(self):
        fd = FrequentDirections(2, 2)
        fd.extend(np.ones((4, 2)))
        # rank-1 rows leave one row after the first shrink; the buffer fills again at row 6
        fd.update([1.0, 2.0]).update([0.0, 3.0])
        with pytest.raises(NumericalError, match=r"rows 4\.\.6"):
            fd.update([np.nan, 1.0])


class TestShrink:
    def test_low_rank_buffer_is_preserved(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 5))
        fd = FrequentDirections(3, 5)
        for row in X[:5]:
            fd.update(row)
        before = fd.gram()
        fd.update(X[5])  # fills the buffer, rank 2 <= l = 3 so xi = 0
        assert fd.n_shrinks == 1
        np.testing.assert_allclose(fd.gram(), before + np.outer(X[5], X[5]), atol=1e-10)

    def test_shrink_is_psd_decrease(self):
        rng = np.random.default_rng(1)
        fd = FrequentDirections(2, 4)
        fd.buffer[:] = rng.standard_normal((4, 4)) * [3.0, 2.0, 1.0, 0.5]
        fd.buffer[:] = np.vstack([fd.buffer, rng.standard_normal((4, 4))])[:4]
        fd.fill_count = 4
        before = fd.gram()
        fd.shrink()
        decrease = np.linalg.eigvalsh(before - fd.gram())
        assert decrease.min() >= -1e-10 * np.linalg.norm(before, 2)

    def test_random_full_buffer(self):
        rng = np.random.default_rng(2)
        fd = FrequentDirections(4, 4)
        fd.extend(rng.standard_normal((7, 4)))
        X = rng.standard_normal((8, 4))
        fd = FrequentDirections(2, 4)
        for row in X[:3]:
            fd.update(row)
        before = X[:4].T @ X[:4]
        fd.update(X[3])
        assert fd.n_shrinks == 1
        assert np.linalg.eigvalsh(before - fd.gram()).min() >= -1e-10 * np.linalg.norm(before, 2)
        # every eigenvalue of B^T B decreases as well
        assert np.all(np.linalg.eigvalsh(fd.gram()) <= np.linalg.eigvalsh(before) + 1e-10)
        assert np.count_nonzero(np.linalg.norm(fd.buffer, axis=1)) <= 2

    def test_basis_sign_convention(self):
        rng = np.random.default_rng(4)
        fd = FrequentDirections(3, 6).extend(rng.standard_normal((6, 6)))
        vt = fd.last_basis
        pivots = vt[np.arange(len(vt)), np.argmax(np.abs(vt), axis=1)]
        assert np.all(pivots > 0)


class TestFinalize:
    def test_single_row(self):
        x = np.array([3.0, -4.0, 0.0])
        b_plus, basis = FrequentDirections(2, 3).update(x).finalize()
        assert b_plus.shape == (2, 3)
        np.testing.assert_allclose(np.abs(b_plus[0]), np.abs(x), atol=1e-12)
        np.testing.assert_allclose(abs(basis[:, 0] @ x) / np.linalg.norm(x), 1.0, atol=1e-12)

    @pytest.mark.parametrize("rank,ell", [(2, 2), (3, 5), (1, 4)])
    def test_lossless_when_rank_fits(self, rank, ell):
        rng = np.random.default_rng(rank * 10 + ell)
        X = rng.standard_normal((57, rank)) @ rng.standard_normal((rank, 8))
        fd = FrequentDirections(ell, 8).extend(X)
        b_plus, _ = fd.finalize()
        gram = X.T @ X
        err = np.linalg.norm(b_plus.T @ b_plus - gram) / np.linalg.norm(gram)
        assert err <= 1e-8

    @pytest.mark.parametrize("k", [None, 1, 3])
    def test_basis_orthonormal(self, k):
        rng = np.random.default_rng(5)
        fd = FrequentDirections(3, 7).extend(rng.standard_normal((40, 7)))
        _, basis = fd.finalize(k)
        kk = 3 if k is None else k
        assert basis.shape == (7, kk)
        np.testing.assert_allclose(basis.T @ basis, np.eye(kk), atol=1e-10)

    def test_basis_spans_sketch(self):
        rng = np.random.default_rng(6)
        fd = FrequentDirections(3, 10).extend(rng.standard_normal((31, 10)))
        b_plus, basis = fd.finalize()
        np.testing.assert_allclose(b_plus @ basis @ basis.T, b_plus, atol=1e-10)

    def test_empty_stream(self):
        with pytest.raises(StateError):
            FrequentDirections(2, 3).finalize()

    def test_reduced_dim_range(self):
        fd = FrequentDirections(2, 3).update([1.0, 0.0, 0.0])
        with pytest.raises(ConfigurationError):
            fd.finalize(3)
        with pytest.raises(ConfigurationError):
            fd.finalize(0)

    def test_default_reduced_dim_capped_by_dim(self):
        fd = FrequentDirections(6, 4).extend(np.eye(4))
        _, basis = fd.finalize()
        assert basis.shape == (4, 4)

    def test_stream_can_continue_after_finalize(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((30, 5))
        fd = FrequentDirections(2, 5).extend(X[:15])
        fd.finalize()
        fd.extend(X[15:])
        b_plus, _ = fd.finalize()
        gap = np.linalg.eigvalsh(X.T @ X - b_plus.T @ b_plus)
        assert gap.min() >= -1e-9 * np.linalg.norm(X.T @ X, 2)
        assert gap.max() <= fd.shrink_mass + 1e-9


@st.composite
def streams(draw):
    d = draw(st.integers(1, 8))
    ell = draw(st.integers(1, 6))
    n = draw(st.integers(1, 40))
    seed = draw(st.integers(0, 2**32 - 1))
    scale = draw(st.sampled_from([1e-3, 1.0, 1e3]))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) * scale * rng.uniform(0.1, 3.0, size=d)
    return ell, X


class TestInvariants:
    @settings(max_examples=60, deadline=None)
    @given(streams())
    def test_every_prefix(self, case):
        ell, X = case
        fd = FrequentDirections(ell, X.shape[1])
        for i, row in enumerate(X, start=1):
            fd.update(row)
            prefix = X[:i]
            gram = prefix.T @ prefix
            gap = np.linalg.eigvalsh(gram - fd.gram())
            scale = np.linalg.norm(gram, 2)
            assert gap.min() >= -1e-9 * scale
            assert gap.max() <= 2 * np.sum(prefix**2) / ell + 1e-9 * max(1.0, scale)
            # the accumulated shrinkage bounds the gap as well
            assert gap.max() <= fd.shrink_mass + 1e-9 * max(1.0, scale)
            assert not fd.buffer[fd.fill_count :].any()
            assert fd.frobenius_accum == pytest.approx(np.sum(prefix**2))

    @settings(max_examples=60, deadline=None)
    @given(streams())
    def test_shrink_never_raises_an_eigenvalue(self, case):
        ell, X = case
        fd = FrequentDirections(ell, X.shape[1])
        for row in X:
            fd.buffer[fd.fill_count] = row
            fd.fill_count += 1
            if fd.fill_count == fd.buffer.shape[0]:
                before = np.linalg.eigvalsh(fd.gram())
                fd.shrink()
                after = np.linalg.eigvalsh(fd.gram())
                tol = 1e-9 * max(1.0, before[-1])
                assert np.all(after <= before + tol)
                assert fd.fill_count <= ell
