import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvcheb.chebyshev import mahalanobis_sq, make_whitener
from mvcheb.errors import InvalidInput, SingularBlock
from mvcheb.linalg import jacobi_eigendecompose
from mvcheb.moments import fit_moments, from_moments, schur_conditional

SQUARE = [(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (2.0, 2.0)]


def test_fit_square_population():
    m = fit_moments(SQUARE)
    assert np.array_equal(m.mean, [1.0, 1.0])
    assert np.array_equal(m.cov, np.eye(2))
    assert m.rank == 2
    assert m.divisor == "population"


def test_fit_square_sample_divisor():
    m = fit_moments(SQUARE, divisor="sample")
    assert np.allclose(m.cov, 4.0 / 3.0 * np.eye(2), rtol=0, atol=1e-15)


def test_point_mass_has_rank_zero():
    p = [3.5, -1.0, 2.0]
    m = fit_moments([p] * 7)
    assert np.array_equal(m.mean, p)
    assert np.array_equal(m.cov, np.zeros((3, 3)))
    assert m.rank == 0


def test_single_row_sample_divisor_rejected():
    with pytest.raises(InvalidInput):
        fit_moments([[1.0, 2.0]], divisor="sample")
    assert fit_moments([[1.0, 2.0]]).rank == 0


@pytest.mark.parametrize("bad", [[[1.0, np.nan]], [[np.inf, 0.0]], np.zeros((0, 2))])
def test_non_finite_rejected(bad):
    with pytest.raises(InvalidInput):
        fit_moments(bad)


def test_unknown_divisor():
    with pytest.raises(InvalidInput):
        fit_moments(SQUARE, divisor="bessel")


def test_two_pass_far_from_origin():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(1000, 2))
    shifted = fit_moments(x + 1e9)
    base = fit_moments(x)
    assert np.allclose(shifted.cov, base.cov, atol=1e-5)


def test_not_psd_rejected():
    with pytest.raises(InvalidInput):
        from_moments([0, 0], [[1.0, 2.0], [2.0, 1.0]])


def test_tiny_negative_eigenvalues_clamped():
    v = np.array([[1.0, 1.0], [1.0, 1.0]])
    m = from_moments([0, 0], v)
    assert np.all(m.spectral.eigenvalues >= 0.0)
    assert m.rank == 1


def test_permutation_invariant(rng):
    x = rng.normal(size=(200, 4))
    a = fit_moments(x)
    b = fit_moments(x[rng.permutation(200)])
    assert np.allclose(a.mean, b.mean, atol=1e-14)
    assert np.allclose(a.cov, b.cov, atol=1e-14)


def test_trace_identity(rng):
    x = rng.normal(size=(300, 6)) @ rng.normal(size=(6, 6)) + 5.0
    m = fit_moments(x)
    z = mahalanobis_sq(make_whitener(m), x)
    assert abs(z.mean() - 6) <= 1e-8


class TestSchur:
    def test_identity_cov_is_unconditioned(self):
        m = from_moments([1.0, 2.0, 3.0, 4.0], np.eye(4))
        c = schur_conditional(m, 2, [10.0, -7.0])
        assert np.array_equal(c.mu_cond, [3.0, 4.0])
        assert np.array_equal(c.cov_cond, np.eye(2))
        assert c.observed_dim == 2

    def test_bivariate_hand_values(self):
        # mu2 + rho (x - mu1) = 0.5 * 2,  1 - rho^2 = 0.75
        m = from_moments([0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]])
        c = schur_conditional(m, 1, [2.0])
        assert c.mu_cond == pytest.approx([1.0], abs=1e-15)
        assert c.cov_cond[0, 0] == pytest.approx(0.75, abs=1e-15)

    def test_zero_variance_block(self):
        m = from_moments([0.0, 0.0], [[0.0, 0.0], [0.0, 1.0]])
        with pytest.raises(SingularBlock):
            schur_conditional(m, 1, [0.0])

    @pytest.mark.parametrize("k", [0, 3, 1.0])
    def test_k_out_of_range(self, k):
        m = from_moments([0.0, 0.0, 0.0], np.eye(3))
        with pytest.raises(InvalidInput):
            schur_conditional(m, k, [0.0])

    def test_x_obs_length(self):
        m = from_moments([0.0, 0.0, 0.0], np.eye(3))
        with pytest.raises(InvalidInput):
            schur_conditional(m, 1, [0.0, 1.0])

    def test_block_diagonal_returns_lower_block(self):
        lower = np.array([[2.0, 0.3], [0.3, 1.0]])
        v = np.zeros((4, 4))
        v[:2, :2] = [[1.0, 0.2], [0.2, 3.0]]
        v[2:, 2:] = lower
        m = from_moments([0, 0, 5, 6], v)
        c = schur_conditional(m, 2, [9.0, 9.0])
        assert np.array_equal(c.cov_cond, lower)
        assert np.array_equal(c.mu_cond, [5.0, 6.0])

    def test_cov_independent_of_x(self, rng):
        a = rng.normal(size=(5, 5))
        m = from_moments(np.zeros(5), a @ a.T + np.eye(5))
        c1 = schur_conditional(m, 2, [0.0, 0.0])
        c2 = schur_conditional(m, 2, [4.0, -9.0])
        assert np.array_equal(c1.cov_cond, c2.cov_cond)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 7), st.data())
    def test_schur_of_pd_is_pd(self, n, data):
        seed = data.draw(st.integers(0, 2**32 - 1))
        k = data.draw(st.integers(1, n - 1))
        a = np.random.default_rng(seed).normal(size=(n, n))
        v = a @ a.T + 0.1 * np.eye(n)
        c = schur_conditional(from_moments(np.zeros(n), v), k, np.zeros(k))
        assert jacobi_eigendecompose(c.cov_cond).eigenvalues[-1] > 0.0
