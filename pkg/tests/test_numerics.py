import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dsdlab.errors import (
    DimensionError,
    NotHermitianError,
    RankDeficientError,
    SingularMatrixError,
)
from dsdlab.numerics import (
    hermitian_eigenvalues,
    left_null_space_basis,
    qr_row_basis,
    regularized_pseudo_inverse,
)


def random_complex(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)


class TestQrRowBasis:
    def test_row_orthogonal_input(self):
        m = np.array([[2.0, 0, 0], [0, 3.0, 0]], dtype=complex)
        r, q = qr_row_basis(m)
        # up to unit-modulus row phases: magnitudes are pinned
        assert_allclose(np.abs(np.diag(r)), [2.0, 3.0], atol=1e-12)
        assert_allclose(np.abs(q), [[1, 0, 0], [0, 1, 0]], atol=1e-12)
        assert_allclose(r @ q, m, atol=1e-12)

    def test_identity(self):
        m = np.eye(3, dtype=complex)
        r, q = qr_row_basis(m)
        assert_allclose(np.abs(q), np.eye(3), atol=1e-12)
        assert_allclose(np.abs(np.diag(r)), np.ones(3), atol=1e-12)
        assert_allclose(r @ q, m, atol=1e-12)

    def test_reconstruction_and_orthonormality(self, rng):
        for _ in range(20):
            m = random_complex(rng, (4, 8))
            r, q = qr_row_basis(m)
            assert r.shape == (4, 4) and q.shape == (4, 8)
            assert np.linalg.norm(r @ q - m) <= 1e-10 * np.linalg.norm(m)
            assert np.linalg.norm(q @ q.conj().T - np.eye(4)) <= 1e-10

    def test_r_is_lower_triangular(self, rng):
        r, _ = qr_row_basis(random_complex(rng, (4, 6)))
        assert_allclose(r, np.tril(r), atol=1e-12)

    def test_row_space_is_preserved(self, rng):
        m = random_complex(rng, (3, 7))
        _, q = qr_row_basis(m)
        # every row of m lies in span(rows of q)
        proj = m @ q.conj().T @ q
        assert_allclose(proj, m, atol=1e-10)

    def test_rank_deficient_raises(self):
        m = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]], dtype=complex)
        with pytest.raises(RankDeficientError):
            qr_row_basis(m)

    def test_tall_input_raises(self):
        with pytest.raises(DimensionError):
            qr_row_basis(np.ones((3, 2), dtype=complex))


class TestRegularizedPseudoInverse:
    def test_identity_zero_reg(self):
        assert_allclose(regularized_pseudo_inverse(np.eye(2), 0.0), np.eye(2), atol=1e-14)

    def test_identity_unit_reg(self):
        # H^H (H H^H + I)^{-1} = (2 I)^{-1}
        assert_allclose(regularized_pseudo_inverse(np.eye(2), 1.0), 0.5 * np.eye(2), atol=1e-14)

    def test_left_inverse(self, rng):
        for _ in range(10):
            h = random_complex(rng, (8, 4))
            pinv = regularized_pseudo_inverse(h, 0.0)
            assert np.linalg.norm(pinv @ h - np.eye(4)) <= 1e-10

    def test_matches_receive_side_form(self, rng):
        # push-through identity: both evaluation orders agree
        h = random_complex(rng, (6, 3))
        sigma2 = 0.37
        direct = h.conj().T @ np.linalg.inv(h @ h.conj().T + sigma2 * np.eye(6))
        assert_allclose(regularized_pseudo_inverse(h, sigma2), direct, atol=1e-12)

    def test_convergence_to_left_inverse(self, rng):
        h = random_complex(rng, (8, 4))
        errs = [
            np.linalg.norm(regularized_pseudo_inverse(h, s) @ h - np.eye(4))
            for s in (1.0, 0.1, 0.01, 0.0)
        ]
        assert all(a >= b for a, b in zip(errs, errs[1:]))
        assert errs[-1] <= 1e-10

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError):
            regularized_pseudo_inverse(np.zeros((4, 2), dtype=complex), 0.0)

    def test_wide_input_raises(self):
        with pytest.raises(DimensionError):
            regularized_pseudo_inverse(np.ones((2, 4), dtype=complex), 0.1)


def _charpoly_roots(a):
    """Eigenvalue oracle: roots of det(A - x I) with the determinant expanded
    brute-force over permutations (n <= 4 only)."""
    n = a.shape[0]

    def det(m):
        total = 0.0 + 0j
        for perm in itertools.permutations(range(n)):
            inversions = sum(
                1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j]
            )
            term = (-1.0) ** inversions
            for i in range(n):
                term = term * m[i, perm[i]]
            total += term
        return total

    xs = np.linspace(-1.0, 1.0, n + 1) * (np.abs(a).sum() + 1.0)
    ys = [det(a - x * np.eye(n)) for x in xs]
    coeffs = np.polyfit(xs, ys, n)
    return np.sort(np.roots(coeffs).real)[::-1]


class TestHermitianEigenvalues:
    def test_diagonal(self):
        assert_allclose(hermitian_eigenvalues(np.diag([3.0, 1.0, 2.0])), [3, 2, 1], atol=1e-14)

    def test_identity(self):
        assert_allclose(hermitian_eigenvalues(np.eye(4)), np.ones(4), atol=1e-14)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_against_charpoly_oracle(self, rng, n):
        b = random_complex(rng, (n + 2, n))
        a = b.conj().T @ b
        vals = hermitian_eigenvalues(a)
        oracle = _charpoly_roots(a)
        scale = max(1.0, np.max(np.abs(oracle)))
        assert_allclose(vals, oracle, atol=1e-8 * scale)

    def test_psd_values_nonnegative(self, rng):
        b = random_complex(rng, (5, 5))
        vals = hermitian_eigenvalues(b.conj().T @ b)
        assert np.all(vals >= -1e-10 * np.linalg.norm(b) ** 2)

    def test_sum_equals_trace(self, rng):
        b = random_complex(rng, (6, 6))
        a = b.conj().T @ b
        trace = np.trace(a).real
        assert abs(hermitian_eigenvalues(a).sum() - trace) <= 1e-8 * abs(trace)

    def test_not_hermitian_raises(self):
        with pytest.raises(NotHermitianError):
            hermitian_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_non_square_raises(self):
        with pytest.raises(DimensionError):
            hermitian_eigenvalues(np.ones((2, 3)))


class TestLeftNullSpaceBasis:
    def test_axis_vector(self):
        m = np.array([[1.0], [0.0], [0.0]], dtype=complex)
        basis = left_null_space_basis(m)
        assert basis.shape == (2, 3)
        assert_allclose(basis @ m, 0, atol=1e-12)
        assert_allclose(basis @ basis.conj().T, np.eye(2), atol=1e-12)

    def test_zero_matrix_gives_full_unitary(self):
        basis = left_null_space_basis(np.zeros((3, 1), dtype=complex))
        assert basis.shape == (3, 3)
        assert_allclose(basis @ basis.conj().T, np.eye(3), atol=1e-12)

    def test_random_full_rank(self, rng):
        for _ in range(10):
            m = random_complex(rng, (6, 3))
            basis = left_null_space_basis(m)
            assert basis.shape == (3, 6)
            assert np.linalg.norm(basis @ m) <= 1e-10 * np.linalg.norm(m)
            assert np.linalg.norm(basis @ basis.conj().T - np.eye(3)) <= 1e-10

    def test_wide_raises(self):
        with pytest.raises(DimensionError):
            left_null_space_basis(np.ones((3, 3), dtype=complex))
