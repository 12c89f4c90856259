import math

import numpy as np
import pytest

from matnorm.errors import DimensionCap, NotPositiveDefinite, ShapeMismatch
from matnorm.linalg import (
    SpdMatrix,
    SymMatrix,
    cholesky,
    frobenius_norm,
    kron,
    log_det,
    max_abs_entry_diff,
    spectral_norm,
    sym_eigen,
)
from matnorm.rng import standard_normal_stream


def random_symmetric(dim, seed):
    flat = standard_normal_stream(seed).draw(dim * dim).reshape(dim, dim)
    return 0.5 * (flat + flat.T)


def random_spd(dim, seed):
    flat = standard_normal_stream(seed).draw(dim * dim).reshape(dim, dim)
    return flat @ flat.T / dim + np.eye(dim)


def power_iteration_sq_norm(a, tol=1e-10, max_iter=10_000):
    """Spectral norm via power iteration on a @ a (independent check path)."""
    a = np.asarray(a, float)
    b = a @ a
    v = standard_normal_stream(12345).draw(a.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = b @ v
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        lam_new = float(v @ (b @ v))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return math.sqrt(lam_new)
        lam = lam_new
    return math.sqrt(lam)


class TestMatrixTypes:
    def test_symmetrizes_small_asymmetry(self):
        base = np.array([[1.0, 0.5], [0.5 + 1e-14, 2.0]])
        sym = SymMatrix(base)
        assert np.array_equal(sym.values, sym.values.T)

    def test_rejects_large_asymmetry(self):
        with pytest.raises(ValueError, match="not symmetric"):
            SymMatrix(np.array([[1.0, 0.5], [0.6, 2.0]]))

    def test_rejects_nonsquare_and_nonfinite(self):
        with pytest.raises(ShapeMismatch):
            SymMatrix(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            SymMatrix(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_values_are_read_only(self):
        sym = SymMatrix(np.eye(3))
        with pytest.raises(ValueError):
            sym.values[0, 0] = 2.0

    def test_spd_requires_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            SpdMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
        spd = SpdMatrix(random_spd(5, 3))
        assert np.allclose(spd.chol @ spd.chol.T, spd.values)


class TestCholesky:
    def test_identity(self):
        assert np.array_equal(cholesky(np.eye(3)), np.eye(3))

    def test_2x2_closed_form(self):
        factor = cholesky(np.array([[4.0, 2.0], [2.0, 5.0]]))
        assert np.allclose(factor, [[2.0, 0.0], [1.0, 2.0]], atol=1e-14)

    def test_reconstruction(self):
        a = random_spd(6, 7)
        factor = cholesky(a)
        rel = frobenius_norm(factor @ factor.T - a) / frobenius_norm(a)
        assert rel <= 1e-10

    def test_round_trip_many(self):
        for seed in range(20):
            dim = 2 + seed % 7
            a = random_spd(dim, 100 + seed)
            factor = cholesky(a)
            assert frobenius_norm(factor @ factor.T - a) <= 1e-10 * frobenius_norm(a)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.array([[0.0, 0.0], [0.0, 1.0]]))


class TestLogDet:
    def test_identity(self):
        assert log_det(np.eye(4)) == pytest.approx(0.0, abs=1e-15)

    def test_diagonal(self):
        assert log_det(np.diag([2.0, 8.0])) == pytest.approx(math.log(16.0), rel=1e-12)

    def test_2x2_by_hand(self):
        # det [[4,2],[2,5]] = 16
        assert log_det(np.array([[4.0, 2.0], [2.0, 5.0]])) == pytest.approx(
            math.log(16.0), rel=1e-12
        )

    def test_cross_check_against_eigenvalues(self):
        for seed in range(10):
            a = random_spd(3 + seed % 5, 200 + seed)
            eigenvalues, _ = sym_eigen(a)
            expected = float(np.sum(np.log(eigenvalues)))
            assert log_det(a) == pytest.approx(expected, rel=1e-9)


class TestSymEigen:
    def test_diagonal_sorted_ascending(self):
        eigenvalues, _ = sym_eigen(np.diag([3.0, 1.0, 2.0]))
        assert np.allclose(eigenvalues, [1.0, 2.0, 3.0])

    def test_2x2_closed_form(self):
        eigenvalues, _ = sym_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(eigenvalues, [1.0, 3.0])

    def test_residual_and_orthogonality(self):
        a = random_symmetric(8, 42)
        eigenvalues, vectors = sym_eigen(a)
        scale = frobenius_norm(a)
        assert frobenius_norm(a @ vectors - vectors @ np.diag(eigenvalues)) <= 1e-9 * scale
        assert frobenius_norm(vectors.T @ vectors - np.eye(8)) <= 1e-9


class TestSpectralNorm:
    def test_identity(self):
        assert spectral_norm(np.eye(5)) == pytest.approx(1.0)

    def test_max_abs_eigenvalue(self):
        assert spectral_norm(np.diag([3.0, -5.0])) == pytest.approx(5.0)

    def test_2x2(self):
        assert spectral_norm(np.array([[2.0, 1.0], [1.0, 2.0]])) == pytest.approx(3.0)

    def test_agrees_with_power_iteration(self):
        for seed in range(8):
            a = random_symmetric(4 + seed, 300 + seed)
            direct = spectral_norm(a)
            independent = power_iteration_sq_norm(a)
            assert direct == pytest.approx(independent, rel=1e-8)

    def test_norm_equivalence(self):
        for seed in range(10):
            dim = 2 + seed % 6
            a = random_symmetric(dim, 400 + seed)
            spec = spectral_norm(a)
            frob = frobenius_norm(a)
            assert spec <= frob * (1 + 1e-12)
            assert frob <= math.sqrt(dim) * spec * (1 + 1e-12)


class TestFrobeniusNorm:
    def test_zero(self):
        assert frobenius_norm(np.zeros((3, 4))) == 0.0

    def test_3_4_5(self):
        assert frobenius_norm(np.array([[3.0, 4.0], [0.0, 0.0]])) == pytest.approx(5.0)

    def test_identity(self):
        for p in (1, 4, 9):
            assert frobenius_norm(np.eye(p)) == pytest.approx(math.sqrt(p))


class TestKron:
    def test_identities(self):
        assert np.array_equal(kron(np.eye(2), np.eye(3)), np.eye(6))
        assert np.array_equal(kron([[2.0]], np.eye(2)), 2.0 * np.eye(2))

    def test_mixed_product_identity(self):
        stream = standard_normal_stream(5150)
        a = stream.draw(4).reshape(2, 2)
        b = stream.draw(9).reshape(3, 3)
        c = stream.draw(4).reshape(2, 2)
        d = stream.draw(9).reshape(3, 3)
        left = kron(a, b) @ kron(c, d)
        right = kron(a @ c, b @ d)
        assert np.max(np.abs(left - right)) <= 1e-12 * max(1.0, np.max(np.abs(right)))

    def test_vec_identity(self):
        # column-stacking vec: (A (x) B) vec(X) = vec(B X A^T)
        for seed, (ra, ca, rb, cb) in enumerate([(2, 2, 3, 3), (3, 2, 2, 4), (4, 3, 2, 2)]):
            stream = standard_normal_stream(600 + seed)
            a = stream.draw(ra * ca).reshape(ra, ca)
            b = stream.draw(rb * cb).reshape(rb, cb)
            x = stream.draw(cb * ca).reshape(cb, ca)
            left = kron(a, b) @ x.T.ravel()
            right = (b @ x @ a.T).T.ravel()
            assert np.max(np.abs(left - right)) <= 1e-12 * max(1.0, np.max(np.abs(right)))

    def test_dimension_cap(self):
        with pytest.raises(DimensionCap):
            kron(np.eye(10), np.eye(10), entry_cap=100 * 100 - 1)


class TestMaxAbsEntryDiff:
    def test_equal(self):
        a = random_symmetric(4, 9)
        assert max_abs_entry_diff(a, a) == 0.0

    def test_identity_vs_zero(self):
        assert max_abs_entry_diff(np.eye(2), np.zeros((2, 2))) == 1.0

    def test_entrywise(self):
        a = np.array([[1.0, 2.0], [2.0, 1.0]])
        b = np.array([[0.0, 5.0], [5.0, 0.0]])
        assert max_abs_entry_diff(a, b) == 3.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            max_abs_entry_diff(np.eye(2), np.eye(3))
