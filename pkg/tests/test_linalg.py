import numpy as np
import pytest

from demix.core.exceptions import InputError
from demix.numerics.linalg import (
    MatrixNorm,
    as_matrix,
    materialize_operator,
    matrix_norm,
    operator_norm,
    orthonormal_basis,
    pseudo_inverse,
    spectral_norm,
    svd,
)


def _with_spectrum(rng, rows, cols, sigma):
    left, _ = np.linalg.qr(rng.standard_normal((rows, len(sigma))))
    right, _ = np.linalg.qr(rng.standard_normal((cols, len(sigma))))
    return (left * np.asarray(sigma)) @ right.T


def test_as_matrix_rejects_vectors_and_nan():
    with pytest.raises(InputError):
        as_matrix(np.ones(3))
    with pytest.raises(InputError):
        as_matrix(np.array([[1.0, np.nan]]))


def test_svd_reconstructs_and_is_orthonormal(rng):
    a = rng.standard_normal((8, 5))
    factors = svd(a)
    assert factors.rank == 5
    assert np.allclose(factors.reconstruct(), a, atol=1e-12)
    assert np.allclose(factors.u.T @ factors.u, np.eye(5), atol=1e-12)
    assert np.allclose(factors.v.T @ factors.v, np.eye(5), atol=1e-12)
    assert np.all(np.diff(factors.sigma) <= 0)


def test_svd_truncates_to_numerical_rank(rng):
    a = _with_spectrum(rng, 10, 7, [3.0, 1.0])
    factors = svd(a)
    assert factors.rank == 2
    assert np.allclose(factors.sigma, [3.0, 1.0])


def test_svd_of_zero_matrix_has_rank_zero():
    factors = svd(np.zeros((3, 4)))
    assert factors.rank == 0
    assert factors.u.shape == (3, 0)
    assert factors.v.shape == (4, 0)
    assert np.array_equal(factors.reconstruct(), np.zeros((3, 4)))


def test_orthonormal_basis_spans_columns(rng):
    a = _with_spectrum(rng, 9, 6, [2.0, 1.5, 0.5])
    basis = orthonormal_basis(a)
    assert basis.shape == (9, 3)
    assert np.allclose(basis @ (basis.T @ a), a, atol=1e-12)


def test_matrix_norms():
    a = np.array([[1.0, -2.0], [3.0, 4.0]])
    sigma = np.linalg.svd(a, compute_uv=False)
    assert matrix_norm(a, MatrixNorm.NUCLEAR) == pytest.approx(sigma.sum())
    assert matrix_norm(a, MatrixNorm.SPECTRAL) == pytest.approx(sigma[0])
    assert matrix_norm(a, MatrixNorm.FROBENIUS) == pytest.approx(np.sqrt(30.0))
    assert matrix_norm(a, MatrixNorm.L1_ENTRYWISE) == pytest.approx(10.0)
    assert matrix_norm(a, MatrixNorm.L12_COLUMNS) == pytest.approx(np.sqrt(10.0) + np.sqrt(20.0))
    assert matrix_norm(a, MatrixNorm.LINF_ENTRYWISE) == pytest.approx(4.0)
    assert matrix_norm(a, MatrixNorm.LINF2_MAX_COLUMN) == pytest.approx(np.sqrt(20.0))
    assert matrix_norm(a, "linfinf_max_row_l1") == pytest.approx(7.0)


def test_matrix_norm_of_empty_matrix_is_zero():
    assert matrix_norm(np.zeros((0, 3)), MatrixNorm.SPECTRAL) == 0.0


def test_pseudo_inverse_matches_numpy(rng):
    a = rng.standard_normal((7, 4))
    assert np.allclose(pseudo_inverse(a), np.linalg.pinv(a), atol=1e-12)


def test_pseudo_inverse_of_rank_deficient_matrix(rng):
    a = _with_spectrum(rng, 6, 5, [2.0, 1.0])
    pinv = pseudo_inverse(a)
    assert np.allclose(a @ pinv @ a, a, atol=1e-12)
    assert np.allclose(pinv @ a @ pinv, pinv, atol=1e-12)


def test_materialize_operator(rng):
    a = rng.standard_normal((4, 3))
    assert np.allclose(materialize_operator(lambda x: a @ x, 3, 4), a)


def test_power_iteration_matches_spectral_norm(rng):
    a = _with_spectrum(rng, 20, 12, [5.0, 2.0, 1.0, 0.5])
    result = operator_norm(lambda x: a @ x, 12, 20, adjoint=lambda y: a.T @ y, seed=3)
    assert result.converged
    assert result.iterations > 0
    assert result.value == pytest.approx(5.0, rel=1e-10)


def test_operator_norm_materializes_small_or_adjointless_maps(rng):
    a = rng.standard_normal((5, 4))
    exact = operator_norm(lambda x: a @ x, 4, 5)
    assert exact.iterations == 0
    assert exact.value == pytest.approx(spectral_norm(a))

    small = operator_norm(lambda x: a @ x, 4, 5, adjoint=lambda y: a.T @ y, exact_below=20)
    assert small.iterations == 0


def test_power_iteration_restarts_on_zero_operator():
    result = operator_norm(lambda x: np.zeros(3), 2, 3, adjoint=lambda y: np.zeros(2))
    assert result.value == 0.0
    assert result.restarted
    assert result.converged
