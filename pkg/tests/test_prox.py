import numpy as np
import pytest

from demix.core.exceptions import InputError
from demix.numerics.prox import (
    column_soft_threshold,
    lipschitz_constant,
    singular_value_threshold,
    soft_threshold_entries,
)


def test_soft_threshold_entries():
    y = np.array([[3.0, -0.5, -2.0]])
    assert np.array_equal(soft_threshold_entries(y, 1.0), [[2.0, 0.0, -1.0]])
    assert np.array_equal(soft_threshold_entries(y, 0.0), y)


@pytest.mark.parametrize("prox", [soft_threshold_entries, singular_value_threshold, column_soft_threshold])
def test_negative_threshold_is_rejected(prox):
    with pytest.raises(InputError):
        prox(np.ones((2, 2)), -1.0)


def test_singular_value_threshold_shrinks_spectrum():
    y = np.diag([3.0, 1.0])
    assert np.allclose(singular_value_threshold(y, 2.0), np.diag([1.0, 0.0]), atol=1e-14)
    assert np.array_equal(singular_value_threshold(y, 3.0), np.zeros((2, 2)))


def test_singular_value_threshold_keeps_singular_vectors(rng):
    y = rng.standard_normal((6, 4))
    sigma = np.linalg.svd(y, compute_uv=False)
    shrunk = np.linalg.svd(singular_value_threshold(y, 0.5), compute_uv=False)
    assert np.allclose(shrunk, np.maximum(sigma - 0.5, 0.0), atol=1e-12)


def test_column_soft_threshold():
    y = np.array([[3.0, 0.3, 0.0], [4.0, 0.4, 0.0]])
    out = column_soft_threshold(y, 1.0)
    assert np.allclose(out[:, 0], [2.4, 3.2])
    assert np.array_equal(out[:, 1], [0.0, 0.0])
    assert np.array_equal(out[:, 2], [0.0, 0.0])


@pytest.mark.parametrize("prox", [soft_threshold_entries, singular_value_threshold, column_soft_threshold])
def test_prox_maps_are_nonexpansive(prox, rng):
    for _ in range(200):
        x = rng.standard_normal((5, 4))
        y = rng.standard_normal((5, 4))
        tau = rng.uniform(0.0, 2.0)
        gap = np.linalg.norm(prox(x, tau) - prox(y, tau))
        assert gap <= np.linalg.norm(x - y) + 1e-10


def test_lipschitz_constant_of_orthonormal_dictionary(rng):
    q, _ = np.linalg.qr(rng.standard_normal((8, 3)))
    assert lipschitz_constant(q) == pytest.approx(2.0)


def test_lipschitz_constant_of_fat_dictionary(rng):
    dictionary = rng.standard_normal((5, 12))
    stacked = np.hstack([np.eye(5), dictionary])
    expected = 1.0 + np.linalg.norm(dictionary.T @ dictionary, 2)
    assert lipschitz_constant(dictionary) == pytest.approx(expected, rel=1e-10)
    assert lipschitz_constant(dictionary) == pytest.approx(
        np.linalg.eigvalsh(stacked.T @ stacked)[-1], rel=1e-10
    )
