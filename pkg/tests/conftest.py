"""
Shared fixtures for the test suite.
"""

import numpy as np
import pytest

from demix.models.domain import HyperCube


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def feasible_instance():
    """
    Tiny entry-wise instance inside the recovery region.

    ``D`` spans three coordinates of a random orthonormal basis of R^6, ``U``
    is orthogonal to ``range(D)`` and ``V`` has entries of magnitude
    ``1/sqrt(6)``, so ``mu = 1/sqrt(6)`` and ``lambda_min = 0``. The support
    is the single entry (1, 2).
    """
    gen = np.random.default_rng(7)
    q, _ = np.linalg.qr(gen.standard_normal((6, 6)))
    dictionary = q[:, :3]
    u = q[:, 5:6]
    v = np.array([[1.0, -1.0, 1.0, 1.0, -1.0, 1.0]]).T / np.sqrt(6.0)
    low_rank = u @ v.T
    sparse = np.zeros((3, 6))
    sparse[1, 2] = 1.0
    return low_rank, sparse, dictionary


@pytest.fixture
def unidentifiable_instance():
    """Instance whose single atom equals the column space of L (mu = 1)."""
    u = np.zeros((6, 1))
    u[0, 0] = 1.0
    v = np.ones((6, 1)) / np.sqrt(6.0)
    sparse = np.zeros((1, 6))
    sparse[0, 0] = 1.0
    return u @ v.T, sparse, u.copy()


def make_separable_cube(bands: int = 6, height: int = 6, width: int = 5, seed: int = 0) -> HyperCube:
    """
    Scene with a rank-one background and a 2x3 block of target pixels.

    Background pixels are positive multiples of one spectrum; target pixels
    add an orthogonal spectrum of the same norm. Labels: 1 on the block, 0
    elsewhere.
    """
    gen = np.random.default_rng(seed)
    q, _ = np.linalg.qr(gen.standard_normal((bands, bands)))
    background, target = np.abs(q[:, 0]), q[:, 1]
    target = target - background * (background @ target) / (background @ background)
    target *= np.linalg.norm(background) / np.linalg.norm(target)

    scale = gen.uniform(0.8, 1.2, size=(height, width))
    voxels = background[:, None, None] * scale[None, :, :]
    labels = np.zeros((height, width), dtype=np.int64)
    labels[1:3, 1:4] = 1
    voxels[:, labels == 1] += target[:, None]
    return HyperCube(voxels=voxels, labels=labels)


@pytest.fixture
def separable_cube():
    return make_separable_cube()
