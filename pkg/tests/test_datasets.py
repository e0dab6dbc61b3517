"""
Localization on the public hyperspectral scenes.

Expects ``<scene>.json`` (plus its ``.bin``) and ``<scene>_labels.csv`` under
``DEMIX_DATA_DIR``.
"""

from pathlib import Path

import numpy as np
import pytest

from demix.core.config import settings
from demix.models.schemas import DictionarySource, DictionarySpec, SparsityMode
from demix.services.dictionary_learning import learn_dictionary
from demix.services.hyperspectral import TargetLocalizer, class_pixels, unfold
from demix.utils.file_utils import read_cube

pytestmark = pytest.mark.dataset


def _scene(name):
    if not settings.DEMIX_DATA_DIR:
        pytest.skip("DEMIX_DATA_DIR is not set")
    root = Path(settings.DEMIX_DATA_DIR)
    sidecar, labels = root / f"{name}.json", root / f"{name}_labels.csv"
    if not sidecar.is_file() or not labels.is_file():
        pytest.skip(f"{name} scene not found in {root}")
    return read_cube(sidecar, labels)


def _sampled(class_id, atoms):
    return DictionarySpec(source=DictionarySource.SAMPLED, class_id=class_id, atoms=atoms)


def test_indian_pines_entrywise():
    cube = _scene("indian_pines")
    result = TargetLocalizer(mode=SparsityMode.ENTRY_WISE).localize(cube, _sampled(16, 15))
    assert result.curve.auc >= 0.98


def test_pavia_columnwise():
    cube = _scene("pavia")
    result = TargetLocalizer(mode=SparsityMode.COLUMN_WISE).localize(cube, _sampled(5, 60))
    assert result.curve.auc >= 0.98


def test_indian_pines_learned_dictionary():
    cube = _scene("indian_pines")
    m_obs = unfold(cube) / np.max(np.abs(unfold(cube)))
    learned = learn_dictionary(m_obs[:, class_pixels(cube, 16)], 4, rho=0.1)
    assert np.all(np.diff(learned.objective) <= 1e-9)

    spec = DictionarySpec(source=DictionarySource.LEARNED, class_id=16, atoms=4, rho=0.1)
    result = TargetLocalizer(mode=SparsityMode.ENTRY_WISE).localize(cube, spec)
    assert result.curve.auc >= 0.90
