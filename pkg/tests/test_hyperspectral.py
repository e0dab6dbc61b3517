import numpy as np
import pytest

from demix.core.exceptions import InputError
from demix.models.domain import HyperCube
from demix.models.schemas import DictionarySource, DictionarySpec, SparsityMode, ThresholdMode
from demix.services.hyperspectral import (
    TargetLocalizer,
    build_problem,
    compare_methods,
    crop,
    fold,
    normalize,
    sample_dictionary,
    unfold,
    unfold_labels,
)
from demix.utils.file_utils import write_matrix


def _sampled(atoms=2, class_id=1):
    return DictionarySpec(source=DictionarySource.SAMPLED, class_id=class_id, atoms=atoms)


def test_unfold_pixel_order(separable_cube):
    matrix = unfold(separable_cube)
    height = separable_cube.height
    assert matrix.shape == (6, 30)
    assert np.array_equal(matrix[:, 2 * height + 4], separable_cube.voxels[:, 4, 2])
    assert unfold_labels(separable_cube.labels)[1 * height + 2] == separable_cube.labels[2, 1]

    back = fold(matrix, separable_cube.height, separable_cube.width)
    assert np.array_equal(back.voxels, separable_cube.voxels)
    with pytest.raises(InputError):
        fold(matrix, 5, 5)


def test_crop(separable_cube):
    part = crop(separable_cube, 1, 1, 2, 3)
    assert (part.height, part.width) == (2, 3)
    assert (part.labels == 1).all()
    with pytest.raises(InputError):
        crop(separable_cube, 5, 0, 2, 2)


def test_normalize(rng):
    m_raw = rng.uniform(0.0, 4.0, size=(5, 8))
    dict_raw = m_raw[:, :2] * 3.0

    m_obs, dictionary = normalize(m_raw, dict_raw, dict_is_learned=False)
    assert np.max(np.abs(m_obs)) == pytest.approx(1.0)
    assert np.allclose(np.linalg.norm(dictionary, axis=0), 1.0)

    _, learned = normalize(m_raw, dict_raw, dict_is_learned=True)
    assert np.array_equal(learned, dict_raw)

    with pytest.raises(InputError, match="zero data"):
        normalize(np.zeros((2, 2)), dict_raw[:2], dict_is_learned=False)


def test_sampled_dictionary_comes_from_the_class(separable_cube):
    dictionary = sample_dictionary(separable_cube, 1, 3, seed=5)
    targets = unfold(separable_cube)[:, unfold_labels(separable_cube.labels) == 1]
    for column in dictionary.T:
        assert any(np.array_equal(column, target) for target in targets.T)
    with pytest.raises(InputError):
        sample_dictionary(separable_cube, 1, 7)


def test_absent_class_is_rejected(separable_cube):
    with pytest.raises(InputError, match="absent"):
        TargetLocalizer(lambda_count=3).localize(separable_cube, _sampled(class_id=7))


def test_lambda_selection_needs_labels(separable_cube, tmp_path):
    path = tmp_path / "dict.csv"
    write_matrix(path, unfold(separable_cube)[:, :2])
    unlabelled = HyperCube(voxels=separable_cube.voxels)
    spec = DictionarySpec(source=DictionarySource.FILE, path=str(path))
    with pytest.raises(InputError, match="select lambda"):
        TargetLocalizer(lambda_count=3).localize(unlabelled, spec)


def test_fixed_lambda_without_labels(separable_cube, tmp_path):
    path = tmp_path / "dict.csv"
    write_matrix(path, sample_dictionary(separable_cube, 1, 2))
    unlabelled = HyperCube(voxels=separable_cube.voxels)
    spec = DictionarySpec(source=DictionarySource.FILE, path=str(path))

    result = TargetLocalizer(max_iters=200).localize(unlabelled, spec, lam=0.1)
    assert result.curve is None
    assert result.lam == 0.1
    assert result.score_map.shape == (6, 5)
    assert np.all(result.score_map >= 0)
    with pytest.raises(InputError):
        result.method_result()


def test_file_dictionary_must_match_bands(separable_cube, tmp_path):
    path = tmp_path / "dict.csv"
    write_matrix(path, np.ones((4, 2)))
    spec = DictionarySpec(source=DictionarySource.FILE, path=str(path))
    with pytest.raises(InputError, match="bands"):
        build_problem(separable_cube, spec, SparsityMode.ENTRY_WISE)


def test_learned_dictionary_problem(separable_cube):
    spec = DictionarySpec(
        source=DictionarySource.LEARNED, class_id=1, atoms=2, rho=0.1, iters=5
    )
    problem = build_problem(separable_cube, spec, SparsityMode.COLUMN_WISE)
    assert problem.d == 2
    assert problem.mode is SparsityMode.COLUMN_WISE
    assert np.max(np.abs(problem.m_obs)) == pytest.approx(1.0)
    assert np.allclose(np.linalg.norm(problem.dictionary, axis=0), 1.0)


def test_localization_separates_the_target(separable_cube):
    localizer = TargetLocalizer(lambda_count=10, max_iters=500)
    result = localizer.localize(separable_cube, _sampled())
    assert result.curve.auc >= 0.9
    assert len(result.lambda_table) == 10
    assert list(result.lambda_table.columns) == [
        "lambda",
        "pre_threshold",
        "auc",
        "flipped",
        "converged",
    ]
    assert result.lam in result.lambda_table["lambda"].tolist()


def test_fixed_pre_threshold_mode(separable_cube):
    localizer = TargetLocalizer(lambda_count=3, threshold_mode=ThresholdMode.FIXED, max_iters=200)
    result = localizer.localize(separable_cube, _sampled())
    assert (result.lambda_table["pre_threshold"] == 2e-3).all()


def test_compare_methods(separable_cube):
    rows = compare_methods(separable_cube, _sampled(), lambda_count=5)
    assert [row.method for row in rows] == ["D-RPCA(E)", "RPCA-pinv", "MF", "MF-pinv"]
    by_method = {row.method: row for row in rows}
    assert by_method["MF"].auc == pytest.approx(1.0)
    assert by_method["MF"].lam is None
    assert all(0.0 <= row.auc <= 1.0 for row in rows)


def test_compare_methods_needs_labels(separable_cube, tmp_path):
    path = tmp_path / "dict.csv"
    write_matrix(path, sample_dictionary(separable_cube, 1, 2))
    spec = DictionarySpec(source=DictionarySource.FILE, path=str(path))
    with pytest.raises(InputError, match="labels"):
        TargetLocalizer(lambda_count=3).compare_methods(separable_cube, spec)
