"""
Hyperspectral target localization.

Unfolds a cube into a bands x pixels matrix, builds a target dictionary
(sampled voxels, learned atoms or a file), runs the demixing solver over a
lambda grid and scores every pixel by the norm of its coefficient column.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from demix.core.config import settings
from demix.core.exceptions import InputError
from demix.models.domain import Components, DemixProblem, HyperCube, RocCurve, normalize_columns
from demix.models.schemas import (
    DictionarySource,
    DictionarySpec,
    MethodResult,
    SolverConfig,
    SparsityMode,
    ThresholdMode,
)
from demix.numerics.linalg import as_matrix, column_norms
from demix.services.apg_solver import lambda_grid, solve_grid
from demix.services.baselines import matched_filter, transformed_problem
from demix.services.dictionary_learning import learn_dictionary
from demix.services.evaluation import best_operating_point, roc, threshold_scores
from demix.utils.file_utils import read_matrix

logger = logging.getLogger(__name__)

PRE_THRESHOLD_LEVELS = 64


def unfold(cube: HyperCube) -> np.ndarray:
    """
    Stack pixel spectra side by side into a ``bands x (height*width)`` matrix.

    Pixels are taken in column-major order: column ``j`` holds the pixel at
    row ``j % height`` and column ``j // height``.
    """
    return cube.voxels.reshape(cube.bands, cube.pixels, order="F")


def fold(matrix: np.ndarray, height: int, width: int, labels: Optional[np.ndarray] = None) -> HyperCube:
    """Inverse of :func:`unfold`."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != height * width:
        raise InputError(f"cannot fold a {matrix.shape} matrix into {height}x{width} pixels")
    return HyperCube(voxels=matrix.reshape(matrix.shape[0], height, width, order="F"), labels=labels)


def unfold_labels(labels: np.ndarray) -> np.ndarray:
    """Label map in the pixel order of :func:`unfold`."""
    return np.asarray(labels).reshape(-1, order="F")


def crop(cube: HyperCube, row: int, col: int, height: int, width: int) -> HyperCube:
    """Rectangular sub-scene starting at ``(row, col)``."""
    if row < 0 or col < 0 or height < 1 or width < 1:
        raise InputError("crop needs a nonnegative origin and a positive size")
    if row + height > cube.height or col + width > cube.width:
        raise InputError(
            f"crop {height}x{width} at ({row}, {col}) exceeds the "
            f"{cube.height}x{cube.width} scene"
        )
    labels = None
    if cube.labels is not None:
        labels = cube.labels[row : row + height, col : col + width]
    return HyperCube(
        voxels=cube.voxels[:, row : row + height, col : col + width], labels=labels
    )


def _data_scale(m_raw: np.ndarray) -> float:
    scale = float(np.max(np.abs(m_raw))) if m_raw.size else 0.0
    if scale == 0.0:
        raise InputError("cannot normalize zero data")
    return scale


def normalize(
    m_raw: np.ndarray, dict_raw: np.ndarray, dict_is_learned: bool
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Scale data and dictionary.

    The data is divided by its largest absolute entry. Sampled dictionaries
    get the same division followed by column normalization; learned ones pass
    through unchanged.

    Raises:
        InputError: If the data is zero
    """
    m_raw = as_matrix(m_raw, "data")
    dict_raw = as_matrix(dict_raw, "dictionary")
    scale = _data_scale(m_raw)
    if dict_is_learned:
        return m_raw / scale, dict_raw
    return m_raw / scale, normalize_columns(dict_raw / scale)


def class_pixels(cube: HyperCube, class_id: int) -> np.ndarray:
    """Unfolded indices of the pixels labelled ``class_id``."""
    if cube.labels is None:
        raise InputError("this operation needs a label map")
    pixels = np.flatnonzero(unfold_labels(cube.labels) == class_id)
    if pixels.size == 0:
        raise InputError(f"target class {class_id} is absent from the labels")
    return pixels


def sample_dictionary(cube: HyperCube, class_id: int, count: int, seed: int = 0) -> np.ndarray:
    """Raw spectra of ``count`` randomly chosen pixels of the target class."""
    pixels = class_pixels(cube, class_id)
    if count > pixels.size:
        raise InputError(
            f"class {class_id} has {pixels.size} pixels, cannot sample {count}"
        )
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(pixels, size=count, replace=False))
    return unfold(cube)[:, chosen]


def build_problem(
    cube: HyperCube, spec: DictionarySpec, mode: SparsityMode
) -> DemixProblem:
    """
    Normalized demixing problem of a cube for the given dictionary spec.

    Learned dictionaries are trained on the normalized target-class voxels.
    """
    m_raw = unfold(cube)
    if spec.source is DictionarySource.SAMPLED:
        dict_raw = sample_dictionary(cube, spec.class_id, spec.atoms, spec.seed)
        m_obs, dictionary = normalize(m_raw, dict_raw, dict_is_learned=False)
    elif spec.source is DictionarySource.LEARNED:
        m_obs = m_raw / _data_scale(m_raw)
        voxels = m_obs[:, class_pixels(cube, spec.class_id)]
        learned = learn_dictionary(voxels, spec.atoms, spec.rho, spec.iters, spec.seed)
        dictionary = learned.dictionary
    else:
        dict_raw = read_matrix(spec.path)
        if dict_raw.shape[0] != cube.bands:
            raise InputError(
                f"dictionary has {dict_raw.shape[0]} rows, cube has {cube.bands} bands"
            )
        m_obs, dictionary = normalize(m_raw, dict_raw, dict_is_learned=False)
    return DemixProblem.create(m_obs, dictionary, mode)


def _choose_pre_threshold(
    norms: np.ndarray, labels: np.ndarray, mode: ThresholdMode, threshold_count: int
) -> Tuple[float, RocCurve]:
    if mode is ThresholdMode.FIXED:
        threshold = settings.COLUMN_THRESHOLD
        return threshold, roc(threshold_scores(norms, threshold), labels, threshold_count)

    candidates = np.unique(
        np.concatenate(([0.0], np.quantile(norms, np.linspace(0.0, 0.99, PRE_THRESHOLD_LEVELS))))
    )
    best_threshold, best_curve = 0.0, None
    for threshold in candidates:
        scores = threshold_scores(norms, threshold)
        if not np.any(scores):
            continue
        curve = roc(scores, labels, threshold_count)
        if best_curve is None or curve.auc > best_curve.auc:
            best_threshold, best_curve = float(threshold), curve
    if best_curve is None:
        best_curve = roc(norms, labels, threshold_count)
    return best_threshold, best_curve


@dataclass
class LocalizationResult:
    """Outcome of a localization run."""

    score_map: np.ndarray
    lam: float
    pre_threshold: float
    components: Components
    problem: DemixProblem
    curve: Optional[RocCurve] = None
    lambda_table: pd.DataFrame = field(default_factory=pd.DataFrame)

    def method_result(self, method: str = "drpca") -> MethodResult:
        if self.curve is None:
            raise InputError("no ROC available without labels")
        point = best_operating_point(self.curve)
        return MethodResult(
            method=method,
            lam=self.lam,
            threshold=point.threshold,
            tpr=point.tpr,
            fpr=point.fpr,
            auc=self.curve.auc,
            flipped=self.curve.flipped,
        )


class TargetLocalizer:
    """
    End-to-end target localization on one cube.

    Args:
        mode: Sparsity mode of the demixing problem
        lambda_count: Lambda grid size (default ``settings.LAMBDA_COUNT``)
        threshold_mode: Pre-threshold selection (fixed or AUC-maximizing)
        jobs: Worker count for the lambda grid
        threshold_count: ROC grid size (default ``settings.ROC_THRESHOLD_COUNT``)
        max_iters: Optional solver iteration budget
    """

    def __init__(
        self,
        mode: SparsityMode = SparsityMode.ENTRY_WISE,
        lambda_count: Optional[int] = None,
        threshold_mode: ThresholdMode = ThresholdMode.AUC,
        jobs: Optional[int] = None,
        threshold_count: Optional[int] = None,
        max_iters: Optional[int] = None,
    ):
        self.mode = SparsityMode(mode)
        self.lambda_count = lambda_count or settings.LAMBDA_COUNT
        self.threshold_mode = ThresholdMode(threshold_mode)
        self.jobs = jobs
        self.threshold_count = threshold_count or settings.ROC_THRESHOLD_COUNT
        self.max_iters = max_iters
        self.logger = logger

    def _scan(
        self, problem: DemixProblem, lambdas, labels: Optional[np.ndarray]
    ) -> Tuple[int, float, Optional[RocCurve], List[Components], pd.DataFrame]:
        base = SolverConfig.from_settings(float(lambdas[0]), max_iters=self.max_iters)
        runs = solve_grid(problem, lambdas, base, self.jobs)
        solutions = [components for components, _ in runs]

        if labels is None:
            table = pd.DataFrame({"lambda": lambdas})
            return 0, 0.0, None, solutions, table

        rows, best_index, best = [], 0, None
        for index, components in enumerate(solutions):
            norms = column_norms(components.sparse_coeff)
            threshold, curve = _choose_pre_threshold(
                norms, labels, self.threshold_mode, self.threshold_count
            )
            rows.append(
                {
                    "lambda": float(lambdas[index]),
                    "pre_threshold": threshold,
                    "auc": curve.auc,
                    "flipped": curve.flipped,
                    "converged": components.converged,
                }
            )
            if best is None or curve.auc > best[1].auc:
                best_index, best = index, (threshold, curve)
        return best_index, best[0], best[1], solutions, pd.DataFrame(rows)

    def localize(
        self, cube: HyperCube, spec: DictionarySpec, lam: Optional[float] = None
    ) -> LocalizationResult:
        """
        Localize the target class of ``spec`` in ``cube``.

        Args:
            cube: Hyperspectral scene
            spec: Dictionary specification
            lam: Fixed lambda; when omitted the grid is scanned and the
                lambda with the largest AUC kept

        Returns:
            LocalizationResult: Score map, ROC and chosen parameters

        Raises:
            InputError: If the target class is absent, or no labels are
                available to select lambda
        """
        target = None
        if spec.class_id is not None and cube.labels is not None:
            class_pixels(cube, spec.class_id)
            target = unfold_labels(cube.labels) == spec.class_id
        if lam is None and target is None:
            raise InputError("labels and a target class are needed to select lambda")

        problem = build_problem(cube, spec, self.mode)
        lambdas = np.array([lam]) if lam is not None else lambda_grid(problem, self.lambda_count)
        self.logger.info(
            f"Localizing class {spec.class_id} with a {spec.source.value} dictionary "
            f"(d={problem.d}, mode={self.mode.value}, {lambdas.size} lambda values)"
        )

        index, threshold, curve, solutions, table = self._scan(problem, lambdas, target)
        components = solutions[index]
        norms = column_norms(components.sparse_coeff)
        scores = threshold_scores(norms, threshold) if curve is not None else norms

        if curve is not None:
            self.logger.info(
                f"Best lambda {lambdas[index]:.4e}: AUC {curve.auc:.4f}"
                f"{' (inverted)' if curve.flipped else ''}"
            )

        return LocalizationResult(
            score_map=scores.reshape(cube.height, cube.width, order="F"),
            lam=float(lambdas[index]),
            pre_threshold=threshold,
            components=components,
            problem=problem,
            curve=curve,
            lambda_table=table,
        )

    def compare_methods(
        self, cube: HyperCube, spec: DictionarySpec, result: Optional[LocalizationResult] = None
    ) -> List[MethodResult]:
        """
        Compare demixing with the pseudo-inverse solver and both matched filters.

        Args:
            cube: Labelled hyperspectral scene
            spec: Dictionary specification
            result: Reuse an existing demixing run instead of recomputing it

        Returns:
            list: One :class:`MethodResult` per method
        """
        if spec.class_id is None or cube.labels is None:
            raise InputError("method comparison needs labels and a target class")
        result = result or self.localize(cube, spec)
        labels = unfold_labels(cube.labels) == spec.class_id
        problem = result.problem

        name = "D-RPCA(E)" if self.mode is SparsityMode.ENTRY_WISE else "D-RPCA(C)"
        rows = [result.method_result(name)]

        pinv_name = "RPCA-pinv" if self.mode is SparsityMode.ENTRY_WISE else "OP-pinv"
        transformed = transformed_problem(problem)
        lambdas = lambda_grid(transformed, self.lambda_count)
        index, _, curve, _, _ = self._scan(transformed, lambdas, labels)
        point = best_operating_point(curve)
        rows.append(
            MethodResult(
                method=pinv_name,
                lam=float(lambdas[index]),
                threshold=point.threshold,
                tpr=point.tpr,
                fpr=point.fpr,
                auc=curve.auc,
                flipped=curve.flipped,
            )
        )

        for method, pinv_first in (("MF", False), ("MF-pinv", True)):
            scores = matched_filter(problem.m_obs, problem.dictionary, pinv_first)
            curve = roc(scores, labels, self.threshold_count)
            point = best_operating_point(curve)
            rows.append(
                MethodResult(
                    method=method,
                    threshold=point.threshold,
                    tpr=point.tpr,
                    fpr=point.fpr,
                    auc=curve.auc,
                    flipped=curve.flipped,
                )
            )

        for row in rows:
            self.logger.info(
                f"{row.method}: AUC={row.auc:.3f}, TPR={row.tpr:.3f}, FPR={row.fpr:.3f}"
            )
        return rows


def localize(
    cube: HyperCube,
    spec: DictionarySpec,
    mode: SparsityMode | str = SparsityMode.ENTRY_WISE,
    lambda_count: Optional[int] = None,
    threshold_mode: ThresholdMode | str = ThresholdMode.AUC,
    jobs: Optional[int] = None,
    lam: Optional[float] = None,
) -> LocalizationResult:
    """Localize a target class (see :class:`TargetLocalizer`)."""
    localizer = TargetLocalizer(
        mode=SparsityMode(mode),
        lambda_count=lambda_count,
        threshold_mode=ThresholdMode(threshold_mode),
        jobs=jobs,
    )
    return localizer.localize(cube, spec, lam)


def compare_methods(
    cube: HyperCube,
    spec: DictionarySpec,
    mode: SparsityMode | str = SparsityMode.ENTRY_WISE,
    lambda_count: Optional[int] = None,
    jobs: Optional[int] = None,
) -> List[MethodResult]:
    """Run D-RPCA, its pseudo-inverse counterpart, MF and MF-pinv on one cube."""
    localizer = TargetLocalizer(mode=SparsityMode(mode), lambda_count=lambda_count, jobs=jobs)
    return localizer.compare_methods(cube, spec)
