"""
Evaluation utilities.

Success rules for synthetic recovery, column-support precision, ROC curves
with the inversion rule for worse-than-chance detectors, best operating
points and per-method summaries.
"""

import logging
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import auc as trapezoid_auc

from demix.core.config import settings
from demix.core.exceptions import InputError
from demix.models.domain import Components, OracleModel, RocCurve, column_support
from demix.models.schemas import MethodResult, MethodSummary, OperatingPoint

logger = logging.getLogger(__name__)


def relative_error(truth: np.ndarray, found: np.ndarray) -> float:
    """``||truth - found||_F / ||truth||_F``; the absolute error when ``truth`` is zero."""
    error = float(np.linalg.norm(truth - found))
    scale = float(np.linalg.norm(truth))
    return error / scale if scale > 0 else error


def entrywise_errors(truth: Components, found: Components) -> Tuple[float, float]:
    """Relative errors of the low-rank part and of the coefficients."""
    return (
        relative_error(truth.low_rank, found.low_rank),
        relative_error(truth.sparse_coeff, found.sparse_coeff),
    )


def success_entrywise(
    truth: Components, found: Components, tol: Optional[float] = None
) -> bool:
    """Both relative errors at most ``tol`` (default ``settings.SUCCESS_REL_ERROR``)."""
    tol = settings.SUCCESS_REL_ERROR if tol is None else tol
    err_l, err_s = entrywise_errors(truth, found)
    return err_l <= tol and err_s <= tol


def precision(predicted: Iterable[int], truth: Iterable[int]) -> float:
    """
    Fraction of predicted outliers that are true outliers.

    An empty prediction scores 1 when the truth is empty too and 0 otherwise.
    """
    predicted, truth = set(predicted), set(truth)
    if not predicted:
        return 1.0 if not truth else 0.0
    return len(predicted & truth) / len(predicted)


def success_columnwise(
    found: Components,
    truth: OracleModel,
    threshold: Optional[float] = None,
    required: Optional[float] = None,
) -> Tuple[float, bool]:
    """
    Precision of the recovered outlier columns.

    Args:
        found: Recovered components
        truth: Oracle model of the planted instance
        threshold: Column-norm threshold (default ``settings.COLUMN_THRESHOLD``)
        required: Precision needed for success (default ``settings.SUCCESS_PRECISION``)

    Returns:
        Tuple[float, bool]: Precision and success flag
    """
    threshold = settings.COLUMN_THRESHOLD if threshold is None else threshold
    required = settings.SUCCESS_PRECISION if required is None else required
    predicted = column_support(found.sparse_coeff, threshold).tolist()
    value = precision(predicted, truth.outlier_columns)
    return value, value >= required


def threshold_scores(scores: np.ndarray, threshold: float) -> np.ndarray:
    """Zero every score not strictly above ``threshold``."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.where(scores > threshold, scores, 0.0)


def _curve(
    scores: np.ndarray, labels: np.ndarray, threshold_count: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    top = float(scores.max())
    if top > 0:
        thresholds = np.linspace(top / threshold_count, top, threshold_count)[::-1]
    else:
        thresholds = np.zeros(threshold_count)

    predicted = scores[None, :] > thresholds[:, None]
    tpr = predicted[:, labels].mean(axis=1)
    fpr = predicted[:, ~labels].mean(axis=1)
    area = float(
        trapezoid_auc(np.concatenate(([0.0], fpr, [1.0])), np.concatenate(([0.0], tpr, [1.0])))
    )
    return thresholds, tpr, fpr, area


def roc(
    scores: Sequence[float],
    labels: Sequence[bool],
    threshold_count: Optional[int] = None,
    flip: bool = True,
) -> RocCurve:
    """
    ROC curve over a linear threshold grid in ``(0, max score]``.

    A pixel is predicted positive when its score is strictly above the
    threshold. When the area is below 0.5 and ``flip`` is set, the scores are
    replaced by ``max_score - score`` and the inverted detector is reported.

    Args:
        scores: Per-column scores
        labels: Per-column ground truth
        threshold_count: Grid size (default ``settings.ROC_THRESHOLD_COUNT``)
        flip: Invert worse-than-chance detectors

    Returns:
        RocCurve: Descending thresholds with the matching TPR/FPR and area

    Raises:
        InputError: If the labels contain a single class
    """
    threshold_count = settings.ROC_THRESHOLD_COUNT if threshold_count is None else threshold_count
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    if scores.shape != labels.shape:
        raise InputError("scores and labels must have the same length")
    if labels.all() or not labels.any():
        raise InputError("undefined ROC: labels contain a single class")
    if threshold_count < 1:
        raise InputError("threshold_count must be at least 1")

    thresholds, tpr, fpr, area = _curve(scores, labels, threshold_count)
    flipped = False
    if flip and area < 0.5:
        inverted = scores.max() - scores
        thresholds, tpr, fpr, area = _curve(inverted, labels, threshold_count)
        flipped = True
        logger.debug(f"Detector inverted, AUC after inversion {area:.4f}")

    return RocCurve(thresholds=thresholds, tpr=tpr, fpr=fpr, auc=area, flipped=flipped)


def best_operating_point(curve: RocCurve) -> OperatingPoint:
    """
    Point maximizing ``tpr - fpr``.

    Ties go to the lower false positive rate, then to the higher threshold.
    """
    youden = curve.tpr - curve.fpr
    order = np.lexsort((-curve.thresholds, curve.fpr, -youden))
    best = int(order[0])
    return OperatingPoint(
        threshold=float(curve.thresholds[best]),
        tpr=float(curve.tpr[best]),
        fpr=float(curve.fpr[best]),
    )


def summarize_runs(results: Iterable[MethodResult]) -> List[MethodSummary]:
    """Mean and standard deviation of TPR, FPR and AUC per method."""
    frame = pd.DataFrame([result.model_dump() for result in results])
    if frame.empty:
        return []
    grouped = frame.groupby("method", sort=False)[["tpr", "fpr", "auc"]]
    means = grouped.mean()
    stds = grouped.std(ddof=0)
    counts = grouped.size()
    return [
        MethodSummary(
            method=str(method),
            runs=int(counts[method]),
            tpr_mean=float(means.loc[method, "tpr"]),
            tpr_std=float(stds.loc[method, "tpr"]),
            fpr_mean=float(means.loc[method, "fpr"]),
            fpr_std=float(stds.loc[method, "fpr"]),
            auc_mean=float(means.loc[method, "auc"]),
            auc_std=float(stds.loc[method, "auc"]),
        )
        for method in means.index
    ]
