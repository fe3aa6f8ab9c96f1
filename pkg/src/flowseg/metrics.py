"""Region and boundary accuracy metrics plus sequence-level statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import SequenceInconsistencyError


def jaccard(pred, gt, label):
    """Intersection over union of one label's region in two masks.

    1.0 when the label is absent from both masks, 0.0 when it is absent
    from exactly one.
    """
    a = pred == label
    b = gt == label
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    if a.sum() == 0 or b.sum() == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def mask_boundary(mask, label):
    """4-connected boundary pixels of one label's region.

    A region pixel is boundary when any 4-neighbor carries a different
    label; the outside of the image counts as different, so regions touching
    the border have boundary there.
    """
    region = mask == label
    interior = np.zeros_like(region)
    interior[1:-1, 1:-1] = (
        region[1:-1, 1:-1]
        & region[:-2, 1:-1]
        & region[2:, 1:-1]
        & region[1:-1, :-2]
        & region[1:-1, 2:]
    )
    return region & ~interior


def default_boundary_tolerance(shape):
    """Matching tolerance in pixels: 0.8% of the image diagonal, rounded up."""
    height, width = shape[:2]
    return int(np.ceil(0.008 * np.hypot(height, width)))


def boundary_f(pred, gt, label, tol=None):
    """Boundary F-measure of one label under a pixel matching tolerance.

    Precision is the fraction of predicted boundary pixels within ``tol``
    (Euclidean) of some ground-truth boundary pixel; recall is symmetric;
    F is their harmonic mean. Defined as 1.0 when both boundaries are empty
    and 0.0 when exactly one is.
    """
    if pred.shape != gt.shape:
        raise SequenceInconsistencyError("prediction and ground truth dimensions differ")
    if tol is None:
        tol = default_boundary_tolerance(pred.shape)
    pred_b = mask_boundary(pred, label)
    gt_b = mask_boundary(gt, label)
    n_pred = pred_b.sum()
    n_gt = gt_b.sum()
    if n_pred == 0 and n_gt == 0:
        return 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0
    dist_to_gt = distance_transform_edt(~gt_b)
    dist_to_pred = distance_transform_edt(~pred_b)
    precision = float((dist_to_gt[pred_b] <= tol).sum() / n_pred)
    recall = float((dist_to_pred[gt_b] <= tol).sum() / n_gt)
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class EvalResult:
    """Per-frame and aggregate metrics of a propagated sequence.

    Frame 1 (the given annotation) is excluded. ``frames`` holds the
    evaluated 1-based frame numbers. Mean (M) averages the per-frame
    object-averaged metric, recall (R) is the fraction of frames above 0.5,
    decay (D) is the mean over the first temporal quartile minus the mean
    over the last.
    """

    frames: list
    objects: list
    j_per_frame: np.ndarray
    f_per_frame: np.ndarray
    j_per_object: dict
    f_per_object: dict
    mean_j: float
    mean_f: float
    recall_j: float
    recall_f: float
    decay_j: float
    decay_f: float


def _recall(values):
    return float((values > 0.5).mean())


def _decay(values):
    quarter = int(np.ceil(len(values) / 4))
    return float(values[:quarter].mean() - values[-quarter:].mean())


def evaluate_sequence(preds, gts, tol=None):
    """Score predicted masks against ground truth for one sequence.

    ``preds`` and ``gts`` are aligned lists of label masks including the
    annotated first frame, which is skipped. Objects are the non-background
    labels appearing anywhere in the ground truth; per-frame values average
    over objects.
    """
    if len(preds) != len(gts):
        raise SequenceInconsistencyError(
            f"{len(preds)} predictions vs {len(gts)} ground-truth masks"
        )
    if len(gts) < 2:
        raise ValueError("nothing to evaluate: need frames beyond the annotated one")
    objects = sorted({int(v) for gt in gts for v in np.unique(gt)} - {0})
    if not objects:
        raise ValueError("ground truth contains no non-background object")
    frames = list(range(2, len(gts) + 1))
    j_per_object = {}
    f_per_object = {}
    for label in objects:
        j_per_object[label] = np.array(
            [jaccard(p, g, label) for p, g in zip(preds[1:], gts[1:])]
        )
        f_per_object[label] = np.array(
            [boundary_f(p, g, label, tol) for p, g in zip(preds[1:], gts[1:])]
        )
    j_frame = np.mean([j_per_object[o] for o in objects], axis=0)
    f_frame = np.mean([f_per_object[o] for o in objects], axis=0)
    return EvalResult(
        frames=frames,
        objects=objects,
        j_per_frame=j_frame,
        f_per_frame=f_frame,
        j_per_object=j_per_object,
        f_per_object=f_per_object,
        mean_j=float(j_frame.mean()),
        mean_f=float(f_frame.mean()),
        recall_j=_recall(j_frame),
        recall_f=_recall(f_frame),
        decay_j=_decay(j_frame),
        decay_f=_decay(f_frame),
    )
