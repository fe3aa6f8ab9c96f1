"""Per-pixel per-label assignment costs.

The main route builds a kernel density estimate over scribble points in a
5-channel feature space (color plus weighted flow magnitude and direction).
An alternative route converts externally computed per-label probability
maps into costs. Confidently warped pixels are clamped so only the
remaining fraction of the image is actually inferred.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoEvidenceError, SequenceInconsistencyError
from .flow_consistency import UNKNOWN_LABEL, ScribbleSet

MISSING_LABEL_COST = 20.0   # labels with no scribbles and no retrieval evidence
CLAMP_COST = 1e4            # dwarfs any perimeter term at lambda <= 60
DENSITY_FLOOR = 1e-300      # keeps -log finite
PROBABILITY_FLOOR = 1e-6
_PIXEL_CHUNK = 8192


@dataclass
class CostVolume:
    """Assignment costs h_i(x) plus the set of hard-labeled pixels.

    ``clamp`` holds the fixed label per pixel, or -1 where the label is
    free. A clamped pixel has cost 0 for its label and ``CLAMP_COST`` for
    every other label.
    """

    costs: np.ndarray  # (H, W, n) float64, finite, >= 0
    clamp: np.ndarray  # (H, W) int32, -1 where unclamped

    @property
    def n_labels(self):
        return self.costs.shape[2]

    @classmethod
    def from_costs(cls, costs):
        costs = np.asarray(costs, dtype=np.float64)
        clamp = np.full(costs.shape[:2], -1, dtype=np.int32)
        return cls(costs=costs, clamp=clamp)


@dataclass(frozen=True)
class ColorModel:
    """Mean color per label, extracted from the annotated key frame."""

    mean_color: dict

    def __contains__(self, label):
        return label in self.mean_color


def build_color_model(frame, mask):
    """Mean RGB color of every label present in the mask."""
    means = {}
    for label in np.unique(mask):
        means[int(label)] = frame[mask == label].mean(axis=0)
    return ColorModel(mean_color=means)


def build_feature_image(frame, backward, alpha, theta):
    """Stack color with normalized flow magnitude and direction channels.

    Magnitude is scaled so the strongest motion maps to 255, direction maps
    the angle range (-pi, pi] linearly onto [0, 255]. Both channels are then
    weighted by ``alpha`` and ``theta``; at the default 0.5 they span
    [0, 127.5], half the color range. The direction of a zero vector follows
    the atan2(0, 0) = 0 convention.
    """
    mag = np.hypot(backward[:, :, 0], backward[:, :, 1])
    peak = mag.max()
    mag_norm = 255.0 * mag / peak if peak > 0 else np.zeros_like(mag)
    angle = np.arctan2(backward[:, :, 1], backward[:, :, 0])
    dir_norm = 255.0 * (angle + np.pi) / (2.0 * np.pi)
    features = np.empty(frame.shape[:2] + (5,), dtype=np.float64)
    features[:, :, :3] = frame
    features[:, :, 3] = alpha * mag_norm
    features[:, :, 4] = theta * dir_norm
    return features


def kde_costs(scribbles, features, sigma):
    """Kernel-density assignment costs from scribbles in feature space.

    For label i with scribbles S_i the cost at pixel x is

        h_i(x) = -log( 1/|S_i| * sum_s k_rho(x - x_s) * k_sigma(J(x) - J(x_s)) )

    with unnormalized Gaussian kernels (value 1 at zero distance). The
    spatial bandwidth rho_i(x) is the distance from x to the nearest
    scribble of label i, floored at one pixel, so the density adapts to the
    local scribble coverage. Labels without scribbles get the flat
    ``MISSING_LABEL_COST``.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if scribbles.total == 0:
        raise NoEvidenceError("no scribbles for any label")
    height, width = features.shape[:2]
    n_labels = scribbles.n_labels
    flat_features = features.reshape(-1, features.shape[2])
    ys, xs = np.mgrid[0:height, 0:width]
    flat_pos = np.stack([xs.ravel(), ys.ravel()], axis=-1).astype(np.float64)

    costs = np.empty((height * width, n_labels), dtype=np.float64)
    inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma)
    for label in range(n_labels):
        if scribbles.count(label) == 0:
            costs[:, label] = MISSING_LABEL_COST
            continue
        pos = scribbles.positions[label]
        feat = scribbles.features[label]
        for start in range(0, flat_pos.shape[0], _PIXEL_CHUNK):
            stop = min(start + _PIXEL_CHUNK, flat_pos.shape[0])
            diff = flat_pos[start:stop, None, :] - pos[None, :, :]
            spatial_d2 = np.einsum("psk,psk->ps", diff, diff)
            rho = np.maximum(1.0, np.sqrt(spatial_d2.min(axis=1)))
            fdiff = flat_features[start:stop, None, :] - feat[None, :, :]
            feature_d2 = np.einsum("psk,psk->ps", fdiff, fdiff)
            kernel = np.exp(-spatial_d2 / (2.0 * rho * rho)[:, None])
            kernel *= np.exp(-feature_d2 * inv_two_sigma2)
            density = kernel.mean(axis=1)
            costs[start:stop, label] = -np.log(np.maximum(density, DENSITY_FLOOR))
    return CostVolume.from_costs(costs.reshape(height, width, n_labels))


def cnn_costs(maps, n_labels=None):
    """Negative log of externally computed per-label probabilities.

    Probabilities are floored at ``PROBABILITY_FLOOR`` so the costs stay
    finite. ``n_labels``, when given, is checked against the map stack.
    """
    maps = np.asarray(maps, dtype=np.float64)
    if n_labels is not None and maps.shape[2] != n_labels:
        raise SequenceInconsistencyError(
            f"probability maps carry {maps.shape[2]} labels, sequence has {n_labels}"
        )
    sums = maps.sum(axis=2)
    if np.abs(sums - 1.0).max() > 1e-3:
        raise SequenceInconsistencyError(
            "probability maps are not normalized per pixel"
        )
    return CostVolume.from_costs(-np.log(np.maximum(maps, PROBABILITY_FLOOR)))


def apply_clamps(costs, warped):
    """Fix every confidently warped pixel to its warped label.

    Returns a new CostVolume; the input is left untouched. Idempotent.
    """
    if warped.shape != costs.costs.shape[:2]:
        raise ValueError("warped mask and cost volume dimensions differ")
    out_costs = costs.costs.copy()
    out_clamp = costs.clamp.copy()
    known = warped != UNKNOWN_LABEL
    out_costs[known] = CLAMP_COST
    rows, cols = np.nonzero(known)
    out_costs[rows, cols, warped[known]] = 0.0
    out_clamp[known] = warped[known]
    return CostVolume(costs=out_costs, clamp=out_clamp)


def lost_object_retrieval(conf, frame, model, missing_labels, threshold):
    """Re-seed vanished foreground labels from key-frame color similarity.

    Looks only at low-confidence pixels (where a disoccluded object must
    reappear) and emits a scribble position wherever the pixel color is
    within ``threshold`` of the lost label's key-frame mean color. Applied
    in the binary scenario only; background (label 0) is never retrieved.
    Returns a dict label -> (m, 2) positions, possibly empty.
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    candidates = conf.conf == 0
    retrieved = {}
    for label in sorted(missing_labels):
        if label == 0 or label not in model:
            continue
        color_dist = np.linalg.norm(frame - model.mean_color[label], axis=2)
        hits = candidates & (color_dist < threshold)
        if hits.any():
            rows, cols = np.nonzero(hits)
            retrieved[label] = np.stack([cols, rows], axis=-1).astype(np.float64)
    return retrieved


def merge_scribbles(scribbles, additions, features):
    """Append retrieved positions (with target-frame features) to a scribble set."""
    if not additions:
        return scribbles
    positions = dict(scribbles.positions)
    feats = dict(scribbles.features)
    for label, pos in additions.items():
        rows = pos[:, 1].astype(np.int64)
        cols = pos[:, 0].astype(np.int64)
        new_feats = features[rows, cols].astype(np.float64)
        old_pos = positions.get(label)
        if old_pos is None or len(old_pos) == 0:
            positions[label] = pos.astype(np.float64)
            feats[label] = new_feats
        else:
            positions[label] = np.concatenate([old_pos, pos.astype(np.float64)])
            feats[label] = np.concatenate([feats[label], new_feats])
    return ScribbleSet(
        n_labels=scribbles.n_labels, positions=positions, features=feats
    )
