"""Forward-backward flow consistency, confident label warping and scribble
sampling.

A pixel y of the target frame is traced back through the backward flow to
x' = y + b(y) and forward again through f sampled at x'. If the round trip
lands close to y the correspondence is trusted and the source label can be
copied; otherwise the pixel is left for the variational model to decide.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates


@dataclass(frozen=True)
class ConfidenceMap:
    """Per-pixel round-trip distance and the binary confidence it implies.

    ``conf[y] == 1`` exactly when ``distance[y] < tau`` (strict).
    """

    conf: np.ndarray      # (H, W) uint8 in {0, 1}
    distance: np.ndarray  # (H, W) float64, >= 0, inf where the trace leaves the image
    tau: float


@dataclass
class ScribbleSet:
    """Sparse labeled seed points grouped by label.

    ``positions[i]`` is an (m, 2) array of (x, y) coordinates and
    ``features[i]`` the matching (m, F) feature vectors sampled from the
    target frame. Labels with no entries are reported by
    :meth:`missing_labels` so lost-object retrieval can step in.
    """

    n_labels: int
    positions: dict
    features: dict

    def count(self, label):
        pos = self.positions.get(label)
        return 0 if pos is None else len(pos)

    @property
    def total(self):
        return sum(self.count(i) for i in range(self.n_labels))

    def missing_labels(self):
        return {i for i in range(self.n_labels) if self.count(i) == 0}


def _sample_flow(flow, xs, ys):
    """Bilinear sample of an (H, W, 2) flow field at float coordinates."""
    coords = [ys.ravel(), xs.ravel()]
    out = np.empty((xs.size, 2))
    out[:, 0] = map_coordinates(flow[:, :, 0], coords, order=1, mode="nearest")
    out[:, 1] = map_coordinates(flow[:, :, 1], coords, order=1, mode="nearest")
    return out.reshape(xs.shape + (2,))


def fb_distance_field(forward, backward):
    """Round-trip distance d at every pixel of the target frame.

    d(y) = || y - (x' + f(x')) ||  with  x' = y + b(y), f sampled
    bilinearly at x'. Pixels whose x' leaves the image domain get +inf.
    """
    height, width = backward.shape[:2]
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    src_x = xs + backward[:, :, 0]
    src_y = ys + backward[:, :, 1]
    inside = (src_x >= 0) & (src_x <= width - 1) & (src_y >= 0) & (src_y <= height - 1)
    fwd = _sample_flow(forward, src_x, src_y)
    err_x = backward[:, :, 0] + fwd[:, :, 0]
    err_y = backward[:, :, 1] + fwd[:, :, 1]
    dist = np.hypot(err_x, err_y)
    dist[~inside] = np.inf
    return dist


def fb_distance(forward, backward, y):
    """Round-trip distance at one pixel ``y`` given as (x, y) coordinates."""
    col, row = y
    height, width = backward.shape[:2]
    bvec = backward[row, col]
    src = np.array([col + bvec[0], row + bvec[1]])
    if not (0 <= src[0] <= width - 1 and 0 <= src[1] <= height - 1):
        return np.inf
    fwd = _sample_flow(forward, src[:1], src[1:])[0]
    return float(np.hypot(bvec[0] + fwd[0], bvec[1] + fwd[1]))


def confidence_map(forward, backward, tau):
    """Binary flow-matching confidence: 1 where the round-trip distance < tau."""
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    dist = fb_distance_field(forward, backward)
    conf = (dist < tau).astype(np.uint8)
    return ConfidenceMap(conf=conf, distance=dist, tau=float(tau))


def resolve_tau(config, backward):
    """Consistency threshold for one frame pair.

    Fixed mode returns the configured constant; mean mode returns the mean
    backward-flow magnitude, which adapts the threshold to how fast the
    scene moves. A zero return (static scene in mean mode) must be handled
    by the caller.
    """
    if config.tau_mode == "fixed":
        return float(config.tau_value)
    magnitudes = np.hypot(backward[:, :, 0], backward[:, :, 1])
    return float(magnitudes.mean())


UNKNOWN_LABEL = -1


def warp_labels(mask_t, backward, conf):
    """Copy source-frame labels to confidently matched target pixels.

    Returns an (H, W) int32 array where unmatched pixels hold
    ``UNKNOWN_LABEL``. The source position y + b(y) is rounded to the
    nearest pixel (labels are categorical, they cannot be interpolated);
    positions that round outside the image stay unknown.
    """
    height, width = mask_t.shape
    ys, xs = np.mgrid[0:height, 0:width]
    src_x = np.rint(xs + backward[:, :, 0]).astype(np.int64)
    src_y = np.rint(ys + backward[:, :, 1]).astype(np.int64)
    valid = (
        (conf.conf == 1)
        & (src_x >= 0)
        & (src_x < width)
        & (src_y >= 0)
        & (src_y < height)
    )
    warped = np.full((height, width), UNKNOWN_LABEL, dtype=np.int32)
    warped[valid] = mask_t[src_y[valid], src_x[valid]]
    return warped


def sample_scribbles(warped, features, stride, n_labels):
    """Collect scribbles on a regular grid of the warped partial mask.

    Every grid site (i*stride, j*stride) with a known warped label yields
    one scribble carrying that label and the target-frame feature vector at
    the site. Labels that end up with no scribbles are reported by the
    returned set's ``missing_labels``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    height, width = warped.shape
    rows = np.arange(0, height, stride)
    cols = np.arange(0, width, stride)
    grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
    labels = warped[grid_r, grid_c]
    positions = {}
    feats = {}
    for i in range(n_labels):
        sel = labels == i
        pos = np.stack([grid_c[sel], grid_r[sel]], axis=-1).astype(np.float64)
        positions[i] = pos
        feats[i] = features[grid_r[sel], grid_c[sel]].astype(np.float64)
    return ScribbleSet(n_labels=n_labels, positions=positions, features=feats)
