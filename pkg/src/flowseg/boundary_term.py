"""Per-pixel perimeter weights for the partitioning model.

The weight g discounts region-boundary length where evidence of a true edge
is strong: from raw color gradients, from a learned boundary map, or from
learned image boundaries fused with motion boundaries.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates, sobel

log = logging.getLogger(__name__)


def _forward_differences(channel):
    """Forward differences; the last row/column fall back to backward ones."""
    dx = np.zeros_like(channel)
    dy = np.zeros_like(channel)
    if channel.shape[1] > 1:
        dx[:, :-1] = channel[:, 1:] - channel[:, :-1]
        dx[:, -1] = channel[:, -1] - channel[:, -2]
    if channel.shape[0] > 1:
        dy[:-1, :] = channel[1:, :] - channel[:-1, :]
        dy[-1, :] = channel[-1, :] - channel[-2, :]
    return dx, dy


def _jacobian_norm(image):
    """Frobenius norm of the per-pixel Jacobian over all channels."""
    total = np.zeros(image.shape[:2])
    for c in range(image.shape[2]):
        dx, dy = _forward_differences(image[:, :, c])
        total += dx * dx + dy * dy
    return np.sqrt(total)


def gradient_weight(frame, gamma):
    """g(x) = exp(-gamma * |grad I(x)|) from raw color gradients."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    return np.exp(-gamma * _jacobian_norm(frame))


def learned_weight(boundary, beta, sign="discount"):
    """Perimeter weight from a learned boundary map.

    g(x) = exp(-E(x)^beta / Ebar) with Ebar twice the mean boundary
    strength, so cutting along strong detected boundaries is cheap. The
    ``sign="literal"`` switch flips the exponent to exp(+E^beta / Ebar),
    which rewards cutting off-edge instead; it exists for side-by-side
    comparison and breaks the g <= 1 guarantee.
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if sign not in ("discount", "literal"):
        raise ValueError(f"sign must be 'discount' or 'literal', got {sign!r}")
    ebar = 2.0 * np.abs(boundary).mean()
    if ebar == 0.0:
        log.warning("boundary map is identically zero; using g == 1")
        return np.ones_like(boundary, dtype=np.float64)
    exponent = np.power(boundary, beta) / ebar
    return np.exp(-exponent if sign == "discount" else exponent)


def non_maximum_suppression(strength):
    """Thin an edge-strength map to its ridge crests.

    Local orientation comes from a 3x3 Sobel gradient of the 1-pixel
    Gaussian-blurred map. A pixel survives when its strength is >= both
    neighbors sampled by linear interpolation one pixel away along the
    gradient direction; pixels with zero gradient (plateaus, flat areas)
    are kept as they have no suppression direction.
    """
    blurred = gaussian_filter(strength, sigma=1.0)
    gx = sobel(blurred, axis=1)
    gy = sobel(blurred, axis=0)
    magnitude = np.hypot(gx, gy)
    height, width = strength.shape
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    safe_mag = np.where(magnitude > 0, magnitude, 1.0)
    ux = gx / safe_mag
    uy = gy / safe_mag

    def sample(dx, dy):
        coords = [(ys + dy).ravel(), (xs + dx).ravel()]
        return map_coordinates(
            strength, coords, order=1, mode="constant", cval=0.0
        ).reshape(strength.shape)

    ahead = sample(ux, uy)
    behind = sample(-ux, -uy)
    keep = (magnitude == 0) | ((strength >= ahead) & (strength >= behind))
    return np.where(keep, strength, 0.0)


def fuse_boundaries(image_b, motion_b):
    """Combine image and motion boundary maps.

    Strengths are summed (clamped at 1) before non-maximum suppression, so
    an edge supported by either cue survives the thinning.
    """
    if image_b.shape != motion_b.shape:
        raise ValueError("boundary maps must share dimensions")
    fused = np.minimum(1.0, image_b + motion_b)
    return non_maximum_suppression(fused)


def motion_boundary_from_flow(flow):
    """Edge strengths from flow discontinuities, for flow methods that do
    not emit motion boundaries directly.

    The Frobenius norm of the flow Jacobian is scaled by its 95th
    percentile (the noise floor of estimated flow) and clamped to [0, 1].
    Noise-free fields can have a zero percentile while still carrying real
    discontinuities, so the maximum serves as the fallback scale.
    """
    magnitude = _jacobian_norm(flow)
    scale = np.percentile(magnitude, 95)
    if scale <= 0:
        scale = magnitude.max()
    if scale <= 0:
        return np.zeros_like(magnitude)
    return np.minimum(1.0, magnitude / scale)
