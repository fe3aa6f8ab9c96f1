"""Synthetic sequences with analytic flows and exact ground truth.

These generators drive the demos and the verification suite: scenes are
simple enough that the correct flow fields, confidence structure and masks
are known in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import media_io


@dataclass
class SyntheticSequence:
    """In-memory sequence plus its ground truth."""

    frames: list
    flows_fw: list
    flows_bw: list
    gt_masks: list

    @property
    def n_frames(self):
        return len(self.frames)


def _draw_square(canvas, top_left, size, value):
    row, col = top_left
    canvas[row : row + size, col : col + size] = value


def translating_square(
    n_frames=10,
    height=64,
    width=64,
    square=20,
    start=(22, 6),
    velocity=(2, 0),
    bg_color=(30.0, 30.0, 30.0),
    fg_color=(220.0, 60.0, 60.0),
):
    """Square gliding over a flat background under a global translation.

    The whole scene translates by ``velocity`` (dx, dy) per frame, so the
    constant flow fields are exactly cycle-consistent and the ground-truth
    masks are shifted copies of the first.
    """
    dx, dy = velocity
    frames, gt_masks = [], []
    for t in range(n_frames):
        frame = np.empty((height, width, 3))
        frame[:] = bg_color
        mask = np.zeros((height, width), dtype=np.int32)
        row = start[0] + t * dy
        col = start[1] + t * dx
        for c in range(3):
            _draw_square(frame[:, :, c], (row, col), square, fg_color[c])
        _draw_square(mask, (row, col), square, 1)
        frames.append(frame)
        gt_masks.append(mask)
    flow_fw = np.zeros((height, width, 2))
    flow_fw[:, :, 0] = dx
    flow_fw[:, :, 1] = dy
    flow_bw = -flow_fw
    flows_fw = [flow_fw.copy() for _ in range(n_frames - 1)]
    flows_bw = [flow_bw.copy() for _ in range(n_frames - 1)]
    return SyntheticSequence(frames, flows_fw, flows_bw, gt_masks)


def occlusion_square(
    n_frames=10,
    height=48,
    width=112,
    square=12,
    square_row=18,
    start_col=4,
    speed=8,
    bar=(36, 60),
    bg_color=(40.0, 40.0, 40.0),
    bar_color=(90.0, 90.0, 90.0),
    fg_color=(200.0, 120.0, 40.0),
):
    """Square that passes behind a static vertical bar and reappears.

    The bar belongs to the background, so while the square is hidden its
    label vanishes from the ground truth. Flows move only the visible part
    of the square; disoccluded pixels are cycle-inconsistent by ``speed``
    pixels, which puts them below any confidence threshold smaller than
    ``speed``.
    """
    bar_lo, bar_hi = bar

    def square_cols(t):
        col = start_col + t * speed
        return col, col + square

    def visible(t):
        lo, hi = square_cols(t)
        cols = np.zeros(width, dtype=bool)
        cols[max(lo, 0) : min(hi, width)] = True
        cols[bar_lo:bar_hi] = False
        mask = np.zeros((height, width), dtype=bool)
        mask[square_row : square_row + square, :] = cols
        return mask

    frames, gt_masks, flows_fw, flows_bw = [], [], [], []
    for t in range(n_frames):
        frame = np.empty((height, width, 3))
        frame[:] = bg_color
        frame[:, bar_lo:bar_hi] = bar_color
        vis = visible(t)
        frame[vis] = fg_color
        mask = np.zeros((height, width), dtype=np.int32)
        mask[vis] = 1
        frames.append(frame)
        gt_masks.append(mask)
    for t in range(n_frames - 1):
        fw = np.zeros((height, width, 2))
        fw[visible(t), 0] = speed
        bw = np.zeros((height, width, 2))
        bw[visible(t + 1), 0] = -speed
        flows_fw.append(fw)
        flows_bw.append(bw)
    return SyntheticSequence(frames, flows_fw, flows_bw, gt_masks)


def occlusion_timeline(n_frames=10, square=12, start_col=4, speed=8, bar=(36, 60), width=112):
    """Frame indices (0-based) where the square is fully hidden / fully back."""
    hidden, reappeared = [], []
    bar_lo, bar_hi = bar
    for t in range(n_frames):
        lo = start_col + t * speed
        hi = lo + square
        if lo >= bar_lo and hi <= bar_hi:
            hidden.append(t)
        elif lo >= bar_hi and hi <= width:
            reappeared.append(t)
    return hidden, reappeared


def write_sequence(seq, root, config_lines=(), gt_dir=None):
    """Materialize a synthetic sequence as files plus a description file.

    Returns the path of the written sequence description. Ground-truth
    masks go to ``gt_dir`` when given (for evaluation runs).
    """
    root = Path(root)
    for sub in ("frames", "flow_fw", "flow_bw"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(seq.frames):
        media_io.save_frame(frame, root / "frames" / f"{t + 1:05d}.png")
    for t in range(seq.n_frames - 1):
        media_io.save_flow(seq.flows_fw[t], root / "flow_fw" / f"{t + 1:05d}.flo")
        media_io.save_flow(seq.flows_bw[t], root / "flow_bw" / f"{t + 1:05d}.flo")
    media_io.save_mask(seq.gt_masks[0], root / "annotation.png")
    if gt_dir is not None:
        gt_dir = Path(gt_dir)
        gt_dir.mkdir(parents=True, exist_ok=True)
        for t, mask in enumerate(seq.gt_masks):
            media_io.save_mask(mask, gt_dir / f"{t + 1:05d}.png")
    lines = [
        "frame_glob = frames/*.png",
        "flow_fw_glob = flow_fw/*.flo",
        "flow_bw_glob = flow_bw/*.flo",
        "annotation = annotation.png",
        *config_lines,
    ]
    spec_path = root / "sequence.cfg"
    spec_path.write_text("\n".join(lines) + "\n")
    return spec_path
