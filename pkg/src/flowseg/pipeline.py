"""Sequence driver: chains per-frame label propagation, resolves the
regularization weight by grid search, and loads sequence descriptions from
disk.

Frame 1 carries the given annotation; every later frame is segmented from
its predecessor's output, so errors include the 1-based frame number they
occurred on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import boundary_term, data_term, flow_consistency, media_io, solver
from .errors import (
    FlowSegError,
    NoEvidenceError,
    RejectedInputError,
    SequenceInconsistencyError,
)

log = logging.getLogger(__name__)

LAMBDA_GRID = tuple(range(5, 61, 5))
DEGENERATE_TAU_FALLBACK = 1.0

_SEQUENCE_KEYS = (
    "frame_glob",
    "flow_fw_glob",
    "flow_bw_glob",
    "boundary_glob",
    "motion_boundary_glob",
    "annotation",
    "prob_glob",
)


@dataclass
class SequenceSpec:
    """File layout of one sequence plus its run configuration."""

    frames: list
    flows_fw: list
    flows_bw: list
    annotation: Path
    boundaries: list | None
    motion_boundaries: list | None
    prob_files: list | None
    config: media_io.RunConfig


@dataclass
class LoadedSequence:
    """All arrays of one sequence, dimension-checked against frame 1."""

    frames: list
    flows_fw: list
    flows_bw: list
    annotation: np.ndarray
    n_labels: int
    boundaries: list | None
    motion_boundaries: list | None
    probs: list | None
    config: media_io.RunConfig

    @property
    def n_frames(self):
        return len(self.frames)


def _resolve_glob(pattern, base):
    if not pattern:
        return []
    if Path(pattern).is_absolute():
        return sorted(Path(pattern).parent.glob(Path(pattern).name))
    return sorted(base.glob(pattern))


def load_sequence_spec(path):
    """Parse a flat key-value sequence description file.

    Recognized keys are the RunConfig fields plus ``frame_glob``,
    ``flow_fw_glob``, ``flow_bw_glob``, ``boundary_glob``,
    ``motion_boundary_glob``, ``annotation`` and ``prob_glob``. Globs are
    resolved relative to the file's directory and sorted.
    """
    path = Path(path)
    config, leftover = media_io.parse_config_text(path.read_text())
    unknown = set(leftover) - set(_SEQUENCE_KEYS)
    if unknown:
        raise RejectedInputError(f"{path}: unknown keys {sorted(unknown)}")
    if "frame_glob" not in leftover or "annotation" not in leftover:
        raise RejectedInputError(f"{path}: frame_glob and annotation are required")
    base = path.parent

    frames = _resolve_glob(leftover["frame_glob"], base)
    if len(frames) < 2:
        raise RejectedInputError(f"{path}: need at least 2 frames, matched {len(frames)}")
    flows_fw = _resolve_glob(leftover.get("flow_fw_glob", ""), base)
    flows_bw = _resolve_glob(leftover.get("flow_bw_glob", ""), base)
    for name, flows in (("flow_fw_glob", flows_fw), ("flow_bw_glob", flows_bw)):
        if len(flows) != len(frames) - 1:
            raise SequenceInconsistencyError(
                f"{path}: {name} matched {len(flows)} files, expected {len(frames) - 1}"
            )
    annotation = base / leftover["annotation"]

    def optional_per_frame(key):
        if key not in leftover:
            return None
        files = _resolve_glob(leftover[key], base)
        if len(files) not in (len(frames), len(frames) - 1):
            raise SequenceInconsistencyError(
                f"{path}: {key} matched {len(files)} files, expected "
                f"{len(frames) - 1} or {len(frames)}"
            )
        return files

    boundaries = optional_per_frame("boundary_glob")
    motion_boundaries = optional_per_frame("motion_boundary_glob")
    prob_files = (
        _resolve_glob(leftover["prob_glob"], base) if "prob_glob" in leftover else None
    )
    return SequenceSpec(
        frames=frames,
        flows_fw=flows_fw,
        flows_bw=flows_bw,
        annotation=annotation,
        boundaries=boundaries,
        motion_boundaries=motion_boundaries,
        prob_files=prob_files,
        config=config,
    )


def _per_target(files, n_frames):
    """Normalize a per-frame file list to one entry per segmented frame."""
    return files[1:] if len(files) == n_frames else files


def _group_prob_files(files, n_frames, n_labels):
    """Split a sorted probability-map file list into per-frame groups."""
    per_frame_n = len(files) / n_frames
    per_target_n = len(files) / (n_frames - 1)
    if per_frame_n == n_labels or per_target_n == n_labels:
        group = n_labels
    elif per_frame_n == 1 or per_target_n == 1:
        if n_labels != 2:
            raise SequenceInconsistencyError(
                "single probability map per frame only supports 2 labels"
            )
        group = 1
    else:
        raise SequenceInconsistencyError(
            f"cannot group {len(files)} probability maps over {n_frames} frames "
            f"and {n_labels} labels"
        )
    groups = [files[i : i + group] for i in range(0, len(files), group)]
    if len(groups) == n_frames:
        groups = groups[1:]
    maps = []
    for paths in groups:
        if group == 1:
            fg = media_io.load_boundary(paths[0])
            maps.append(np.stack([1.0 - fg, fg], axis=-1))
        else:
            maps.append(media_io.load_probability_maps(paths))
    return maps


def load_sequence(spec):
    """Load every file of a sequence and enforce shared dimensions."""
    frames = [media_io.load_frame(p) for p in spec.frames]
    shape = frames[0].shape[:2]
    annotation, n_labels = media_io.load_mask(
        spec.annotation, n_labels=spec.config.n_labels
    )
    flows_fw = [media_io.load_flow(p) for p in spec.flows_fw]
    flows_bw = [media_io.load_flow(p) for p in spec.flows_bw]
    boundaries = (
        [media_io.load_boundary(p) for p in _per_target(spec.boundaries, len(frames))]
        if spec.boundaries
        else None
    )
    motion = (
        [
            media_io.load_boundary(p)
            for p in _per_target(spec.motion_boundaries, len(frames))
        ]
        if spec.motion_boundaries
        else None
    )
    probs = (
        _group_prob_files(spec.prob_files, len(frames), n_labels)
        if spec.prob_files
        else None
    )

    named = [("annotation", [annotation])]
    named.append(("frame", frames))
    named.append(("forward flow", flows_fw))
    named.append(("backward flow", flows_bw))
    if boundaries:
        named.append(("boundary map", boundaries))
    if motion:
        named.append(("motion boundary map", motion))
    if probs:
        named.append(("probability maps", probs))
    for name, arrays in named:
        for k, arr in enumerate(arrays):
            if arr.shape[:2] != shape:
                raise SequenceInconsistencyError(
                    f"{name} {k + 1}: shape {arr.shape[:2]} differs from frame 1 {shape}"
                )
    return LoadedSequence(
        frames=frames,
        flows_fw=flows_fw,
        flows_bw=flows_bw,
        annotation=annotation,
        n_labels=n_labels,
        boundaries=boundaries,
        motion_boundaries=motion,
        probs=probs,
        config=spec.config,
    )


def _perimeter_weight(loaded, t):
    """Perimeter weight for target frame t+1 (0-based pair index t)."""
    config = loaded.config
    if config.boundary_source == "gradient":
        return boundary_term.gradient_weight(loaded.frames[t + 1], config.gamma)
    if loaded.boundaries is None:
        raise RejectedInputError(
            f"boundary_source={config.boundary_source} requires boundary maps"
        )
    image_b = loaded.boundaries[t]
    if config.boundary_source == "learned":
        return boundary_term.learned_weight(image_b, config.beta, config.boundary_sign)
    if loaded.motion_boundaries is not None:
        motion_b = loaded.motion_boundaries[t]
    else:
        motion_b = boundary_term.motion_boundary_from_flow(loaded.flows_bw[t])
    fused = boundary_term.fuse_boundaries(image_b, motion_b)
    return boundary_term.learned_weight(fused, config.beta, config.boundary_sign)


def _build_frame_problem(loaded, t, prev_mask, color_model=None):
    """Everything of the t -> t+1 step that does not depend on lambda.

    Returns (cost volume with clamps, perimeter weight).
    """
    config = loaded.config
    forward = loaded.flows_fw[t]
    backward = loaded.flows_bw[t]
    tau = flow_consistency.resolve_tau(config, backward)
    if tau <= 0:
        log.warning(
            "frame %d: degenerate tau 0 (static scene), substituting %.1f px",
            t + 2,
            DEGENERATE_TAU_FALLBACK,
        )
        tau = DEGENERATE_TAU_FALLBACK
    conf = flow_consistency.confidence_map(forward, backward, tau)
    warped = flow_consistency.warp_labels(prev_mask, backward, conf)

    if config.data_term_source == "cnn_probabilities":
        if loaded.probs is None:
            raise RejectedInputError("data_term_source=cnn_probabilities needs prob maps")
        costs = data_term.cnn_costs(loaded.probs[t], loaded.n_labels)
    else:
        features = data_term.build_feature_image(
            loaded.frames[t + 1], backward, config.alpha, config.theta
        )
        scribbles = flow_consistency.sample_scribbles(
            warped, features, config.scribble_stride, loaded.n_labels
        )
        missing = scribbles.missing_labels()
        if config.lor_enabled and loaded.n_labels == 2 and missing:
            if color_model is None:
                color_model = data_term.build_color_model(
                    loaded.frames[0], loaded.annotation
                )
            retrieved = data_term.lost_object_retrieval(
                conf,
                loaded.frames[t + 1],
                color_model,
                missing,
                config.lor_color_threshold,
            )
            scribbles = data_term.merge_scribbles(scribbles, retrieved, features)
        if scribbles.total == 0:
            if not (warped != flow_consistency.UNKNOWN_LABEL).any():
                raise NoEvidenceError("no scribbles and no confident pixels")
            shape = warped.shape + (loaded.n_labels,)
            costs = data_term.CostVolume.from_costs(
                np.full(shape, data_term.MISSING_LABEL_COST)
            )
        else:
            costs = data_term.kde_costs(scribbles, features, config.sigma)
    costs = data_term.apply_clamps(costs, warped)
    weight = _perimeter_weight(loaded, t)
    return costs, weight


def _solver_limits(config):
    return solver.SolverLimits(
        max_iters=config.max_iters,
        extended_iters=config.extended_iters,
        extend_objective_threshold=config.extend_objective_threshold,
        min_decrease=config.min_decrease,
    )


def foreground_size(mask):
    """Number of pixels carrying any non-background label."""
    return int((mask != 0).sum())


def select_lambda(loaded, step_fn=None):
    """Grid-search the regularization weight on the first frame pair.

    Runs the frame 1 -> 2 step for every candidate in {5, 10, ..., 60} and
    keeps the one whose result deviates least in foreground size from the
    annotation (object size barely changes between adjacent frames). Ties go
    to the smaller candidate. ``step_fn(lam) -> mask`` replaces the real
    single step when given, which tests use.
    """
    if step_fn is None:
        color_model = data_term.build_color_model(loaded.frames[0], loaded.annotation)
        costs, weight = _build_frame_problem(loaded, 0, loaded.annotation, color_model)
        limits = _solver_limits(loaded.config)

        def step_fn(lam):
            mask, _ = solver.solve(costs, weight, lam, limits)
            return mask

    target = foreground_size(loaded.annotation)
    best_lam = None
    best_score = None
    for lam in LAMBDA_GRID:
        score = abs(foreground_size(step_fn(lam)) - target)
        if best_score is None or score < best_score:
            best_lam, best_score = lam, score
    log.info("lambda grid search selected %d (size deviation %d px)", best_lam, best_score)
    return float(best_lam)


def propagate(loaded, lam=None):
    """Chain the per-frame segmentation through the whole sequence.

    Returns (masks, reports): masks[0] is the annotation itself, masks[t]
    the solver output for frame t+1; reports align with the solved frames.
    """
    config = loaded.config
    if lam is None:
        lam = (
            config.lambda_value
            if config.lambda_mode == "fixed"
            else select_lambda(loaded)
        )
    limits = _solver_limits(config)
    color_model = data_term.build_color_model(loaded.frames[0], loaded.annotation)
    masks = [loaded.annotation.astype(np.int32)]
    reports = []
    for t in range(loaded.n_frames - 1):
        try:
            costs, weight = _build_frame_problem(loaded, t, masks[-1], color_model)
            mask, report = solver.solve(costs, weight, lam, limits)
        except (FlowSegError, ValueError) as exc:
            raise type(exc)(f"frame {t + 2}: {exc}") from exc
        masks.append(mask)
        reports.append(report)
        log.info(
            "frame %d/%d: %d iterations (%s), objective %.1f",
            t + 2,
            loaded.n_frames,
            report.iterations,
            report.termination,
            report.final_objective,
        )
    return masks, reports


def segment_sequence(spec):
    """Run the full propagation for a sequence description.

    ``spec`` is a SequenceSpec or the path of a sequence description file.
    Returns the list of label masks, one per frame, starting with the
    annotation.
    """
    if not isinstance(spec, SequenceSpec):
        spec = load_sequence_spec(spec)
    loaded = load_sequence(spec)
    masks, _ = propagate(loaded)
    return masks
