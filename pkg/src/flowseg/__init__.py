"""Video object segmentation tracking from generic flow and boundary cues.

A key-frame annotation is propagated frame by frame: forward-backward flow
consistency decides which labels can be copied outright, kernel-density or
CNN-probability data terms score the remaining pixels, and a
boundary-weighted convex partitioning model solved by a primal-dual scheme
produces each frame's mask.
"""

from .boundary_term import (
    fuse_boundaries,
    gradient_weight,
    learned_weight,
    motion_boundary_from_flow,
    non_maximum_suppression,
)
from .data_term import (
    CostVolume,
    apply_clamps,
    build_color_model,
    build_feature_image,
    cnn_costs,
    kde_costs,
    lost_object_retrieval,
    merge_scribbles,
)
from .errors import (
    CorruptFileError,
    DivergenceError,
    FlowSegError,
    MediaFormatError,
    NoEvidenceError,
    RejectedInputError,
    SequenceInconsistencyError,
)
from .flow_consistency import (
    UNKNOWN_LABEL,
    ConfidenceMap,
    ScribbleSet,
    confidence_map,
    fb_distance,
    fb_distance_field,
    resolve_tau,
    sample_scribbles,
    warp_labels,
)
from .media_io import (
    RunConfig,
    load_boundary,
    load_config,
    load_flow,
    load_frame,
    load_mask,
    load_mask_sequence,
    load_probability_maps,
    save_flow,
    save_frame,
    save_mask,
    save_overlay,
)
from .metrics import EvalResult, boundary_f, evaluate_sequence, jaccard
from .pipeline import (
    LoadedSequence,
    SequenceSpec,
    load_sequence,
    load_sequence_spec,
    propagate,
    segment_sequence,
    select_lambda,
)
from .solver import SolverLimits, SolverReport, objective, one_hot, project_simplex, solve

__version__ = "0.1.0"

__all__ = [
    "CostVolume",
    "ConfidenceMap",
    "CorruptFileError",
    "DivergenceError",
    "EvalResult",
    "FlowSegError",
    "LoadedSequence",
    "MediaFormatError",
    "NoEvidenceError",
    "RejectedInputError",
    "RunConfig",
    "ScribbleSet",
    "SequenceInconsistencyError",
    "SequenceSpec",
    "SolverLimits",
    "SolverReport",
    "UNKNOWN_LABEL",
    "apply_clamps",
    "boundary_f",
    "build_color_model",
    "build_feature_image",
    "cnn_costs",
    "confidence_map",
    "evaluate_sequence",
    "fb_distance",
    "fb_distance_field",
    "fuse_boundaries",
    "gradient_weight",
    "jaccard",
    "kde_costs",
    "learned_weight",
    "load_boundary",
    "load_config",
    "load_flow",
    "load_frame",
    "load_mask",
    "load_mask_sequence",
    "load_probability_maps",
    "load_sequence",
    "load_sequence_spec",
    "lost_object_retrieval",
    "merge_scribbles",
    "motion_boundary_from_flow",
    "non_maximum_suppression",
    "objective",
    "one_hot",
    "project_simplex",
    "propagate",
    "resolve_tau",
    "sample_scribbles",
    "save_flow",
    "save_frame",
    "save_mask",
    "save_overlay",
    "segment_sequence",
    "select_lambda",
    "solve",
    "warp_labels",
]
