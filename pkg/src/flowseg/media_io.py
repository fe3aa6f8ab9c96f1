"""Readers and writers for frames, flow fields, masks, boundary maps,
probability maps and run configuration.

All loaders validate their input and return plain numpy arrays; loaded
arrays are never mutated by the rest of the package, so they can be shared
freely between threads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    CorruptFileError,
    MediaFormatError,
    RejectedInputError,
    SequenceInconsistencyError,
)

log = logging.getLogger(__name__)

FLO_MAGIC = np.float32(202021.25)  # little-endian bytes b"PIEH"
FLO_SENTINEL_MAGNITUDE = 1e9
FLO_MAX_NAN_FRACTION = 0.10
FLO_MAX_DIMENSION = 10**8


@dataclass(frozen=True)
class FlowLoadReport:
    """What load-time repair did to a flow field."""

    sentinels_replaced: int = 0
    nonfinite_replaced: int = 0

    @property
    def total_replaced(self) -> int:
        return self.sentinels_replaced + self.nonfinite_replaced


def load_flow(path, return_report=False):
    """Read a Middlebury .flo file into an (H, W, 2) float32 array.

    Components are (dx, dy) per pixel. Values whose magnitude exceeds
    ``FLO_SENTINEL_MAGNITUDE`` (the conventional invalid-pixel sentinel) and
    non-finite values are replaced by zero; the counts are logged and, with
    ``return_report=True``, returned in a :class:`FlowLoadReport`.

    Raises ``MediaFormatError`` on a bad magic tag, ``CorruptFileError`` on a
    truncated payload and ``RejectedInputError`` when more than 10% of the
    components are NaN.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12:
        raise MediaFormatError(f"{path}: too short to be a flow file")
    magic = np.frombuffer(raw, dtype="<f4", count=1)[0]
    if magic != FLO_MAGIC:
        raise MediaFormatError(f"{path}: bad magic tag, not a .flo file")
    width, height = (int(v) for v in np.frombuffer(raw, dtype="<i4", count=2, offset=4))
    if not (1 <= width <= FLO_MAX_DIMENSION and 1 <= height <= FLO_MAX_DIMENSION):
        raise CorruptFileError(f"{path}: implausible dimensions {width}x{height}")
    count = width * height * 2
    payload_bytes = len(raw) - 12
    payload = np.frombuffer(raw, dtype="<f4", count=payload_bytes // 4, offset=12)
    if payload.size < count:
        raise CorruptFileError(
            f"{path}: payload holds {payload.size} floats, expected {count}"
        )
    flow = payload[:count].reshape(height, width, 2).copy()

    nonfinite = ~np.isfinite(flow)
    nan_fraction = np.isnan(flow).mean()
    if nan_fraction > FLO_MAX_NAN_FRACTION:
        raise RejectedInputError(
            f"{path}: {nan_fraction:.1%} NaN components exceeds the "
            f"{FLO_MAX_NAN_FRACTION:.0%} limit"
        )
    sentinels = np.abs(flow) > FLO_SENTINEL_MAGNITUDE
    sentinels &= ~nonfinite
    report = FlowLoadReport(
        sentinels_replaced=int(sentinels.sum()),
        nonfinite_replaced=int(nonfinite.sum()),
    )
    if report.total_replaced:
        flow[sentinels | nonfinite] = 0.0
        log.warning(
            "%s: replaced %d sentinel and %d non-finite flow components with 0",
            path,
            report.sentinels_replaced,
            report.nonfinite_replaced,
        )
    if return_report:
        return flow, report
    return flow


def save_flow(flow, path):
    """Write an (H, W, 2) flow array as a Middlebury .flo file."""
    flow = np.asarray(flow, dtype="<f4")
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must have shape (H, W, 2), got {flow.shape}")
    height, width = flow.shape[:2]
    with open(path, "wb") as fh:
        np.array([FLO_MAGIC], dtype="<f4").tofile(fh)
        np.array([width, height], dtype="<i4").tofile(fh)
        np.ascontiguousarray(flow).tofile(fh)


def make_label_palette():
    """256-entry RGB palette; entry k is the display color of label k.

    Bit-reversal construction, the de-facto standard for indexed
    segmentation masks: label 0 is black and consecutive labels get
    well-separated colors.
    """
    palette = np.zeros((256, 3), dtype=np.uint8)
    for k in range(256):
        label = k
        for shift in range(8):
            palette[k, 0] |= ((label >> 0) & 1) << (7 - shift)
            palette[k, 1] |= ((label >> 1) & 1) << (7 - shift)
            palette[k, 2] |= ((label >> 2) & 1) << (7 - shift)
            label >>= 3
    return palette


_LABEL_PALETTE = make_label_palette()


def _read_label_array(path):
    """Raw label indices from a paletted or single-channel image file."""
    with Image.open(path) as img:
        if img.mode == "P":
            return np.asarray(img, dtype=np.int32)
        if img.mode in ("L", "I", "I;16"):
            return np.asarray(img, dtype=np.int32)
        raise MediaFormatError(
            f"{path}: masks must be paletted or single-channel, got mode {img.mode}"
        )


def _validate_labels(labels, n_labels, path):
    present = np.unique(labels)
    if present.min() < 0:
        raise RejectedInputError(f"{path}: negative label values")
    max_label = int(present.max())
    if n_labels is None:
        n_labels = max_label + 1
    elif max_label >= n_labels:
        raise RejectedInputError(
            f"{path}: label {max_label} outside declared range 0..{n_labels - 1}"
        )
    if n_labels < 2:
        raise RejectedInputError(
            f"{path}: needs at least 2 labels (background plus one object), "
            f"got {n_labels}; pass n_labels to declare the label count"
        )
    expected = np.arange(max_label + 1)
    if present.size != expected.size or not np.array_equal(present, expected):
        raise RejectedInputError(
            f"{path}: labels must be contiguous 0..n-1, found {present.tolist()}"
        )
    return n_labels


def load_mask(path, n_labels=None):
    """Read a label mask; returns ((H, W) int32 labels, n_labels).

    Label identity is the palette index for paletted files and the raw
    pixel value for single-channel files. Labels must be contiguous
    integers starting at 0. When ``n_labels`` is given it declares the label
    count (so frames where an object is hidden still validate); otherwise
    the count is inferred as max label + 1 and must be at least 2.
    """
    labels = _read_label_array(path)
    n_labels = _validate_labels(labels, n_labels, path)
    return labels, n_labels


def load_mask_sequence(paths):
    """Read aligned masks of one sequence; returns (masks, n_labels).

    The label count is inferred from the union of all frames, so frames
    where an object is hidden validate fine as long as the union stays
    contiguous.
    """
    paths = list(paths)
    if not paths:
        raise RejectedInputError("no mask files given")
    arrays = [_read_label_array(p) for p in paths]
    shape = arrays[0].shape
    for p, a in zip(paths, arrays):
        if a.shape != shape:
            raise SequenceInconsistencyError(
                f"{p}: mask shape {a.shape} differs from first frame {shape}"
            )
    union = np.unique(np.concatenate([np.unique(a) for a in arrays]))
    if union.min() < 0:
        raise RejectedInputError("negative label values in mask sequence")
    n_labels = int(union.max()) + 1
    if n_labels < 2:
        raise RejectedInputError("mask sequence contains no non-background label")
    if not np.array_equal(union, np.arange(n_labels)):
        raise RejectedInputError(
            f"mask sequence labels must be contiguous 0..n-1, found {union.tolist()}"
        )
    return arrays, n_labels


def save_mask(mask, path):
    """Write a label mask as a paletted PNG (or grayscale PGM).

    Round-trips exactly with :func:`load_mask`.
    """
    mask = np.asarray(mask)
    if mask.min() < 0 or mask.max() > 255:
        raise ValueError("mask labels must fit in 0..255")
    data = mask.astype(np.uint8)
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        Image.fromarray(data, mode="L").save(path)
        return
    img = Image.fromarray(data, mode="P")
    img.putpalette(_LABEL_PALETTE.flatten().tolist())
    img.save(path)


def load_frame(path):
    """Read a color frame into an (H, W, 3) float64 array in [0, 255]."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float64)


def save_frame(frame, path):
    """Write an (H, W, 3) array in [0, 255] as an 8-bit image."""
    data = np.clip(np.asarray(frame), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)


def _scalar_map_from_image(path):
    with Image.open(path) as img:
        if img.mode == "L":
            return np.asarray(img, dtype=np.float64) / 255.0
        if img.mode in ("I", "I;16"):
            return np.asarray(img, dtype=np.float64) / 65535.0
        raise MediaFormatError(
            f"{path}: expected an 8-bit or 16-bit single-channel image, "
            f"got mode {img.mode}"
        )


def load_boundary(path):
    """Read a boundary-strength map, normalized to [0, 1].

    8-bit maps are divided by 255, 16-bit maps by 65535. The same container
    is used for learned image boundaries and for motion boundaries.
    """
    strength = _scalar_map_from_image(path)
    if strength.min() < 0.0 or strength.max() > 1.0:
        raise RejectedInputError(f"{path}: boundary strengths outside [0, 1]")
    return strength


def load_probability_maps(paths):
    """Read per-label probability maps into an (H, W, n) array.

    ``paths`` lists one single-channel file per label, in label order. Each
    map is normalized by its container maximum, then the stack is
    renormalized per pixel to sum to 1 (pixels whose raw sum is zero get the
    uniform distribution).
    """
    paths = list(paths)
    if len(paths) < 2:
        raise RejectedInputError("need probability maps for at least 2 labels")
    maps = [_scalar_map_from_image(p) for p in paths]
    shape = maps[0].shape
    for p, m in zip(paths, maps):
        if m.shape != shape:
            raise SequenceInconsistencyError(
                f"{p}: probability map shape {m.shape} differs from {shape}"
            )
    probs = np.stack(maps, axis=-1)
    sums = probs.sum(axis=-1, keepdims=True)
    n = probs.shape[-1]
    uniform = np.full_like(probs, 1.0 / n)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(sums > 0, probs / np.where(sums > 0, sums, 1.0), uniform)
    return probs


def save_scalar_map(values, path):
    """Write a [0, 1] scalar map as an 8-bit grayscale image."""
    data = np.clip(np.asarray(values) * 255.0, 0, 255).round().astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def save_overlay(frame, mask, path, opacity=0.5):
    """Write the frame with non-background labels tinted by their palette color."""
    frame = np.asarray(frame, dtype=np.float64)
    colors = _LABEL_PALETTE[np.asarray(mask)]
    blend = frame.copy()
    fg = np.asarray(mask) > 0
    blend[fg] = (1 - opacity) * frame[fg] + opacity * colors[fg]
    save_frame(blend, path)


# --------------------------------------------------------------------------
# Run configuration


@dataclass
class RunConfig:
    """All tunable parameters of a propagation run.

    ``tau_mode`` selects how the flow-consistency threshold is chosen:
    ``"fixed"`` uses ``tau_value`` (default 5), ``"mean_flow_magnitude"``
    uses the mean backward-flow magnitude of each frame pair. ``lambda_mode``
    is either ``"fixed"`` (use ``lambda_value``) or ``"grid_search"`` over
    {5, 10, ..., 60} on the first frame pair.
    """

    tau_mode: str = "fixed"
    tau_value: float = 5.0
    lambda_mode: str = "grid_search"
    lambda_value: float = 30.0
    sigma: float = 64.0
    gamma: float = 1.0 / 255.0
    alpha: float = 0.5
    theta: float = 0.5
    beta: float = 1.0
    boundary_sign: str = "discount"
    lor_enabled: bool = True
    lor_color_threshold: float = 5.0
    scribble_stride: int = 4
    boundary_source: str = "gradient"
    data_term_source: str = "kde"
    max_iters: int = 3000
    extended_iters: int = 6000
    extend_objective_threshold: float = 600000.0
    min_decrease: float = 10.0
    n_labels: int | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.tau_mode not in ("fixed", "mean_flow_magnitude"):
            raise RejectedInputError(f"unknown tau_mode {self.tau_mode!r}")
        if self.lambda_mode not in ("fixed", "grid_search"):
            raise RejectedInputError(f"unknown lambda_mode {self.lambda_mode!r}")
        if self.boundary_source not in ("gradient", "learned", "learned_plus_motion"):
            raise RejectedInputError(
                f"unknown boundary_source {self.boundary_source!r}"
            )
        if self.data_term_source not in ("kde", "cnn_probabilities"):
            raise RejectedInputError(
                f"unknown data_term_source {self.data_term_source!r}"
            )
        if self.boundary_sign not in ("discount", "literal"):
            raise RejectedInputError(f"unknown boundary_sign {self.boundary_sign!r}")
        positive = {
            "tau_value": self.tau_value,
            "lambda_value": self.lambda_value,
            "sigma": self.sigma,
            "gamma": self.gamma,
            "beta": self.beta,
            "lor_color_threshold": self.lor_color_threshold,
            "extend_objective_threshold": self.extend_objective_threshold,
        }
        for name, value in positive.items():
            if not value > 0:
                raise RejectedInputError(f"{name} must be > 0, got {value}")
        for name, value in (("alpha", self.alpha), ("theta", self.theta)):
            if not 0.0 <= value <= 1.0:
                raise RejectedInputError(f"{name} must be in [0, 1], got {value}")
        if self.scribble_stride < 1:
            raise RejectedInputError("scribble_stride must be >= 1")
        if self.max_iters < 1 or self.extended_iters < self.max_iters:
            raise RejectedInputError("iteration limits must satisfy 1 <= max <= extended")

    def with_updates(self, **kwargs):
        return replace(self, **kwargs)


_CONFIG_BOOL_FIELDS = {"lor_enabled"}
_CONFIG_INT_FIELDS = {"max_iters", "extended_iters", "scribble_stride", "n_labels"}
_CONFIG_MODE_FIELDS = {"tau_mode": "tau_value", "lambda_mode": "lambda_value"}


def _parse_bool(value, key):
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise RejectedInputError(f"config key {key}: cannot parse boolean {value!r}")


def parse_config_items(items):
    """Build a RunConfig from (key, value) string pairs.

    Mode fields accept an inline value, e.g. ``tau_mode = fixed(5.0)`` or
    ``lambda_mode = grid_search``.
    """
    known = {f.name for f in fields(RunConfig)}
    kwargs = {}
    for key, value in items:
        if key not in known:
            raise RejectedInputError(f"unknown config key {key!r}")
        if key in _CONFIG_MODE_FIELDS:
            mode, _, rest = value.partition("(")
            kwargs[key] = mode.strip()
            if rest:
                if not rest.endswith(")"):
                    raise RejectedInputError(f"config key {key}: unclosed '(' in {value!r}")
                kwargs[_CONFIG_MODE_FIELDS[key]] = float(rest[:-1])
        elif key in _CONFIG_BOOL_FIELDS:
            kwargs[key] = _parse_bool(value, key)
        elif key in _CONFIG_INT_FIELDS:
            kwargs[key] = int(value)
        else:
            try:
                kwargs[key] = float(value)
            except ValueError:
                kwargs[key] = value
    return RunConfig(**kwargs)


def parse_config_text(text):
    """Parse the flat ``key = value`` run-configuration format.

    Blank lines and ``#`` comments are ignored. Returns the (RunConfig,
    leftover) pair where leftover holds keys that are not RunConfig fields,
    so sequence descriptions can share the same file format.
    """
    config_items = []
    leftover = {}
    known = {f.name for f in fields(RunConfig)}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RejectedInputError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in known:
            config_items.append((key, value))
        else:
            leftover[key] = value
    return parse_config_items(config_items), leftover


def load_config(path):
    """Read a RunConfig from a flat key-value text file."""
    config, leftover = parse_config_text(Path(path).read_text())
    if leftover:
        raise RejectedInputError(
            f"{path}: unknown config keys {sorted(leftover)}"
        )
    return config
