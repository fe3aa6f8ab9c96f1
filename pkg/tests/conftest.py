import numpy as np
import pytest

from flowseg.media_io import RunConfig
from flowseg.pipeline import LoadedSequence
from flowseg.synthetic import translating_square, write_sequence


def loaded_from_synthetic(seq, config, **overrides):
    fields = dict(
        frames=seq.frames,
        flows_fw=seq.flows_fw,
        flows_bw=seq.flows_bw,
        annotation=seq.gt_masks[0],
        n_labels=2,
        boundaries=None,
        motion_boundaries=None,
        probs=None,
        config=config,
    )
    fields.update(overrides)
    return LoadedSequence(**fields)


@pytest.fixture(scope="session")
def square_sequence():
    return translating_square(n_frames=6, height=48, width=48, square=16, start=(16, 6))


@pytest.fixture(scope="session")
def square_sequence_dir(tmp_path_factory, square_sequence):
    """Translating-square sequence written to disk, with fixed lambda for speed."""
    root = tmp_path_factory.mktemp("square_seq")
    spec_path = write_sequence(
        square_sequence,
        root,
        config_lines=["lambda_mode = fixed(10)"],
        gt_dir=root / "gt",
    )
    return spec_path, root / "gt", square_sequence


def fast_config(**kwargs):
    defaults = dict(lambda_mode="fixed", lambda_value=10.0)
    defaults.update(kwargs)
    return RunConfig(**defaults)
