"""Exception types shared across the package."""


class FlowSegError(Exception):
    """Base class for all flowseg errors."""


class MediaFormatError(FlowSegError):
    """File container is not what the reader expects (magic, mode, channels)."""


class CorruptFileError(FlowSegError):
    """File container recognized but the payload is truncated or inconsistent."""


class RejectedInputError(FlowSegError):
    """File decoded fine but its contents violate an input contract."""


class SequenceInconsistencyError(FlowSegError):
    """Files belonging to one sequence disagree (dimensions, label counts)."""


class NoEvidenceError(FlowSegError):
    """No scribble of any label is available to build a data term from."""


class DivergenceError(FlowSegError):
    """Solver objective became non-finite, which indicates bad inputs."""
