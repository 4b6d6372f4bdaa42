"""Domain exceptions shared by the tracker, the CLI and the HTTP API."""

from typing import Optional


class TrackingError(Exception):
    """Base class for every error raised by the tracking engine."""

    exit_code = 3


class InvalidBoxError(TrackingError, ValueError):
    pass


class InvalidDetectionError(TrackingError, ValueError):
    pass


class DegenerateEmbeddingError(TrackingError, ValueError):
    pass


class DimensionMismatchError(TrackingError, ValueError):
    pass


class DegenerateStateError(TrackingError):
    pass


class SequencingError(TrackingError):
    pass


class EmptyGroundTruthError(TrackingError, ValueError):
    pass


class ScenarioError(TrackingError, ValueError):
    exit_code = 1


class InvariantViolation(TrackingError):
    pass


class InputFormatError(TrackingError):
    """A file did not conform to one of the supported formats."""

    exit_code = 2

    def __init__(self, message: str, source: Optional[str] = None, line_no: Optional[int] = None):
        self.source = source
        self.line_no = line_no
        location = ""
        if source is not None:
            location = f"{source}:{line_no}: " if line_no is not None else f"{source}: "
        elif line_no is not None:
            location = f"line {line_no}: "
        super().__init__(f"{location}{message}")


class ParseError(InputFormatError):
    pass


class EmbeddingFormatError(InputFormatError):
    pass
