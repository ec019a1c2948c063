#!/usr/bin/env python3
"""
Errors - Exception hierarchy shared by every label view management module
"""
from typing import Optional


class LabelViewError(Exception):
    """Base class for all errors raised by this package"""


class ConfigError(LabelViewError, ValueError):
    """Invalid or inconsistent configuration (usage error)"""


class DataError(LabelViewError, ValueError):
    """Problem with trajectory or scene data"""


class TrajectoryParseError(DataError):
    """Malformed trajectory CSV row"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateTimestampError(DataError):
    """Two samples of the same entity share a timestamp"""


class OutOfRangeError(DataError):
    """Query time outside a track's sampled range"""


class ParameterError(DataError):
    """Invalid generator or splitter parameter"""


class SceneError(DataError):
    """Scene file or manifest problem"""


class GeometryError(LabelViewError, ValueError):
    """Degenerate camera or projection"""


class SimulationError(LabelViewError):
    """World stepping failure"""


class MissingActionError(SimulationError):
    """An active label received no action"""


class EpisodeFinished(SimulationError):
    """The world was stepped past the end of its scene"""


class MetricsError(LabelViewError, ValueError):
    """Metrics requested from an empty accumulator"""


class ObservationError(LabelViewError):
    """A label or its target cannot be encoded (behind the camera)"""


class NetworkError(LabelViewError):
    """Neural network failure"""


class ShapeMismatchError(NetworkError, ValueError):
    """Input shape does not match a layer"""


class CheckpointError(LabelViewError):
    """Checkpoint cannot be read"""


class CorruptCheckpointError(CheckpointError):
    """Bad magic string or truncated checkpoint"""


class CheckpointVersionError(CheckpointError):
    """Checkpoint written by another format version"""


class IncompatibleCheckpointError(CheckpointError):
    """Checkpoint fingerprint does not match the configuration"""


class TrainingDivergenceError(LabelViewError):
    """NaN or infinite loss/gradient during training"""


class PolicyCorruptionError(LabelViewError):
    """Policy produced non-finite outputs"""
