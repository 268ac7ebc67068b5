from typing import Optional


class DangerAssessmentError(Exception):
    """Base class for every error raised by the package."""


class ManifestError(DangerAssessmentError, ValueError):
    """Raised when a manifest line cannot be parsed or violates an invariant."""

    def __init__(
        self,
        message: str,
        line_number: Optional[int] = None,
        video_id: Optional[str] = None,
    ) -> None:
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line_number = line_number
        self.video_id = video_id


class RatingError(DangerAssessmentError, ValueError):
    """Raised when evaluator ratings cannot be aggregated."""


class SplitError(DangerAssessmentError, ValueError):
    """Raised when a dataset split would leave a partition empty."""


class FrameRangeError(DangerAssessmentError, IndexError):
    """Raised when a frame plan points past the end of a video stream."""

    def __init__(self, video_id: str, index: int, frame_count: int) -> None:
        super().__init__(
            f"Frame index {index} is beyond the end of video '{video_id}' "
            f"({frame_count} frames); the manifest segment does not match the media."
        )
        self.video_id = video_id
        self.index = index
        self.frame_count = frame_count


class EmbeddingError(DangerAssessmentError, ValueError):
    """Raised on invalid embedding inputs or outputs."""


class BackendError(DangerAssessmentError, RuntimeError):
    """Raised when an embedding backend is unreachable or fails."""

    def __init__(self, backend_id: str, message: str) -> None:
        super().__init__(f"Backend '{backend_id}': {message}")
        self.backend_id = backend_id


class CacheFormatError(DangerAssessmentError, ValueError):
    """Raised when an embedding cache file is unreadable."""


class BadMagicError(CacheFormatError):
    """The cache file does not start with the expected magic bytes."""


class UnsupportedVersionError(CacheFormatError):
    """The cache file declares a format version this build cannot read."""


class TruncatedPayloadError(CacheFormatError):
    """The cache file holds fewer bytes than its header declares."""


class ChecksumMismatchError(CacheFormatError):
    """The payload CRC32 does not match the stored checksum."""


class ModelError(DangerAssessmentError, ValueError):
    """Raised when a model cannot be trained or applied."""


class DimensionMismatchError(ModelError):
    """Feature dimension differs from what the model expects."""


class ModelKindError(ModelError):
    """An artifact of the wrong kind was handed to a prediction function."""


class SingleClassError(ModelError):
    """Training data holds only one alert class."""


class NonFiniteLossError(ModelError):
    """Training loss became NaN or infinite."""

    def __init__(self, epoch: int, loss: float) -> None:
        super().__init__(f"Non-finite training loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


class ConvergenceError(ModelError):
    """The solver hit its iteration cap before converging."""


class TargetRangeError(ModelError):
    """A regression target lies outside the rating scale."""


class ArtifactError(DangerAssessmentError, ValueError):
    """Raised when a model artifact file cannot be read."""


class CorruptArtifactError(ArtifactError):
    """The artifact file is truncated or fails its checksum."""


class ArtifactVersionError(ArtifactError):
    """The artifact was written by a newer format version."""


class ConfigError(DangerAssessmentError, ValueError):
    """Raised when an experiment config has invariant violations."""

    def __init__(self, violations: list[str]) -> None:
        super().__init__("Invalid experiment config:\n- " + "\n- ".join(violations))
        self.violations = violations


class RequirementError(DangerAssessmentError):
    """Raised when a run lacks user-supplied inputs such as data or backends."""


class FrameDecodeError(DangerAssessmentError, RuntimeError):
    """Raised when a video file cannot be opened or a frame cannot be decoded."""

    def __init__(self, video_id: str, message: str) -> None:
        super().__init__(f"Video '{video_id}': {message}")
        self.video_id = video_id
