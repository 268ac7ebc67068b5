from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import FrameRangeError
from ..extractors.frame_source import FrameSource
from ..extractors.manifest_extractor import VideoManifestEntry

DEFAULT_FRAME_COUNT = 50


@dataclass(frozen=True)
class TemporalSegment:
    """Inclusive frame interval where the danger of a video concentrates."""

    start_frame: int
    end_frame: int

    def __post_init__(self) -> None:
        if self.start_frame < 0 or self.start_frame > self.end_frame:
            raise ValueError(
                f"Invalid segment [{self.start_frame}, {self.end_frame}]"
            )

    @classmethod
    def of(cls, entry: VideoManifestEntry) -> "TemporalSegment":
        """Builds the segment declared by a manifest entry."""
        return cls(entry.segment_start_frame, entry.segment_end_frame)

    @property
    def length(self) -> int:
        """Number of frames in the segment, endpoints included."""
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class FramePlan:
    """Frame indices to decode for one video."""

    video_id: str
    indices: tuple[int, ...]
    count: int

    def to_record(self) -> dict[str, Any]:
        """Returns the plan as a JSON-ready dict."""
        return {"video_id": self.video_id, "indices": list(self.indices)}


class FrameSampler:
    """Selects and decodes equally spaced frames inside a temporal segment."""

    @staticmethod
    def sample_indices(
        segment: TemporalSegment,
        count: int = DEFAULT_FRAME_COUNT,
        video_id: str = "",
    ) -> FramePlan:
        """Spreads `count` indices evenly over a segment, both endpoints included.

        Index i is start + round(i * (end - start) / (count - 1)), rounding half
        to even in exact integer arithmetic. Segments shorter than `count` yield
        repeated indices.

        Args:
            segment: The temporal segment.
            count: The number of frames to select.
            video_id: The id of the video the plan belongs to.

        Returns:
            The frame plan.
        """
        if count < 1:
            raise ValueError(f"count must be positive, got {count}")
        if count == 1:
            return FramePlan(video_id, (segment.start_frame,), 1)

        span = segment.end_frame - segment.start_frame
        denominator = count - 1
        quotient, remainder = np.divmod(np.arange(count, dtype=np.int64) * span, denominator)
        twice = 2 * remainder
        round_up = (twice > denominator) | ((twice == denominator) & (quotient % 2 == 1))
        indices = segment.start_frame + quotient + round_up.astype(np.int64)
        return FramePlan(video_id, tuple(int(i) for i in indices), count)

    @staticmethod
    def extract_frames(source: FrameSource, plan: FramePlan) -> list[np.ndarray]:
        """Decodes the frames of a plan in plan order.

        Args:
            source: The frame source of the video.
            plan: The frame plan.

        Returns:
            One 8-bit RGB image per plan index.

        Raises:
            FrameRangeError: If an index lies beyond the end of the stream.
        """
        frame_count = source.frame_count()
        for index in plan.indices:
            if index >= frame_count:
                raise FrameRangeError(plan.video_id, index, frame_count)

        decoded: dict[int, np.ndarray] = {}
        frames = []
        for index in plan.indices:
            if index not in decoded:
                image = np.asarray(source.decode(index))
                if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
                    raise ValueError(
                        f"Frame {index} of '{plan.video_id}' is not an 8-bit "
                        f"3-channel image: {image.dtype} {image.shape}"
                    )
                decoded[index] = image
            frames.append(decoded[index])
        return frames
