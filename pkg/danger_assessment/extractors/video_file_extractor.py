import logging
from os.path import exists

import cv2
import numpy as np

from ..errors import FrameDecodeError
from .frame_source import FrameSource

logger = logging.getLogger(__name__)


class VideoFileExtractor(FrameSource):
    """Decodes frames from a local video file with OpenCV."""

    def __init__(self, video_id: str, path: str) -> None:
        """Opens the video file.

        Args:
            video_id: The id of the video.
            path: The path of the video file.

        Raises:
            FrameDecodeError: If the file is missing or cannot be opened.
        """
        self.video_id = video_id
        self.path = path
        if not exists(path):
            raise FrameDecodeError(video_id, f"media file not found: {path}")
        self._capture = cv2.VideoCapture(path)
        if not self._capture.isOpened():
            raise FrameDecodeError(video_id, f"cannot open media file: {path}")
        self._frame_count = int(self._capture.get(cv2.CAP_PROP_FRAME_COUNT))
        logger.debug("Opened %s with %d frames", path, self._frame_count)

    def frame_count(self) -> int:
        """Number of frames reported by the container."""
        return self._frame_count

    def decode(self, index: int) -> np.ndarray:
        """Decodes one frame as RGB.

        Args:
            index: The zero-based frame index.

        Returns:
            The frame as an (height, width, 3) uint8 array.

        Raises:
            FrameDecodeError: If the decoder cannot produce the frame.
        """
        self._capture.set(cv2.CAP_PROP_POS_FRAMES, index)
        ok, frame = self._capture.read()
        if not ok or frame is None:
            raise FrameDecodeError(self.video_id, f"cannot decode frame {index}")
        return cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)

    def close(self) -> None:
        """Releases the decoder."""
        self._capture.release()
