from abc import ABC, abstractmethod

import numpy as np


class FrameSource(ABC):
    """Random-access handle over the frames of one video.

    Decoded frames are 8-bit RGB arrays of shape (height, width, 3). Decoding
    the same index of the same media always yields the same pixels.
    """

    video_id: str

    @abstractmethod
    def frame_count(self) -> int:
        """Returns the number of frames in the stream."""

    @abstractmethod
    def decode(self, index: int) -> np.ndarray:
        """Decodes one frame by its zero-based index."""

    def close(self) -> None:
        """Releases decoder resources."""

    def __enter__(self) -> "FrameSource":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
