from urllib.parse import urlparse

from .frame_source import FrameSource
from .synthetic_extractor import SYNTHETIC_SCHEME, SyntheticExtractor
from .video_file_extractor import VideoFileExtractor


class ExtractorFactory:
    """Factory class to create frame sources from manifest media paths."""

    _extractors: dict[str, type[FrameSource]] = {
        SYNTHETIC_SCHEME: SyntheticExtractor,
        "file": VideoFileExtractor,
    }

    @classmethod
    def create_extractor(cls, video_id: str, media_path: str) -> FrameSource:
        """Creates a frame source for the media path of a video.

        Args:
            video_id: The id of the video.
            media_path: A filesystem path or a `synthetic://` path.

        Returns:
            An instance of the appropriate frame source class.

        Raises:
            ValueError: If the media path scheme is unknown.
        """
        scheme = urlparse(media_path).scheme
        # Windows drive letters parse as one-letter schemes
        if len(scheme) <= 1:
            scheme = "file"
        extractor_class = cls._extractors.get(scheme)
        if extractor_class is SyntheticExtractor:
            return SyntheticExtractor.from_uri(video_id, media_path)
        if extractor_class is VideoFileExtractor:
            path = urlparse(media_path).path if media_path.startswith("file:") else media_path
            return VideoFileExtractor(video_id, path)
        raise ValueError(f"Unknown media scheme: {scheme}")
