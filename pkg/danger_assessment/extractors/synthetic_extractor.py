from typing import Any
from urllib.parse import parse_qs, urlparse
from zlib import crc32

import numpy as np

from .frame_source import FrameSource

SYNTHETIC_SCHEME = "synthetic"


class SyntheticExtractor(FrameSource):
    """Generates deterministic noise frames, standing in for real video files."""

    def __init__(
        self,
        video_id: str,
        frame_count: int,
        height: int = 16,
        width: int = 16,
        seed: int = 0,
    ) -> None:
        """Initializes the SyntheticExtractor.

        Args:
            video_id: The id of the video the frames belong to.
            frame_count: The number of frames in the stream.
            height: The frame height in pixels.
            width: The frame width in pixels.
            seed: Extra seed mixed into every frame.
        """
        if frame_count < 1:
            raise ValueError(f"frame_count must be positive, got {frame_count}")
        self.video_id = video_id
        self._frame_count = frame_count
        self.height = height
        self.width = width
        self.seed = seed

    @classmethod
    def from_uri(cls, video_id: str, uri: str, seed: int = 0) -> "SyntheticExtractor":
        """Builds a source from a `synthetic://<frames>?height=H&width=W` path.

        Args:
            video_id: The id of the video.
            uri: The synthetic media path.
            seed: Extra seed mixed into every frame.

        Returns:
            The synthetic frame source.
        """
        parsed = urlparse(uri)
        if parsed.scheme != SYNTHETIC_SCHEME:
            raise ValueError(f"Not a synthetic media path: {uri}")
        query = parse_qs(parsed.query)
        return cls(
            video_id=video_id,
            frame_count=int(parsed.netloc or parsed.path.strip("/")),
            height=int(query.get("height", ["16"])[0]),
            width=int(query.get("width", ["16"])[0]),
            seed=seed,
        )

    def frame_count(self) -> int:
        """Number of frames in the synthetic video."""
        return self._frame_count

    def decode(self, index: int) -> np.ndarray:
        """Renders one frame.

        Args:
            index: The zero-based frame index.

        Returns:
            The frame as an (height, width, 3) uint8 array.

        Raises:
            IndexError: If the index is outside the video.
        """
        if not 0 <= index < self._frame_count:
            raise IndexError(f"Frame {index} outside [0, {self._frame_count})")
        rng = np.random.default_rng(
            [self.seed, crc32(self.video_id.encode("utf-8")), index]
        )
        return rng.integers(0, 256, size=(self.height, self.width, 3), dtype=np.uint8)


CALM_SCENES = (
    "People walk calmly through a well-lit shopping street.",
    "A cyclist rides along an empty park path in daylight.",
    "Customers queue quietly at a supermarket checkout.",
    "Children play football on a school field while teachers watch.",
    "Cars move slowly through a busy but orderly intersection.",
)
TENSE_SCENES = (
    "Two men argue loudly outside a bar and one shoves the other.",
    "A crowd gathers around a scuffle near a subway entrance.",
    "A person runs from a store carrying goods as staff give chase.",
    "A driver leaves the car and confronts another motorist.",
)
DANGEROUS_SCENES = (
    "A masked man threatens a cashier with a handgun.",
    "A group attacks a person lying on the ground with sticks.",
    "A car swerves into pedestrians on a crowded sidewalk.",
    "Someone brandishes a knife at passengers on a train platform.",
)


def synthetic_manifest_records(
    n: int,
    seed: int = 0,
    evaluators: int = 18,
    height: int = 16,
    width: int = 16,
) -> list[dict[str, Any]]:
    """Generates manifest records of synthetic videos with rater panels.

    Each video gets a latent danger level; its raters score that level plus
    noise, rounded and clipped to [0, 10], and its summary is drawn from
    scene descriptions matching the level.

    Args:
        n: The number of videos.
        seed: The generator seed.
        evaluators: The number of ratings per video.
        height: The synthetic frame height.
        width: The synthetic frame width.

    Returns:
        Records in manifest key layout, ids `syn-0000`, `syn-0001`, ...
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        level = float(rng.uniform(0.0, 10.0))
        ratings = np.clip(np.rint(level + rng.normal(0.0, 1.2, size=evaluators)), 0, 10)
        scenes = CALM_SCENES if level < 4 else TENSE_SCENES if level < 7 else DANGEROUS_SCENES
        frame_count = int(rng.integers(120, 480))
        start = int(rng.integers(0, frame_count // 3))
        end = int(rng.integers(start + 1, frame_count))
        records.append(
            {
                "video_id": f"syn-{i:04d}",
                "media_path": f"{SYNTHETIC_SCHEME}://{frame_count}?height={height}&width={width}",
                "summary": f"{scenes[int(rng.integers(len(scenes)))]} Clip {i}.",
                "ratings": [int(r) for r in ratings],
                "segment_start_frame": start,
                "segment_end_frame": end,
            }
        )
    return records
