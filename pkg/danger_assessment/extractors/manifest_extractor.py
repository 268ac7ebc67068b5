import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from polars import DataFrame, col

from ..errors import ManifestError

logger = logging.getLogger(__name__)

MANIFEST_KEYS: tuple[str, ...] = (
    "video_id",
    "media_path",
    "summary",
    "ratings",
    "segment_start_frame",
    "segment_end_frame",
    "fps",
)
REQUIRED_KEYS = frozenset(MANIFEST_KEYS) - {"fps"}
RATING_MIN = 0
RATING_MAX = 10
EXPECTED_EVALUATORS = 18


@dataclass(frozen=True)
class VideoManifestEntry:
    """One video of a danger-assessment dataset."""

    video_id: str
    media_path: str
    summary: str
    ratings: tuple[int, ...]
    segment_start_frame: int
    segment_end_frame: int
    fps: Optional[Fraction] = None

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ManifestError("empty video_id")
        if not self.ratings:
            raise ManifestError(
                f"no ratings for video '{self.video_id}'", video_id=self.video_id
            )
        for rating in self.ratings:
            if not RATING_MIN <= rating <= RATING_MAX:
                raise ManifestError(
                    f"rating out of range for video '{self.video_id}': {rating}",
                    video_id=self.video_id,
                )
        if self.segment_start_frame < 0 or self.segment_end_frame < 0:
            raise ManifestError(
                f"negative segment frame for video '{self.video_id}'",
                video_id=self.video_id,
            )
        if self.segment_start_frame > self.segment_end_frame:
            raise ManifestError(
                f"inverted segment for video '{self.video_id}': "
                f"{self.segment_start_frame} > {self.segment_end_frame}",
                video_id=self.video_id,
            )
        if self.fps is not None and self.fps <= 0:
            raise ManifestError(
                f"fps must be positive for video '{self.video_id}'",
                video_id=self.video_id,
            )

    def to_record(self) -> dict[str, Any]:
        """Returns the entry as a manifest record."""
        return {
            "video_id": self.video_id,
            "media_path": self.media_path,
            "summary": self.summary,
            "ratings": list(self.ratings),
            "segment_start_frame": self.segment_start_frame,
            "segment_end_frame": self.segment_end_frame,
            "fps": None if self.fps is None else str(self.fps),
        }


def _require_int(record: dict[str, Any], key: str) -> int:
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"'{key}' must be an integer, got {value!r}")
    return value


def _parse_fps(value: Any) -> Optional[Fraction]:
    if value is None:
        return None
    if isinstance(value, bool):
        raise ValueError(f"'fps' must be a positive rational, got {value!r}")
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"'fps' must be a positive rational, got {value!r}") from e


class ManifestExtractor:
    """Reads and writes line-delimited JSON manifests."""

    def __init__(self, strict: bool = False) -> None:
        """Initializes the ManifestExtractor.

        Args:
            strict: Whether unknown record keys are rejected instead of ignored.
        """
        self.strict = strict

    def parse_record(self, record: Any, line_number: int) -> VideoManifestEntry:
        """Builds a manifest entry from one decoded record.

        Args:
            record: The decoded JSON value of the line.
            line_number: The 1-based line number, for error messages.

        Returns:
            The validated manifest entry.

        Raises:
            ManifestError: If keys are missing, unknown in strict mode, mistyped,
                or the entry violates an invariant.
        """
        if not isinstance(record, dict):
            raise ManifestError("malformed record: expected an object", line_number)
        video_id = record.get("video_id")
        missing = sorted(REQUIRED_KEYS - record.keys())
        if missing:
            raise ManifestError(
                f"missing keys {missing}", line_number, video_id=video_id
            )
        unknown = sorted(set(record) - set(MANIFEST_KEYS))
        if unknown:
            if self.strict:
                raise ManifestError(
                    f"unknown keys {unknown}", line_number, video_id=video_id
                )
            logger.warning("Ignoring unknown keys %s on line %d", unknown, line_number)

        try:
            ratings = record["ratings"]
            if not isinstance(ratings, list):
                raise ValueError("'ratings' must be a list")
            for rating in ratings:
                if isinstance(rating, bool) or not isinstance(rating, int):
                    raise ValueError(f"rating {rating!r} is not an integer")
            if not isinstance(record["video_id"], str):
                raise ValueError("'video_id' must be a string")
            if not isinstance(record["summary"], str):
                raise ValueError("'summary' must be a string")
            entry_args = dict(
                video_id=record["video_id"],
                media_path=str(record["media_path"]),
                summary=record["summary"],
                ratings=tuple(ratings),
                segment_start_frame=_require_int(record, "segment_start_frame"),
                segment_end_frame=_require_int(record, "segment_end_frame"),
                fps=_parse_fps(record.get("fps")),
            )
        except ValueError as e:
            raise ManifestError(
                f"malformed record: {e}", line_number, video_id=video_id
            ) from e

        try:
            return VideoManifestEntry(**entry_args)
        except ManifestError as e:
            raise ManifestError(str(e), line_number, video_id=e.video_id) from e

    def load_manifest(self, path: Union[str, Path]) -> list[VideoManifestEntry]:
        """Loads every entry of a manifest file in file order.

        Args:
            path: The path of the manifest file.

        Returns:
            The validated entries.

        Raises:
            FileNotFoundError: If the manifest does not exist.
            ManifestError: On a malformed line, an invariant violation or a
                duplicate video_id.
        """
        entries: list[VideoManifestEntry] = []
        seen: dict[str, int] = {}
        with open(path, "rb") as manifest:
            for line_number, raw in enumerate(manifest, start=1):
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError as e:
                    raise ManifestError(f"invalid UTF-8 at byte {e.start}", line_number) from e
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise ManifestError(f"malformed record: {e.msg}", line_number) from e
                entry = self.parse_record(record, line_number)
                if entry.video_id in seen:
                    raise ManifestError(
                        f"duplicate video_id '{entry.video_id}' "
                        f"(first seen on line {seen[entry.video_id]})",
                        line_number,
                        video_id=entry.video_id,
                    )
                seen[entry.video_id] = line_number
                if len(entry.ratings) != EXPECTED_EVALUATORS:
                    logger.debug(
                        "Video %s has %d ratings, expected %d",
                        entry.video_id,
                        len(entry.ratings),
                        EXPECTED_EVALUATORS,
                    )
                entries.append(entry)
        logger.info("Loaded %d manifest entries from %s", len(entries), path)
        return entries

    @staticmethod
    def write_records(path: Union[str, Path], records: Iterable[dict[str, Any]]) -> None:
        """Writes records as UTF-8 line-delimited JSON.

        Args:
            path: The output file path.
            records: The records to write, one per line.
        """
        with open(path, "w", encoding="utf-8") as output:
            for record in records:
                output.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
                output.write("\n")

    @staticmethod
    def read_records(path: Union[str, Path]) -> list[dict[str, Any]]:
        """Reads every record of a line-delimited JSON file."""
        with open(path, encoding="utf-8") as source:
            return [json.loads(line) for line in source if line.strip()]

    @staticmethod
    def manifest_frame(entries: list[VideoManifestEntry]) -> DataFrame:
        """Builds a tabular view of manifest entries.

        Args:
            entries: The manifest entries.

        Returns:
            A DataFrame with one row per video and its rating statistics.
        """
        return DataFrame(
            {
                "video_id": [entry.video_id for entry in entries],
                "media_path": [entry.media_path for entry in entries],
                "n_ratings": [len(entry.ratings) for entry in entries],
                "segment_start_frame": [entry.segment_start_frame for entry in entries],
                "segment_end_frame": [entry.segment_end_frame for entry in entries],
                "rating_mean": [
                    sum(entry.ratings) / len(entry.ratings) for entry in entries
                ],
            }
        ).with_columns(
            (col("segment_end_frame") - col("segment_start_frame") + 1).alias(
                "segment_length"
            )
        )
