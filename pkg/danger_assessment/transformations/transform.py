from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import floor
from statistics import median
from typing import Any, Sequence

import numpy as np
from sklearn.model_selection import train_test_split

from ..errors import RatingError, SplitError
from ..extractors.manifest_extractor import RATING_MAX, RATING_MIN, VideoManifestEntry

DEFAULT_THRESHOLD = 7.0


class RatingSource(Enum):
    AGGREGATED_MEAN = "aggregated_mean"
    AGGREGATED_MEDIAN = "aggregated_median"
    PROVIDED_SCALAR = "provided_scalar"


class AlertLabel(Enum):
    NO_ALERT = 0
    HIGH_ALERT = 1

    @classmethod
    def from_int(cls, value: int) -> "AlertLabel":
        """Maps 1 to HIGH_ALERT and 0 to NO_ALERT."""
        return cls.HIGH_ALERT if value else cls.NO_ALERT


@dataclass(frozen=True)
class DangerRating:
    """Scalar danger rating on the 0-10 scale."""

    value: float
    source: RatingSource = RatingSource.PROVIDED_SCALAR

    def __post_init__(self) -> None:
        if not RATING_MIN <= self.value <= RATING_MAX:
            raise RatingError(f"Danger rating {self.value} outside [0, 10]")


@dataclass(frozen=True)
class RatedVideo:
    """A video's rating together with the alert label derived from it."""

    video_id: str
    rating: DangerRating
    threshold: float
    label: AlertLabel


@dataclass(frozen=True)
class DatasetSplit:
    """Seeded train/test partition of video ids."""

    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int
    test_fraction: float
    stratified: bool

    def to_record(self) -> dict[str, Any]:
        """Returns the split as a JSON-ready dict."""
        return {
            "train_ids": list(self.train_ids),
            "test_ids": list(self.test_ids),
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "stratified": self.stratified,
        }


class Transform:
    """Turns evaluator ratings into danger ratings, alert labels and splits."""

    @staticmethod
    def aggregate_rating(ratings: Sequence[int], method: str = "mean") -> DangerRating:
        """Aggregates per-evaluator ratings into one danger rating.

        Args:
            ratings: The evaluator ratings, each in [0, 10].
            method: Either 'mean' or 'median'.

        Returns:
            The aggregated danger rating.

        Raises:
            RatingError: If the ratings are empty or out of range, or the
                method is unknown.
        """
        if not ratings:
            raise RatingError("Cannot aggregate an empty rating list")
        if any(not RATING_MIN <= rating <= RATING_MAX for rating in ratings):
            raise RatingError(f"Ratings must lie in [0, 10]: {list(ratings)}")
        if method == "mean":
            return DangerRating(
                value=sum(ratings) / len(ratings), source=RatingSource.AGGREGATED_MEAN
            )
        if method == "median":
            return DangerRating(
                value=float(median(ratings)), source=RatingSource.AGGREGATED_MEDIAN
            )
        raise RatingError(f"Unknown rating aggregation: {method}")

    @staticmethod
    def to_alert_label(
        rating: DangerRating, threshold: float = DEFAULT_THRESHOLD
    ) -> AlertLabel:
        """Derives the alert label of a danger rating.

        Args:
            rating: The danger rating.
            threshold: Ratings at or above this value raise a high alert.

        Returns:
            HIGH_ALERT if the rating reaches the threshold, NO_ALERT otherwise.
        """
        if rating.value >= threshold:
            return AlertLabel.HIGH_ALERT
        return AlertLabel.NO_ALERT

    @staticmethod
    def rate_entries(
        entries: Sequence[VideoManifestEntry],
        threshold: float = DEFAULT_THRESHOLD,
        aggregation: str = "mean",
    ) -> list[RatedVideo]:
        """Rates and labels manifest entries.

        Args:
            entries: The manifest entries.
            threshold: The alert threshold.
            aggregation: The rating aggregation method.

        Returns:
            One rated video per entry, in manifest order.
        """
        rated = []
        for entry in entries:
            rating = Transform.aggregate_rating(entry.ratings, aggregation)
            rated.append(
                RatedVideo(
                    video_id=entry.video_id,
                    rating=rating,
                    threshold=threshold,
                    label=Transform.to_alert_label(rating, threshold),
                )
            )
        return rated

    @staticmethod
    def make_split(
        ids: Sequence[str],
        labels: Sequence[AlertLabel],
        test_fraction: float,
        seed: int,
        stratified: bool = True,
    ) -> DatasetSplit:
        """Splits video ids into train and test partitions.

        Args:
            ids: The unique video ids.
            labels: The alert labels aligned with ids.
            test_fraction: The share of ids held out, in (0, 1).
            seed: The shuffle seed.
            stratified: Whether to keep class proportions in both partitions.

        Returns:
            The split, with ids kept in their input order inside each partition.

        Raises:
            SplitError: If inputs are misaligned or either partition is empty.
        """
        if len(ids) != len(labels):
            raise SplitError(f"{len(ids)} ids but {len(labels)} labels")
        if len(set(ids)) != len(ids):
            raise SplitError("Video ids must be unique")
        if not 0 < test_fraction < 1:
            raise SplitError(f"test_fraction must lie in (0, 1), got {test_fraction}")

        n_test = round(test_fraction * len(ids))
        if n_test == 0 or n_test == len(ids):
            raise SplitError(
                f"test_fraction {test_fraction} on {len(ids)} videos leaves an empty "
                "train or test set"
            )

        positions = list(range(len(ids)))
        if stratified:
            test_pos = Transform._stratified_test_positions(labels, n_test, seed)
        else:
            _, test_pos = train_test_split(
                positions, test_size=n_test, random_state=seed, shuffle=True
            )
        held_out = set(test_pos)

        return DatasetSplit(
            train_ids=tuple(ids[i] for i in positions if i not in held_out),
            test_ids=tuple(ids[i] for i in sorted(held_out)),
            seed=seed,
            test_fraction=test_fraction,
            stratified=stratified,
        )

    @staticmethod
    def _stratified_test_positions(
        labels: Sequence[AlertLabel], n_test: int, seed: int
    ) -> list[int]:
        """Draws test positions class by class.

        Each class receives its share of `n_test` by largest remainder, so the
        per-class counts sum to `n_test` and stay within one of the exact share.

        Args:
            labels: The alert labels of every video.
            n_test: The total number of test positions.
            seed: The draw seed.

        Returns:
            The test positions, in no particular order.
        """
        by_class: dict[AlertLabel, list[int]] = {}
        for position, label in enumerate(labels):
            by_class.setdefault(label, []).append(position)
        classes = sorted(by_class, key=lambda label: label.value)

        quotas = {label: Fraction(len(by_class[label]) * n_test, len(labels)) for label in classes}
        counts = {label: floor(quotas[label]) for label in classes}
        leftover = n_test - sum(counts.values())
        # ties go to the lower label value
        for label in sorted(classes, key=lambda label: -(quotas[label] - counts[label]))[:leftover]:
            counts[label] += 1

        rng = np.random.default_rng(seed)
        test_pos: list[int] = []
        for label in classes:
            members = by_class[label]
            chosen = rng.permutation(len(members))[: counts[label]]
            test_pos.extend(members[i] for i in chosen)
        return test_pos
