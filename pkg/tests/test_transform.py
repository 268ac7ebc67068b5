import numpy as np
import pytest

from danger_assessment.errors import RatingError, SplitError
from danger_assessment.extractors.manifest_extractor import ManifestExtractor
from danger_assessment.transformations.transform import (
    AlertLabel,
    DangerRating,
    RatingSource,
    Transform,
)


@pytest.mark.parametrize(
    "ratings, expected",
    [([7] * 18, 7.0), ([6, 8], 7.0), (list(range(10)), 4.5)],
)
def test_aggregate_rating_mean(ratings, expected):
    rating = Transform.aggregate_rating(ratings)
    assert rating.value == expected
    assert rating.source is RatingSource.AGGREGATED_MEAN


def test_aggregate_rating_median():
    rating = Transform.aggregate_rating([0, 1, 9, 10, 10], method="median")
    assert rating.value == 9.0
    assert rating.source is RatingSource.AGGREGATED_MEDIAN


def test_aggregate_rating_rejects_empty_and_out_of_range():
    with pytest.raises(RatingError):
        Transform.aggregate_rating([])
    with pytest.raises(RatingError):
        Transform.aggregate_rating([3, 12])
    with pytest.raises(RatingError):
        Transform.aggregate_rating([3], method="mode")


@pytest.mark.parametrize(
    "value, expected",
    [(7.0, AlertLabel.HIGH_ALERT), (6.999, AlertLabel.NO_ALERT), (0.0, AlertLabel.NO_ALERT)],
)
def test_alert_label_threshold(value, expected):
    assert Transform.to_alert_label(DangerRating(value)) is expected


def test_threshold_totality():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        value = float(rng.uniform(0.0, 10.0))
        threshold = float(rng.uniform(0.0, 10.0))
        label = Transform.to_alert_label(DangerRating(value), threshold)
        assert (label is AlertLabel.HIGH_ALERT) == (value >= threshold)


def test_danger_rating_bounds():
    with pytest.raises(RatingError):
        DangerRating(10.5)
    with pytest.raises(RatingError):
        DangerRating(-0.1)


def _ids_and_labels(n, n_high):
    ids = [f"v{i:03d}" for i in range(n)]
    labels = [AlertLabel.HIGH_ALERT if i < n_high else AlertLabel.NO_ALERT for i in range(n)]
    return ids, labels


def test_split_sizes_for_hundred_videos():
    ids, labels = _ids_and_labels(100, 30)
    split = Transform.make_split(ids, labels, test_fraction=0.1, seed=0)
    assert len(split.test_ids) == 10
    assert len(split.train_ids) == 90


def test_split_is_deterministic():
    ids, labels = _ids_and_labels(50, 20)
    first = Transform.make_split(ids, labels, 0.1, seed=42)
    second = Transform.make_split(ids, labels, 0.1, seed=42)
    assert first == second
    assert first.to_record() == second.to_record()


def test_stratified_split_takes_one_of_each_class():
    ids, labels = _ids_and_labels(10, 5)
    split = Transform.make_split(ids, labels, test_fraction=0.2, seed=7, stratified=True)
    test_labels = [labels[ids.index(video_id)] for video_id in split.test_ids]
    assert sorted(label.value for label in test_labels) == [0, 1]


def test_split_partition_property():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(10, 80))
        ids, labels = _ids_and_labels(n, int(rng.integers(2, n - 2)))
        fraction = float(rng.uniform(0.2, 0.5))
        split = Transform.make_split(ids, labels, fraction, seed=int(rng.integers(1000)))
        assert set(split.train_ids) | set(split.test_ids) == set(ids)
        assert not set(split.train_ids) & set(split.test_ids)
        assert list(split.train_ids) == [i for i in ids if i in set(split.train_ids)]


def test_split_stratified_proportions():
    ids, labels = _ids_and_labels(100, 26)
    split = Transform.make_split(ids, labels, 0.1, seed=3, stratified=True)
    test_high = sum(1 for video_id in split.test_ids if labels[ids.index(video_id)] is AlertLabel.HIGH_ALERT)
    assert abs(test_high - 26 * 0.1) <= 1


def test_stratified_split_smaller_than_class_count():
    ids, labels = _ids_and_labels(10, 5)
    split = Transform.make_split(ids, labels, test_fraction=0.1, seed=0, stratified=True)
    assert len(split.test_ids) == 1
    assert len(split.train_ids) == 9


def test_stratified_split_with_singleton_class():
    ids, labels = _ids_and_labels(100, 1)
    split = Transform.make_split(ids, labels, test_fraction=0.1, seed=0, stratified=True)
    assert len(split.test_ids) == 10
    assert ids[0] in split.train_ids


def test_stratified_counts_stay_within_one_per_class():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n = int(rng.integers(5, 60))
        n_high = int(rng.integers(0, n + 1))
        ids, labels = _ids_and_labels(n, n_high)
        fraction = float(rng.uniform(0.1, 0.9))
        if round(fraction * n) in (0, n):
            continue
        split = Transform.make_split(ids, labels, fraction, seed=int(rng.integers(1000)))
        test = set(split.test_ids)
        assert len(test) == round(fraction * n)
        test_high = sum(1 for video_id in ids[:n_high] if video_id in test)
        test_no = len(test) - test_high
        assert abs(test_high - n_high * len(test) / n) < 1
        assert abs(test_no - (n - n_high) * len(test) / n) < 1


def test_split_rejects_empty_partitions():
    ids, labels = _ids_and_labels(4, 2)
    with pytest.raises(SplitError):
        Transform.make_split(ids, labels, test_fraction=0.01, seed=0)
    with pytest.raises(SplitError):
        Transform.make_split(ids, labels[:3], test_fraction=0.5, seed=0)


def test_rate_entries_labels_with_threshold(write_manifest, record_factory):
    path = write_manifest(
        [record_factory("calm", ratings=[2, 3]), record_factory("danger", ratings=[8, 9])]
    )
    rated = Transform.rate_entries(ManifestExtractor().load_manifest(path), threshold=7.0)
    assert [video.label for video in rated] == [AlertLabel.NO_ALERT, AlertLabel.HIGH_ALERT]
    assert rated[1].rating.value == 8.5
    assert rated[1].threshold == 7.0
