from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from ..transformations.transform import AlertLabel


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts with HIGH_ALERT as the positive class."""

    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        """Number of scored instances."""
        return self.tp + self.fp + self.tn + self.fn

    def to_record(self) -> dict[str, int]:
        """Returns the counts keyed tp, fp, tn, fn."""
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class MetricsBundle:
    """Metrics of one evaluation.

    Classification fields are set iff labels were evaluated; regression fields
    iff scores were evaluated.
    """

    n: int
    accuracy: Optional[float] = None
    f1: Optional[float] = None
    precision: Optional[float] = None
    recall: Optional[float] = None
    mae: Optional[float] = None
    mse: Optional[float] = None
    confusion: Optional[ConfusionMatrix] = None

    def to_record(self) -> dict[str, Any]:
        """Returns the bundle as a JSON-ready dict, absent metrics as None."""
        return {
            "n": self.n,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "mae": self.mae,
            "mse": self.mse,
            "confusion": None if self.confusion is None else self.confusion.to_record(),
            "zero_division": 0.0,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "MetricsBundle":
        """Rebuilds a bundle written by `to_record`."""
        confusion = record.get("confusion")
        return cls(
            n=record["n"],
            accuracy=record.get("accuracy"),
            f1=record.get("f1"),
            precision=record.get("precision"),
            recall=record.get("recall"),
            mae=record.get("mae"),
            mse=record.get("mse"),
            confusion=None if confusion is None else ConfusionMatrix(**confusion),
        )


def _check_lengths(first: Sequence[Any], second: Sequence[Any]) -> None:
    if len(first) != len(second):
        raise ValueError(f"Length mismatch: {len(first)} vs {len(second)}")
    if len(first) == 0:
        raise ValueError("Cannot evaluate an empty input")


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def confusion(
    labels_true: Sequence[AlertLabel], labels_pred: Sequence[AlertLabel]
) -> ConfusionMatrix:
    """Tallies the confusion matrix of two aligned label sequences.

    Raises:
        ValueError: If the sequences differ in length or are empty.
    """
    _check_lengths(labels_true, labels_pred)
    truth = np.array([label is AlertLabel.HIGH_ALERT for label in labels_true])
    predicted = np.array([label is AlertLabel.HIGH_ALERT for label in labels_pred])
    return ConfusionMatrix(
        tp=int(np.sum(truth & predicted)),
        fp=int(np.sum(~truth & predicted)),
        tn=int(np.sum(~truth & ~predicted)),
        fn=int(np.sum(truth & ~predicted)),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    """Share of correct predictions.

    Args:
        cm: A non-empty confusion matrix.

    Returns:
        (tp + tn) / total.

    Raises:
        ValueError: If the matrix is empty.
    """
    if cm.total == 0:
        raise ValueError("Cannot compute accuracy of an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


def precision(cm: ConfusionMatrix) -> float:
    """tp / (tp + fp), or 0 when nothing was predicted HIGH_ALERT."""
    return _ratio(cm.tp, cm.tp + cm.fp)


def recall(cm: ConfusionMatrix) -> float:
    """tp / (tp + fn), or 0 when no HIGH_ALERT instance exists."""
    return _ratio(cm.tp, cm.tp + cm.fn)


def f1(cm: ConfusionMatrix) -> float:
    """F1 of the HIGH_ALERT class; every 0/0 along the way counts as 0."""
    if cm.total == 0:
        raise ValueError("Cannot compute F1 of an empty confusion matrix")
    p, r = precision(cm), recall(cm)
    return _ratio(2 * p * r, p + r)


def mae(pred: Sequence[float], true: Sequence[float]) -> float:
    """Mean absolute error between aligned predictions and truths."""
    _check_lengths(pred, true)
    return float(np.mean(np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(true, dtype=np.float64))))


def mse(pred: Sequence[float], true: Sequence[float]) -> float:
    """Mean squared error between aligned predictions and truths."""
    _check_lengths(pred, true)
    return float(np.mean((np.asarray(pred, dtype=np.float64) - np.asarray(true, dtype=np.float64)) ** 2))


def classification_bundle(
    labels_true: Sequence[AlertLabel], labels_pred: Sequence[AlertLabel]
) -> MetricsBundle:
    """Scores alert predictions.

    Args:
        labels_true: The true alert labels.
        labels_pred: The predicted labels, aligned with labels_true.

    Returns:
        A bundle with the confusion matrix and the alert metrics.
    """
    cm = confusion(labels_true, labels_pred)
    return MetricsBundle(
        n=cm.total,
        accuracy=accuracy(cm),
        f1=f1(cm),
        precision=precision(cm),
        recall=recall(cm),
        confusion=cm,
    )


def regression_bundle(pred: Sequence[float], true: Sequence[float]) -> MetricsBundle:
    """Scores rating predictions with MAE and MSE."""
    return MetricsBundle(n=len(pred), mae=mae(pred, true), mse=mse(pred, true))
