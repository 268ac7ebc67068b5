import json
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
from polars import DataFrame

from ..embeddings.types import EmbeddingVector, vectors_to_matrix
from ..errors import DimensionMismatchError, ModelError, ModelKindError
from ..models.artifact import ModelKind, TrainedModelArtifact
from ..models.config import MLPHead, ModelConfig, SVMConfig
from ..models.mlp import (
    TrainingLog,
    alert_probabilities,
    clamp_score,
    raw_scores,
    train_binary_classifier,
    train_regressor,
)
from ..models.svm import svm_decision_values, train_svm
from ..transformations.transform import AlertLabel
from .metrics import MetricsBundle, classification_bundle, regression_bundle


def train_model(
    features: Sequence[EmbeddingVector],
    labels: Sequence[AlertLabel],
    targets: Optional[Sequence[float]],
    model_config: ModelConfig,
    metadata: Optional[dict[str, Any]] = None,
) -> tuple[TrainedModelArtifact, Optional[TrainingLog]]:
    """Trains whichever model a config describes.

    Args:
        features: The input embeddings.
        labels: The alert labels, used by classifiers.
        targets: The danger ratings, used by regressors.
        model_config: An SVM or MLP config.
        metadata: Artifact metadata.

    Returns:
        The trained artifact and, for MLPs, the training log.
    """
    metadata = metadata or {}
    if isinstance(model_config, SVMConfig):
        return train_svm(features, labels, model_config, **metadata), None
    if model_config.head is MLPHead.REGRESSOR:
        if targets is None:
            raise ModelError("Regressors need danger-rating targets")
        return train_regressor(features, targets, model_config, **metadata)
    return train_binary_classifier(features, labels, model_config, **metadata)


def predict_batch(
    artifact: TrainedModelArtifact, features: Sequence[EmbeddingVector]
) -> tuple[Optional[list[AlertLabel]], np.ndarray]:
    """Runs an artifact over a batch.

    Returns:
        Predicted labels (None for regressors) and the per-sample score: the
        HIGH_ALERT probability, the SVM decision value or the clamped rating.
    """
    matrix = vectors_to_matrix(features)
    if matrix.shape[1] != artifact.input_dim:
        raise DimensionMismatchError(
            f"Features have dim {matrix.shape[1]}, artifact expects {artifact.input_dim}"
        )
    if artifact.model_kind is ModelKind.MLP_BINARY:
        probabilities = alert_probabilities(artifact, matrix)
        return [AlertLabel.from_int(p >= 0.5) for p in probabilities], probabilities
    if artifact.model_kind is ModelKind.SVM:
        decisions = svm_decision_values(artifact, matrix)
        return [AlertLabel.from_int(d >= 0) for d in decisions], decisions
    scores = np.array([clamp_score(raw) for raw in raw_scores(artifact, matrix)])
    return None, scores


def evaluate_framework(
    artifact: TrainedModelArtifact,
    features: Sequence[EmbeddingVector],
    labels: Sequence[AlertLabel],
    targets: Optional[Sequence[float]] = None,
) -> MetricsBundle:
    """Scores an artifact on a held-out set.

    Classifiers get accuracy, F1 and the confusion matrix; regressors get MAE
    and MSE of their clamped predictions.

    Raises:
        ModelKindError: If a regressor is evaluated without targets.
        DimensionMismatchError: If the features do not fit the artifact.
    """
    predicted, scores = predict_batch(artifact, features)
    if predicted is not None:
        return classification_bundle(labels, predicted)
    if targets is None:
        raise ModelKindError("Regressor evaluation needs danger-rating targets")
    return regression_bundle(scores.tolist(), list(targets))


def prediction_frame(
    artifact: TrainedModelArtifact,
    video_ids: Sequence[str],
    features: Sequence[EmbeddingVector],
    labels: Sequence[AlertLabel],
    targets: Sequence[float],
) -> DataFrame:
    """Builds the per-sample prediction table of an evaluation."""
    predicted, scores = predict_batch(artifact, features)
    frame = {
        "video_id": list(video_ids),
        "true_label": [label.name for label in labels],
        "true_rating": [float(t) for t in targets],
        "score": scores.astype(float).tolist(),
    }
    if predicted is not None:
        frame["predicted_label"] = [label.name for label in predicted]
    return DataFrame(frame)


def fold_frame(report_record: dict[str, Any]) -> DataFrame:
    """Flattens the per-fold rows of a cross-validation report."""
    rows = []
    for fold in report_record["folds"]:
        metrics = fold["metrics"] or {}
        rows.append(
            {
                "fold": fold["fold"],
                "n_train": fold["n_train"],
                "n_test": fold["n_test"],
                "accuracy": metrics.get("accuracy"),
                "f1": metrics.get("f1"),
                "mae": metrics.get("mae"),
                "mse": metrics.get("mse"),
                "skipped_reason": fold["skipped_reason"],
            }
        )
    return DataFrame(
        rows,
        schema={
            "fold": int,
            "n_train": int,
            "n_test": int,
            "accuracy": float,
            "f1": float,
            "mae": float,
            "mse": float,
            "skipped_reason": str,
        },
    )


def confusion_frame(bundle: MetricsBundle) -> DataFrame:
    """Lays a confusion matrix out as (actual, predicted, count) rows."""
    if bundle.confusion is None:
        raise ValueError("The metrics bundle has no confusion matrix")
    cm = bundle.confusion
    high, no = AlertLabel.HIGH_ALERT.name, AlertLabel.NO_ALERT.name
    return DataFrame(
        {
            "actual": [high, high, no, no],
            "predicted": [high, no, high, no],
            "count": [cm.tp, cm.fn, cm.fp, cm.tn],
        }
    )


def write_report(path: Union[str, Path], record: dict[str, Any]) -> None:
    """Writes a report as canonical JSON, byte-identical for identical content."""
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_report(path: Union[str, Path]) -> dict[str, Any]:
    """Reads a JSON report written by `write_report`."""
    return json.loads(Path(path).read_text(encoding="utf-8"))
