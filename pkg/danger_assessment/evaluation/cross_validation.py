import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from hashlib import sha256
from typing import Any, Optional, Sequence

import numpy as np

from ..embeddings.types import EmbeddingVector
from ..errors import ModelError
from ..models.artifact import TrainedModelArtifact
from ..models.config import MLPConfig, MLPHead, ModelConfig
from ..transformations.transform import AlertLabel
from .metrics import MetricsBundle
from .report import evaluate_framework, train_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldAssignment:
    """Fold index of every video id; ids keep their input order."""

    k: int
    fold_of: dict[str, int]
    seed: int
    stratified: bool = False

    @property
    def ids(self) -> list[str]:
        """The video ids in assignment order."""
        return list(self.fold_of)

    def fold_ids(self, fold: int) -> list[str]:
        """The ids held out in one fold."""
        return [video_id for video_id, f in self.fold_of.items() if f == fold]

    def sizes(self) -> list[int]:
        """Number of ids per fold, by fold index."""
        return [sum(1 for f in self.fold_of.values() if f == fold) for fold in range(self.k)]

    def digest(self) -> str:
        """Short hash of the id-to-fold mapping."""
        canonical = "\n".join(f"{video_id}\t{fold}" for video_id, fold in self.fold_of.items())
        return sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def to_record(self) -> dict[str, Any]:
        """Returns the assignment as a JSON-ready dict."""
        return {
            "k": self.k,
            "seed": self.seed,
            "stratified": self.stratified,
            "fold_of": dict(self.fold_of),
        }


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    metrics: Optional[MetricsBundle] = None
    skipped_reason: Optional[str] = None
    artifact: Optional[TrainedModelArtifact] = field(default=None, repr=False)

    @property
    def skipped(self) -> bool:
        """Whether the fold was left out of the aggregates."""
        return self.skipped_reason is not None

    def to_record(self) -> dict[str, Any]:
        """Returns the fold as a JSON-ready dict."""
        return {
            "fold": self.fold,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "metrics": None if self.metrics is None else self.metrics.to_record(),
            "skipped_reason": self.skipped_reason,
        }


@dataclass
class CrossValidationReport:
    """Per-fold metrics with their reductions."""

    k: int
    seed: int
    folds: list[FoldResult]
    mean_accuracy: Optional[float] = None
    min_accuracy: Optional[float] = None
    max_accuracy: Optional[float] = None
    mean_mse: Optional[float] = None
    mean_mae: Optional[float] = None

    @property
    def evaluated_folds(self) -> list[FoldResult]:
        """The folds that produced metrics."""
        return [fold for fold in self.folds if not fold.skipped]

    def to_record(self) -> dict[str, Any]:
        """Returns the report with its aggregates as a JSON-ready dict."""
        return {
            "k": self.k,
            "seed": self.seed,
            "mean_accuracy": self.mean_accuracy,
            "min_accuracy": self.min_accuracy,
            "max_accuracy": self.max_accuracy,
            "mean_mse": self.mean_mse,
            "mean_mae": self.mean_mae,
            "folds": [fold.to_record() for fold in self.folds],
        }


def assign_folds(
    ids: Sequence[str],
    k: int,
    seed: int,
    labels: Optional[Sequence[AlertLabel]] = None,
    stratified: bool = False,
) -> FoldAssignment:
    """Shuffles ids with a seed and deals them round-robin into k folds.

    With `stratified`, ids are shuffled within each class and the classes are
    dealt one after the other, so each fold receives a near-even share of both.

    Raises:
        ValueError: If k < 2, k exceeds the number of ids, or ids repeat.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > len(ids):
        raise ValueError(f"k={k} exceeds the number of videos ({len(ids)})")
    if len(set(ids)) != len(ids):
        raise ValueError("Video ids must be unique")

    rng = np.random.default_rng(seed)
    if stratified:
        if labels is None or len(labels) != len(ids):
            raise ValueError("Stratified folds need labels aligned with ids")
        order: list[int] = []
        for label in AlertLabel:
            members = np.array([i for i, value in enumerate(labels) if value is label], dtype=np.int64)
            order.extend(rng.permutation(members).tolist())
    else:
        order = rng.permutation(len(ids)).tolist()

    fold_by_position = {position: rank % k for rank, position in enumerate(order)}
    return FoldAssignment(
        k=k,
        fold_of={ids[i]: fold_by_position[i] for i in range(len(ids))},
        seed=seed,
        stratified=stratified,
    )


def _run_fold(
    fold: int,
    assignment: FoldAssignment,
    features: Sequence[EmbeddingVector],
    labels: Sequence[AlertLabel],
    targets: Optional[Sequence[float]],
    model_config: ModelConfig,
    metadata: dict[str, Any],
    retain_artifact: bool,
) -> FoldResult:
    folds = [assignment.fold_of[video_id] for video_id in assignment.ids]
    train = [i for i, f in enumerate(folds) if f != fold]
    test = [i for i, f in enumerate(folds) if f == fold]
    result = FoldResult(fold=fold, n_train=len(train), n_test=len(test))
    is_regressor = isinstance(model_config, MLPConfig) and model_config.head is MLPHead.REGRESSOR

    if not is_regressor and len({labels[i] for i in train}) < 2:
        result.skipped_reason = "training folds contain a single alert class"
        logger.warning("Skipping fold %d: %s", fold, result.skipped_reason)
        return result

    logger.info("Fold %d: training on %d, testing on %d", fold, len(train), len(test))
    try:
        artifact, _ = train_model(
            [features[i] for i in train],
            [labels[i] for i in train],
            None if targets is None else [targets[i] for i in train],
            model_config,
            metadata,
        )
    except ModelError as e:
        result.skipped_reason = str(e)
        logger.warning("Skipping fold %d: %s", fold, e)
        return result

    result.metrics = evaluate_framework(
        artifact,
        [features[i] for i in test],
        [labels[i] for i in test],
        None if targets is None else [targets[i] for i in test],
    )
    if retain_artifact:
        result.artifact = artifact
    return result


def run_cross_validation(
    features: Sequence[EmbeddingVector],
    labels: Sequence[AlertLabel],
    assignment: FoldAssignment,
    model_config: ModelConfig,
    targets: Optional[Sequence[float]] = None,
    metadata: Optional[dict[str, Any]] = None,
    workers: int = 1,
    retain_artifacts: bool = False,
) -> CrossValidationReport:
    """Trains on k-1 folds and tests on the held-out one, for every fold.

    Folds whose training union holds a single class are reported as skipped
    and the run continues.

    Args:
        features: Feature vectors aligned with assignment.ids.
        labels: Alert labels aligned with assignment.ids.
        assignment: The fold assignment.
        model_config: An SVM or MLP config.
        targets: Danger ratings aligned with assignment.ids, for regressors.
        metadata: Artifact metadata forwarded to training.
        workers: Number of folds trained concurrently.
        retain_artifacts: Whether fold artifacts are kept on the report.

    Returns:
        The cross-validation report, folds ordered by index.
    """
    if len(features) != len(assignment.fold_of) or len(labels) != len(features):
        raise ValueError("Features and labels must align with the fold assignment")
    logger.info(
        "Cross-validating %d videos over %d folds (seed=%d, assignment=%s)",
        len(features),
        assignment.k,
        assignment.seed,
        assignment.digest(),
    )

    def run(fold: int) -> FoldResult:
        return _run_fold(
            fold, assignment, features, labels, targets, model_config, metadata or {}, retain_artifacts
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(assignment.k)))
    else:
        results = [run(fold) for fold in range(assignment.k)]

    report = CrossValidationReport(k=assignment.k, seed=assignment.seed, folds=results)
    evaluated = [fold.metrics for fold in report.evaluated_folds if fold.metrics is not None]
    accuracies = [m.accuracy for m in evaluated if m.accuracy is not None]
    if accuracies:
        report.mean_accuracy = float(np.mean(accuracies))
        report.min_accuracy = float(min(accuracies))
        report.max_accuracy = float(max(accuracies))
    squared = [m.mse for m in evaluated if m.mse is not None]
    if squared:
        report.mean_mse = float(np.mean(squared))
        report.mean_mae = float(np.mean([m.mae for m in evaluated if m.mae is not None]))
    return report
