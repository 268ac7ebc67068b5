import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from hashlib import sha256
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union
from urllib.parse import quote, urlparse

from polars import col

from ..config import ExperimentConfig
from ..embeddings.backend_factory import BackendFactory, BackendRef
from ..embeddings.backends import EmbeddingBackend
from ..embeddings.cache import EmbeddingCache
from ..embeddings.embedding import Embedder
from ..embeddings.types import EmbeddingVector, Modality
from ..errors import (
    ConfigError,
    DangerAssessmentError,
    ModelKindError,
    RequirementError,
)
from ..evaluation.cross_validation import CrossValidationReport, assign_folds, run_cross_validation
from ..evaluation.metrics import MetricsBundle
from ..evaluation.report import (
    confusion_frame,
    evaluate_framework,
    fold_frame,
    prediction_frame,
    train_model,
    write_report,
)
from ..extractors.extractor_factory import ExtractorFactory
from ..extractors.manifest_extractor import ManifestExtractor, VideoManifestEntry
from ..models.artifact import TrainedModelArtifact, deserialize_artifact, serialize_artifact
from ..models.mlp import TrainingLog
from ..transformations.frame_sampler import FramePlan, FrameSampler, TemporalSegment
from ..transformations.transform import AlertLabel, DatasetSplit, RatedVideo, Transform
from ..visualizations.visualization import Visualization
from .run_record import blob_hash

logger = logging.getLogger(__name__)

ARTIFACT_NAME = "model.vart"
FRAME_PLANS_NAME = "frame_plans.jsonl"


@dataclass
class EmbedSummary:
    computed: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    failed: dict[str, str] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        """Returns the summary as a JSON-ready dict."""
        return {
            "computed": sorted(self.computed),
            "skipped": sorted(self.skipped),
            "failed": dict(sorted(self.failed.items())),
        }


@dataclass
class TrainOutcome:
    artifact: TrainedModelArtifact
    log: Optional[TrainingLog]
    split: DatasetSplit
    artifact_path: Path


@dataclass
class EvaluationOutcome:
    metrics: MetricsBundle
    report_path: Path
    record: dict[str, Any]


@dataclass
class CrossValidationOutcome:
    report: CrossValidationReport
    report_path: Path
    record: dict[str, Any]


def _canonical_hash(record: dict[str, Any]) -> str:
    return sha256(json.dumps(record, sort_keys=True).encode("utf-8")).hexdigest()


def _rating_signal(rated: RatedVideo) -> float:
    return (rated.rating.value - 5.0) / 5.0


class ExperimentPipeline:
    """Runs the embed, train, evaluate and cross-validation stages of an experiment."""

    def __init__(self, config: ExperimentConfig) -> None:
        """Initializes the pipeline.

        Args:
            config: The validated experiment config.
        """
        self.config = config
        self.manifest = ManifestExtractor(strict=config.strict_manifest)
        self._entries: Optional[list[VideoManifestEntry]] = None
        self._rated: Optional[dict[str, RatedVideo]] = None
        self.excluded: set[str] = set()

    # Dataset

    def entries(self) -> list[VideoManifestEntry]:
        """Loads the manifest once and logs a dataset summary."""
        if self._entries is None:
            self._entries = self.manifest.load_manifest(self.config.manifest_path)
            summary = ManifestExtractor.manifest_frame(self._entries)
            logger.info(
                "Dataset: %d videos, mean rating %.2f, mean segment length %.1f frames",
                summary.height,
                summary.select(col("rating_mean").mean()).item(),
                summary.select(col("segment_length").mean()).item(),
            )
        return self._entries

    def rated(self) -> dict[str, RatedVideo]:
        """Rates every entry and labels it at the configured threshold."""
        if self._rated is None:
            rated = Transform.rate_entries(
                self.entries(), self.config.threshold, self.config.rating_aggregation
            )
            self._rated = {video.video_id: video for video in rated}
            high = sum(1 for video in rated if video.label is AlertLabel.HIGH_ALERT)
            logger.info(
                "Class balance at threshold %.1f: %d HIGH_ALERT, %d NO_ALERT",
                self.config.threshold,
                high,
                len(rated) - high,
            )
        return self._rated

    def video_ids(self) -> list[str]:
        """Lists the manifest ids that take part in splits and folds, in manifest order."""
        return [
            entry.video_id for entry in self.entries() if entry.video_id not in self.excluded
        ]

    def exclude_videos(self, video_ids: Iterable[str]) -> None:
        """Leaves videos out of every later split and cross-validation run.

        Args:
            video_ids: The ids to leave out, typically those that failed to embed.
        """
        self.excluded.update(video_ids)
        logger.info("Excluding %d videos from training and evaluation", len(self.excluded))

    def split(self) -> DatasetSplit:
        """Builds the seeded hold-out split of the experiment.

        Raises:
            ConfigError: If the config defines no hold-out split.
        """
        holdout = self.config.holdout()
        if holdout is None:
            raise ConfigError(["this command needs a split section or cv.scope: train"])
        ids = self.video_ids()
        rated = self.rated()
        return Transform.make_split(
            ids,
            [rated[video_id].label for video_id in ids],
            holdout.test_fraction,
            self.config.seed,
            holdout.stratified,
        )

    # Embedding

    def cache_paths(self, video_id: str) -> dict[str, Path]:
        """Paths of the frame, video and text caches of one video."""
        directory = self.config.cache_dir / quote(video_id, safe="")
        visual_id = quote(self.config.visual.backend_id, safe="")
        text_id = quote(self.config.text.backend_id, safe="")
        return {
            "frames": directory / f"frames.{visual_id}.vemb",
            "video": directory / f"video.{visual_id}.vemb",
            "text": directory / f"text.{text_id}.vemb",
        }

    def _media_path(self, entry: VideoManifestEntry) -> str:
        if len(urlparse(entry.media_path).scheme) > 1:
            return entry.media_path
        return str(self.config.manifest_path.parent / entry.media_path)

    def _signal(self, ref: BackendRef, video_id: str) -> Optional[float]:
        if ref.signal_from == "rating":
            return _rating_signal(self.rated()[video_id])
        return None

    def _visual_hash(self, entry: VideoManifestEntry, plan: FramePlan) -> str:
        media = self._media_path(entry)
        media_hash = blob_hash(media) if Path(media).is_file() else media
        return _canonical_hash(
            {
                "backend": self.config.visual.to_record(),
                "media": media_hash,
                "indices": list(plan.indices),
                "pooling": self.config.pooling,
                "signal": self._signal(self.config.visual, entry.video_id),
            }
        )

    def _text_hash(self, entry: VideoManifestEntry) -> str:
        return _canonical_hash(
            {
                "backend": self.config.text.to_record(),
                "summary": entry.summary,
                "signal": self._signal(self.config.text, entry.video_id),
            }
        )

    @staticmethod
    def _up_to_date(paths: Sequence[Path], input_hash: str) -> bool:
        for path in paths:
            if not path.exists():
                return False
            metadata = EmbeddingCache.read_sidecar(path)
            if metadata is None or metadata.get("input_hash") != input_hash:
                return False
        return True

    @staticmethod
    def _store(path: Path, content: Any, metadata: dict[str, Any]) -> None:
        EmbeddingCache.cache_write(path, content)
        EmbeddingCache.write_sidecar(path, metadata)

    def embed_video(
        self,
        entry: VideoManifestEntry,
        visual: EmbeddingBackend,
        text: EmbeddingBackend,
    ) -> bool:
        """Populates the three caches of one video.

        Returns:
            Whether anything was recomputed.
        """
        paths = self.cache_paths(entry.video_id)
        paths["frames"].parent.mkdir(parents=True, exist_ok=True)
        plan = FrameSampler.sample_indices(
            TemporalSegment.of(entry), self.config.frames.count, entry.video_id
        )
        computed = False

        visual_hash = self._visual_hash(entry, plan)
        if not self._up_to_date([paths["frames"], paths["video"]], visual_hash):
            with ExtractorFactory.create_extractor(entry.video_id, self._media_path(entry)) as source:
                frames = FrameSampler.extract_frames(source, plan)
            stack = Embedder.embed_frames(
                visual, frames, entry.video_id, self._signal(self.config.visual, entry.video_id)
            )
            pooled = Embedder.pool_frames(stack, self.config.pooling)
            metadata = {
                "video_id": entry.video_id,
                "input_hash": visual_hash,
                "backend": visual.descriptor.to_record(),
                "indices": list(plan.indices),
            }
            self._store(paths["frames"], stack, metadata)
            self._store(paths["video"], pooled, dict(metadata, pooling=self.config.pooling))
            computed = True

        text_hash = self._text_hash(entry)
        if not self._up_to_date([paths["text"]], text_hash):
            vector = Embedder.embed_text(
                text, entry.summary, self._signal(self.config.text, entry.video_id)
            )
            self._store(
                paths["text"],
                vector,
                {
                    "video_id": entry.video_id,
                    "input_hash": text_hash,
                    "backend": text.descriptor.to_record(),
                },
            )
            computed = True

        if computed:
            logger.info("Embedded %s", entry.video_id)
        else:
            logger.info("Skipped %s: caches up to date", entry.video_id)
        return computed

    def write_frame_plans(self) -> Path:
        """Writes the frame plan of every video, leaving an identical file untouched."""
        plans = [
            FrameSampler.sample_indices(
                TemporalSegment.of(entry), self.config.frames.count, entry.video_id
            ).to_record()
            for entry in self.entries()
        ]
        path = self.config.cache_dir / FRAME_PLANS_NAME
        content = "".join(json.dumps(plan, sort_keys=True) + "\n" for plan in plans)
        if not path.exists() or path.read_text(encoding="utf-8") != content:
            path.write_text(content, encoding="utf-8")
        return path

    def embed(self) -> EmbedSummary:
        """Embeds every manifest video, isolating per-video failures.

        Returns:
            The ids computed, skipped and failed, with each failure's message.

        Raises:
            BackendError: If a backend cannot be constructed.
        """
        self.config.cache_dir.mkdir(parents=True, exist_ok=True)
        visual = BackendFactory.create_backend(self.config.visual, Modality.VISUAL)
        text = BackendFactory.create_backend(self.config.text, Modality.TEXT)
        entries = self.entries()
        self.rated()
        self.write_frame_plans()

        summary = EmbedSummary()

        def run(entry: VideoManifestEntry) -> None:
            try:
                if self.embed_video(entry, visual, text):
                    summary.computed.append(entry.video_id)
                else:
                    summary.skipped.append(entry.video_id)
            except (DangerAssessmentError, OSError, ValueError) as e:
                summary.failed[entry.video_id] = str(e)
                logger.error("Failed to embed %s: %s", entry.video_id, e)

        workers = 1 if visual.descriptor.serial or text.descriptor.serial else self.config.workers
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(run, entries))
        else:
            for entry in entries:
                run(entry)

        logger.info(
            "Embedding done: %d computed, %d skipped, %d failed",
            len(summary.computed),
            len(summary.skipped),
            len(summary.failed),
        )
        return summary

    def load_features(self, video_ids: Sequence[str]) -> list[EmbeddingVector]:
        """Reads cached embeddings and assembles the configured model inputs.

        Raises:
            RequirementError: If caches are missing, listing the video ids.
        """
        need_video = self.config.features in ("fused", "visual")
        need_text = self.config.features in ("fused", "text")
        missing = []
        for video_id in video_ids:
            paths = self.cache_paths(video_id)
            if (need_video and not paths["video"].exists()) or (
                need_text and not paths["text"].exists()
            ):
                missing.append(video_id)
        if missing:
            raise RequirementError(
                f"Missing embedding caches for {len(missing)} videos "
                f"({', '.join(missing[:10])}{', ...' if len(missing) > 10 else ''}); run embed first"
            )

        features = []
        for video_id in video_ids:
            paths = self.cache_paths(video_id)
            video = EmbeddingCache.cache_read(paths["video"]) if need_video else None
            text = EmbeddingCache.cache_read(paths["text"]) if need_text else None
            features.append(Embedder.select_features(video, text, self.config.features))
        return features

    # Training and evaluation

    def _metadata(self) -> dict[str, Any]:
        backends = []
        if self.config.features in ("fused", "visual"):
            backends.append(self.config.visual.descriptor(Modality.VISUAL).to_record())
        if self.config.features in ("fused", "text"):
            backends.append(self.config.text.descriptor(Modality.TEXT).to_record())
        return {
            "backends": tuple(backends),
            "pooling": self.config.pooling,
            "threshold": self.config.threshold,
            "feature_modality": self.config.features,
        }

    def _targets(self, video_ids: Sequence[str]) -> tuple[list[AlertLabel], list[float]]:
        rated = self.rated()
        return (
            [rated[video_id].label for video_id in video_ids],
            [rated[video_id].rating.value for video_id in video_ids],
        )

    def train(self) -> TrainOutcome:
        """Trains the configured model on the training side of the hold-out split."""
        split = self.split()
        features = self.load_features(split.train_ids)
        labels, targets = self._targets(split.train_ids)
        artifact, log = train_model(
            features, labels, targets, self.config.model_config(), self._metadata()
        )

        output = self.config.output_dir
        output.mkdir(parents=True, exist_ok=True)
        artifact_path = output / ARTIFACT_NAME
        serialize_artifact(artifact, artifact_path)
        write_report(output / "split.json", split.to_record())
        if log is not None:
            write_report(output / "training_log.json", log.to_record())
        logger.info("Wrote %s artifact to %s", artifact.model_kind.value, artifact_path)
        return TrainOutcome(artifact, log, split, artifact_path)

    def _check_compatible(self, artifact: TrainedModelArtifact) -> None:
        if artifact.feature_modality != self.config.features:
            raise ModelKindError(
                f"Artifact was trained on {artifact.feature_modality} features, "
                f"config asks for {self.config.features}"
            )
        expected = self._metadata()["backends"]
        trained = tuple(
            (b["backend_id"], b["modality"], b["dim"]) for b in artifact.backends
        )
        configured = tuple((b["backend_id"], b["modality"], b["dim"]) for b in expected)
        if trained != configured:
            raise ModelKindError(
                f"Artifact backends {trained} do not match configured backends {configured}"
            )

    def evaluate(self, artifact_path: Optional[Union[str, Path]] = None) -> EvaluationOutcome:
        """Scores an artifact on the held-out side of the split.

        Writes the report, the per-sample prediction table and, for
        classifiers, the confusion-matrix table, plus charts when enabled.
        """
        artifact_path = Path(artifact_path or self.config.output_dir / ARTIFACT_NAME)
        artifact = deserialize_artifact(artifact_path)
        self._check_compatible(artifact)

        split = self.split()
        features = self.load_features(split.test_ids)
        labels, targets = self._targets(split.test_ids)
        metrics = evaluate_framework(artifact, features, labels, targets)

        output = self.config.output_dir
        output.mkdir(parents=True, exist_ok=True)
        record = {
            "command": "evaluate",
            "config": self.config.document,
            "seed": self.config.seed,
            "split": split.to_record(),
            "model_kind": artifact.model_kind.value,
            "artifact_sha256": artifact.digest(),
            "metrics": metrics.to_record(),
        }
        report_path = output / "report.json"
        write_report(report_path, record)

        predictions = prediction_frame(artifact, split.test_ids, features, labels, targets)
        predictions.write_csv(output / "predictions.csv")
        if metrics.confusion is not None:
            confusion = confusion_frame(metrics)
            confusion.write_csv(output / "confusion_matrix.csv")
            if self.config.emit_plots:
                Visualization.save_chart(
                    Visualization.create_confusion_heatmap(confusion),
                    output / "confusion_matrix.html",
                )
        elif self.config.emit_plots:
            Visualization.save_chart(
                Visualization.create_prediction_scatter_plot(predictions),
                output / "predictions.html",
            )
        logger.info("Wrote evaluation report to %s", report_path)
        return EvaluationOutcome(metrics, report_path, record)

    def crossval(self) -> CrossValidationOutcome:
        """Runs k-fold cross-validation over the full set or the training side of a split.

        Raises:
            ConfigError: If the config has no cv section.
        """
        cv = self.config.cv
        if cv is None:
            raise ConfigError(["crossval needs a cv section"])
        ids = list(self.split().train_ids) if cv.scope == "train" else self.video_ids()
        labels, targets = self._targets(ids)
        features = self.load_features(ids)

        assignment = assign_folds(ids, cv.k, self.config.seed, labels, cv.stratified)
        logger.info("Fold assignment %s (seed=%d)", assignment.digest(), self.config.seed)
        report = run_cross_validation(
            features,
            labels,
            assignment,
            self.config.model_config(),
            targets=targets,
            metadata=self._metadata(),
            workers=self.config.workers,
            retain_artifacts=self.config.retain_fold_artifacts,
        )

        output = self.config.output_dir
        output.mkdir(parents=True, exist_ok=True)
        record = {
            "command": "crossval",
            "config": self.config.document,
            "seed": self.config.seed,
            "scope": cv.scope,
            "assignment": assignment.to_record(),
            "assignment_digest": assignment.digest(),
            "report": report.to_record(),
        }
        report_path = output / "crossval_report.json"
        write_report(report_path, record)
        folds = fold_frame(record["report"])
        folds.write_csv(output / "folds.csv")
        if self.config.retain_fold_artifacts:
            for fold in report.folds:
                if fold.artifact is not None:
                    serialize_artifact(fold.artifact, output / f"fold_{fold.fold}.vart")
        if self.config.emit_plots:
            chart = (
                Visualization.create_fold_error_bar_chart(folds)
                if self.config.is_regression
                else Visualization.create_fold_accuracy_bar_chart(folds)
            )
            Visualization.save_chart(chart, output / "folds.html")
        logger.info(
            "Cross-validation mean accuracy %s over %d evaluated folds; report at %s",
            report.mean_accuracy,
            len(report.evaluated_folds),
            report_path,
        )
        return CrossValidationOutcome(report, report_path, record)
