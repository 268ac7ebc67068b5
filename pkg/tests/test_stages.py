import polars as pl
import pytest

from danger_assessment.config import build_config
from danger_assessment.errors import ConfigError, ModelKindError, RequirementError
from danger_assessment.evaluation.report import read_report
from danger_assessment.extractors.synthetic_extractor import synthetic_manifest_records
from danger_assessment.models.artifact import ModelKind, deserialize_artifact
from danger_assessment.pipeline.stages import ARTIFACT_NAME, FRAME_PLANS_NAME, ExperimentPipeline
from tests.conftest import experiment_document, make_record

REGRESSOR = {
    "type": "mlp",
    "head": "regressor",
    "hidden_dims": [],
    "dropout_rate": 0.0,
    "learning_rate": 0.01,
    "epochs": 50,
    "batch_size": 16,
}
SVM = {"type": "svm", "kernel": "rbf", "regularization_c": 1.0, "kernel_width": "auto"}


@pytest.fixture
def pipeline_for(tmp_path, synthetic_manifest):
    def build(manifest=None, **overrides):
        document = experiment_document(manifest or synthetic_manifest, tmp_path, **overrides)
        return ExperimentPipeline(build_config(document))

    return build


def _snapshot(directory):
    return {path: path.stat().st_mtime_ns for path in directory.rglob("*") if path.is_file()}


def test_embed_writes_three_caches_per_video(pipeline_for):
    pipeline = pipeline_for()
    summary = pipeline.embed()

    cache_dir = pipeline.config.cache_dir
    assert len(summary.computed) == 100
    assert not summary.failed
    assert len(list(cache_dir.rglob("*.vemb"))) == 300
    assert len(list(cache_dir.rglob("*.vemb.meta.jsonl"))) == 300
    assert len((cache_dir / FRAME_PLANS_NAME).read_text(encoding="utf-8").splitlines()) == 100


def test_second_embed_skips_everything_without_writes(pipeline_for):
    pipeline_for().embed()
    cache_dir = pipeline_for().config.cache_dir
    before = _snapshot(cache_dir)

    summary = pipeline_for().embed()
    assert summary.computed == []
    assert len(summary.skipped) == 100
    assert _snapshot(cache_dir) == before


def test_changed_summary_recomputes_only_that_video(pipeline_for, write_manifest):
    records = synthetic_manifest_records(5, seed=1)
    manifest = write_manifest(records, "small.jsonl")
    pipeline_for(manifest).embed()

    records[2]["summary"] = "A crowd scatters after a loud bang."
    write_manifest(records, "small.jsonl")
    summary = pipeline_for(manifest).embed()
    assert summary.computed == [records[2]["video_id"]]


def test_missing_media_is_isolated(pipeline_for, write_manifest):
    manifest = write_manifest(
        [
            make_record("present-1"),
            make_record("absent", media_path="absent.mp4"),
            make_record("present-2"),
        ],
        "mixed.jsonl",
    )
    summary = pipeline_for(manifest).embed()

    assert sorted(summary.computed) == ["present-1", "present-2"]
    assert list(summary.failed) == ["absent"]
    assert "absent.mp4" in summary.failed["absent"]


def test_excluded_videos_leave_split_and_training(pipeline_for, write_manifest):
    records = synthetic_manifest_records(30, seed=1)
    records[0]["media_path"] = "absent.mp4"
    pipeline = pipeline_for(write_manifest(records, "partial.jsonl"))
    summary = pipeline.embed()
    assert list(summary.failed) == ["syn-0000"]

    pipeline.exclude_videos(summary.failed)
    assert "syn-0000" not in pipeline.video_ids()
    outcome = pipeline.train()
    assert len(outcome.split.train_ids) + len(outcome.split.test_ids) == 29
    assert "syn-0000" not in outcome.split.train_ids + outcome.split.test_ids


def test_parallel_embedding_matches_serial(tmp_path, synthetic_manifest):
    serial = ExperimentPipeline(
        build_config(experiment_document(synthetic_manifest, tmp_path / "serial"))
    )
    parallel = ExperimentPipeline(
        build_config(experiment_document(synthetic_manifest, tmp_path / "parallel", workers=4))
    )
    serial.embed()
    parallel.embed()
    for video_id in serial.video_ids()[:10]:
        for kind in ("frames", "video", "text"):
            left = serial.cache_paths(video_id)[kind].read_bytes()
            right = parallel.cache_paths(video_id)[kind].read_bytes()
            assert left == right


def test_train_before_embed_names_missing_videos(pipeline_for):
    with pytest.raises(RequirementError, match="run embed first"):
        pipeline_for().train()


def test_train_and_evaluate_classifier(pipeline_for):
    pipeline = pipeline_for(emit_plots=True)
    pipeline.embed()
    outcome = pipeline.train()
    output = pipeline.config.output_dir

    assert outcome.artifact_path == output / ARTIFACT_NAME
    assert deserialize_artifact(outcome.artifact_path).model_kind is ModelKind.MLP_BINARY
    assert len(outcome.split.test_ids) == 10
    assert len(read_report(output / "training_log.json")["epoch_losses"]) == 40
    assert read_report(output / "split.json") == outcome.split.to_record()

    evaluation = pipeline.evaluate()
    report = read_report(evaluation.report_path)
    assert report["model_kind"] == "mlp_binary"
    assert report["artifact_sha256"] == outcome.artifact.digest()
    assert report["metrics"]["n"] == 10
    assert 0.0 <= report["metrics"]["accuracy"] <= 1.0
    assert "timestamp" not in report

    predictions = pl.read_csv(output / "predictions.csv")
    assert predictions.height == 10
    assert "predicted_label" in predictions.columns
    assert pl.read_csv(output / "confusion_matrix.csv")["count"].sum() == 10
    assert (output / "confusion_matrix.html").is_file()


def test_training_and_reports_are_reproducible(pipeline_for):
    pipeline_for().embed()
    first = pipeline_for().train()
    report_path = pipeline_for().evaluate().report_path
    first_report = report_path.read_bytes()

    second = pipeline_for().train()
    assert second.artifact.digest() == first.artifact.digest()
    assert pipeline_for().evaluate().report_path.read_bytes() == first_report


def test_regressor_report_has_errors_and_no_confusion(pipeline_for):
    pipeline = pipeline_for(model=REGRESSOR)
    pipeline.embed()
    outcome = pipeline.train()
    assert outcome.artifact.model_kind is ModelKind.MLP_REGRESSOR

    evaluation = pipeline.evaluate()
    metrics = evaluation.record["metrics"]
    assert metrics["mse"] is not None and metrics["mae"] is not None
    assert metrics["accuracy"] is None and metrics["confusion"] is None

    output = pipeline.config.output_dir
    assert not (output / "confusion_matrix.csv").exists()
    predictions = pl.read_csv(output / "predictions.csv")
    assert "predicted_label" not in predictions.columns
    assert predictions["score"].min() >= 0.0 and predictions["score"].max() <= 10.0


def test_evaluate_rejects_artifact_of_other_features(pipeline_for):
    pipeline = pipeline_for()
    pipeline.embed()
    pipeline.train()
    text_only = pipeline_for(features="text")
    with pytest.raises(ModelKindError, match="fused"):
        text_only.evaluate(pipeline.config.output_dir / ARTIFACT_NAME)


def test_crossval_writes_report_and_fold_artifacts(pipeline_for, tmp_path):
    document_overrides = dict(
        features="text",
        model=SVM,
        cv={"k": 5, "scope": "full", "stratified": True},
        retain_fold_artifacts=True,
        emit_plots=True,
    )
    pipeline = pipeline_for(**document_overrides, split=None)
    pipeline.embed()
    outcome = pipeline.crossval()
    output = pipeline.config.output_dir

    assert outcome.report.k == 5
    assert sum(fold.n_test for fold in outcome.report.folds) == 100
    record = read_report(outcome.report_path)
    assert record["scope"] == "full"
    assert record["assignment_digest"] == outcome.record["assignment_digest"]
    assert pl.read_csv(output / "folds.csv").height == 5
    assert (output / "folds.html").is_file()
    for fold in outcome.report.folds:
        if not fold.skipped:
            assert (output / f"fold_{fold.fold}.vart").is_file()

    with pytest.raises(ConfigError):
        pipeline.train()


def test_crossval_over_training_side(pipeline_for):
    pipeline = pipeline_for(
        features="text",
        model=SVM,
        cv={"k": 3, "scope": "train", "test_fraction": 0.2},
        split=None,
    )
    pipeline.embed()
    outcome = pipeline.crossval()
    assert sum(fold.n_test for fold in outcome.report.folds) == 80


def test_crossval_needs_cv_section(pipeline_for):
    with pytest.raises(ConfigError, match="cv section"):
        pipeline_for().crossval()
