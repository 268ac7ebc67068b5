import json
from pathlib import Path
from typing import Any, Callable

import pytest

from danger_assessment.extractors.manifest_extractor import ManifestExtractor
from danger_assessment.extractors.synthetic_extractor import synthetic_manifest_records


def make_record(video_id: str = "v1", **overrides: Any) -> dict[str, Any]:
    record = {
        "video_id": video_id,
        "media_path": "synthetic://300",
        "summary": "A man walks a dog along a quiet street.",
        "ratings": [7] * 18,
        "segment_start_frame": 10,
        "segment_end_frame": 250,
    }
    record.update(overrides)
    return record


@pytest.fixture
def record_factory() -> Callable[..., dict[str, Any]]:
    return make_record


@pytest.fixture
def write_manifest(tmp_path: Path) -> Callable[..., Path]:
    def write(records: list[dict[str, Any]], name: str = "manifest.jsonl") -> Path:
        path = tmp_path / name
        ManifestExtractor.write_records(path, records)
        return path

    return write


@pytest.fixture
def synthetic_manifest(tmp_path: Path) -> Path:
    path = tmp_path / "synthetic.jsonl"
    ManifestExtractor.write_records(path, synthetic_manifest_records(100, seed=3))
    return path


def experiment_document(manifest_path: Path, output_dir: Path, /, **overrides: Any) -> dict[str, Any]:
    """A small fused MLP experiment over mock backends with a rating signal."""
    document = {
        "name": "test",
        "seed": 0,
        "manifest_path": str(manifest_path),
        "output_dir": str(output_dir / "run"),
        "cache_dir": str(output_dir / "cache"),
        "workers": 1,
        "frames": {"count": 4},
        "features": "fused",
        "split": {"test_fraction": 0.1, "stratified": True},
        "backends": {
            "visual": {
                "kind": "mock",
                "backend_id": "mock-image-16",
                "dim": 16,
                "salt": 1,
                "signal_strength": 3.0,
                "signal_from": "rating",
            },
            "text": {
                "kind": "mock",
                "backend_id": "mock-text-16",
                "dim": 16,
                "salt": 2,
                "signal_strength": 3.0,
                "signal_from": "rating",
            },
        },
        "model": {
            "type": "mlp",
            "head": "binary_classifier",
            "hidden_dims": [16],
            "dropout_rate": 0.0,
            "learning_rate": 0.01,
            "epochs": 40,
            "batch_size": 16,
        },
    }
    document.update(overrides)
    return document


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[..., Path]:
    def write(document: dict[str, Any], name: str = "experiment.yaml") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write
