import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from polars import DataFrame

from ..config import apply_overrides, build_config, load_document, preset_path
from ..errors import RequirementError
from ..evaluation.report import write_report
from .stages import ExperimentPipeline

logger = logging.getLogger(__name__)

MOCK_FLAG = "reference not comparable: mock backend"


@dataclass(frozen=True)
class ReferenceResult:
    framework: str
    description: str
    metric: str
    reference: float


REFERENCE_RESULTS = (
    ReferenceResult("framework1", "fused embeddings, MLP alert classifier", "accuracy", 0.85),
    ReferenceResult("framework2", "text embeddings, SVM, 10-fold CV", "mean_cv_accuracy", 0.79),
    ReferenceResult("framework3", "fused embeddings, MLP danger regressor", "mse", 0.43),
)

REQUIREMENTS = (
    "a manifest of the rated video dataset (--manifest PATH, JSON lines with video_id, "
    "media_path, summary, ratings, segment_start_frame, segment_end_frame)",
    "the videos it references, readable by OpenCV",
    "visual and text encoder backends (--set backends.visual.kind=plugin "
    "--set backends.visual.target=module:callable, likewise for backends.text)",
)


def _run_framework(
    reference: ReferenceResult,
    manifest_path: Path,
    output_dir: Path,
    seed: Optional[int],
    workers: Optional[int],
    assignments: Iterable[str],
) -> dict[str, Any]:
    document, _ = apply_overrides(
        load_document(preset_path(reference.framework)),
        seed=seed,
        output_dir=output_dir / reference.framework,
        workers=workers,
        assignments=assignments,
    )
    document["manifest_path"] = str(manifest_path)
    document.setdefault("cache_dir", str(output_dir / "cache"))
    config = build_config(document, preset_path(reference.framework).parent)
    pipeline = ExperimentPipeline(config)

    summary = pipeline.embed()
    if summary.failed:
        pipeline.exclude_videos(summary.failed)
        logger.warning(
            "%s: %d videos failed to embed and are excluded",
            reference.framework,
            len(summary.failed),
        )
    if reference.metric == "mean_cv_accuracy":
        obtained = pipeline.crossval().report.mean_accuracy
    else:
        pipeline.train()
        metrics = pipeline.evaluate().metrics
        obtained = metrics.accuracy if reference.metric == "accuracy" else metrics.mse

    delta = None if obtained is None else obtained - reference.reference
    note = MOCK_FLAG if config.uses_mock_backends else ""
    logger.info(
        "%s: %s obtained %s, reference %.2f, delta %s %s",
        reference.framework,
        reference.metric,
        obtained,
        reference.reference,
        delta,
        note,
    )
    return {
        "framework": reference.framework,
        "description": reference.description,
        "metric": reference.metric,
        "reference": reference.reference,
        "obtained": obtained,
        "delta": delta,
        "note": note,
    }


def replicate(
    manifest_path: Optional[Union[str, Path]],
    output_dir: Union[str, Path],
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    assignments: Iterable[str] = (),
    frameworks: Iterable[str] = ("framework1", "framework2", "framework3"),
) -> DataFrame:
    """Runs the three preset frameworks on a user-supplied dataset.

    Metrics are compared against the published reference values; deviations
    are reported, never gated on.

    Args:
        manifest_path: The dataset manifest.
        output_dir: Where each framework writes its run, plus the comparison table.
        seed: Seed override applied to every framework.
        workers: Worker override applied to every framework.
        assignments: `dotted.key=value` overrides applied to every framework.
        frameworks: The frameworks to run.

    Returns:
        The comparison table, one row per framework.

    Raises:
        RequirementError: If the manifest is missing, listing what to supply.
    """
    if manifest_path is None or not Path(manifest_path).is_file():
        raise RequirementError(
            "Replication needs:\n" + "\n".join(f"  - {item}" for item in REQUIREMENTS)
            + (f"\nManifest not found: {manifest_path}" if manifest_path else "")
        )
    manifest_path = Path(manifest_path).resolve()
    output_dir = Path(output_dir).resolve()
    output_dir.mkdir(parents=True, exist_ok=True)

    selected = set(frameworks)
    assignments = list(assignments)
    rows = [
        _run_framework(reference, manifest_path, output_dir, seed, workers, assignments)
        for reference in REFERENCE_RESULTS
        if reference.framework in selected
    ]
    table = DataFrame(
        rows,
        schema={
            "framework": str,
            "description": str,
            "metric": str,
            "reference": float,
            "obtained": float,
            "delta": float,
            "note": str,
        },
    )
    table.write_csv(output_dir / "comparison.csv")
    write_report(output_dir / "comparison.json", {"rows": rows})
    logger.info("Wrote comparison table to %s", output_dir / "comparison.csv")
    return table
