import argparse
import logging
import sys
from pathlib import Path
from time import perf_counter
from typing import Any, Optional, Sequence

from .config import (
    PRESET_NAMES,
    ExperimentConfig,
    apply_overrides,
    load_config,
    load_document,
    preset_path,
    validate_config,
)
from .errors import ConfigError, DangerAssessmentError, ManifestError, RequirementError
from .extractors.manifest_extractor import ManifestExtractor
from .extractors.synthetic_extractor import synthetic_manifest_records
from .pipeline.replication import replicate
from .pipeline.run_record import RunRecord
from .pipeline.stages import ExperimentPipeline

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def resolve_config_path(value: str) -> Path:
    """Accepts a config file path or the name of a shipped preset."""
    path = Path(value)
    if not path.exists() and value in PRESET_NAMES:
        return preset_path(value)
    return path


class App:
    """Command-line application running danger-assessment experiments."""

    def __init__(self, args: argparse.Namespace) -> None:
        """Initializes the App with parsed command-line arguments.

        Args:
            args: The parsed arguments.
        """
        self.args = args
        self.started = perf_counter()

    def overrides(self) -> dict[str, Any]:
        """The command-line overrides that were given."""
        return {
            "seed": self.args.seed,
            "output_dir": self.args.output_dir,
            "workers": self.args.workers,
            "assignments": self.args.set or [],
        }

    def load(self) -> tuple[Path, ExperimentConfig, dict[str, Any]]:
        """Resolves and loads the config with overrides applied."""
        config_path = resolve_config_path(self.args.config)
        config, applied = load_config(config_path, **self.overrides())
        return config_path, config, applied

    def record(
        self,
        command: str,
        config_path: Path,
        config: ExperimentConfig,
        applied: dict[str, Any],
        artifacts: Sequence[Path] = (),
        report: Optional[Path] = None,
    ) -> None:
        """Writes the run record of a command next to its outputs."""
        run = RunRecord(
            command=command,
            config_hash=config.config_hash(),
            seed=config.seed,
            config=config.document,
            artifacts=[str(path) for path in artifacts],
            report=None if report is None else str(report),
            overrides=applied,
            wall_clock_seconds=round(perf_counter() - self.started, 3),
        )
        run.add_input(config_path)
        run.add_input(config.manifest_path)
        config.output_dir.mkdir(parents=True, exist_ok=True)
        run.write(config.output_dir / f"run_{command}.json")

    def cmd_validate(self) -> int:
        """Prints every violation of the config."""
        config_path = resolve_config_path(self.args.config)
        document, _ = apply_overrides(load_document(config_path), **self.overrides())
        violations = validate_config(document, config_path.parent)
        for violation in violations:
            print(f"{config_path}: {violation}")
        if violations:
            logger.error("%d violations in %s", len(violations), config_path)
            return EXIT_INVALID
        print(f"{config_path}: ok")
        return EXIT_OK

    def cmd_embed(self) -> int:
        """Populates the embedding caches."""
        config_path, config, applied = self.load()
        summary = ExperimentPipeline(config).embed()
        self.record("embed", config_path, config, applied)
        for video_id, message in summary.failed.items():
            print(f"{video_id}: {message}", file=sys.stderr)
        print(
            f"computed {len(summary.computed)}, skipped {len(summary.skipped)}, "
            f"failed {len(summary.failed)}"
        )
        return EXIT_FAILED if summary.failed else EXIT_OK

    def cmd_train(self) -> int:
        """Trains the configured model on the hold-out split."""
        config_path, config, applied = self.load()
        outcome = ExperimentPipeline(config).train()
        self.record("train", config_path, config, applied, artifacts=[outcome.artifact_path])
        print(f"{outcome.artifact.model_kind.value} artifact {outcome.artifact_path}")
        return EXIT_OK

    def cmd_evaluate(self) -> int:
        """Scores an artifact and writes the report."""
        config_path, config, applied = self.load()
        outcome = ExperimentPipeline(config).evaluate(self.args.artifact)
        self.record("evaluate", config_path, config, applied, report=outcome.report_path)
        for name, value in outcome.metrics.to_record().items():
            if isinstance(value, float):
                print(f"{name}: {value:.4f}")
        return EXIT_OK

    def cmd_crossval(self) -> int:
        """Runs k-fold cross-validation and prints the aggregates."""
        config_path, config, applied = self.load()
        outcome = ExperimentPipeline(config).crossval()
        self.record("crossval", config_path, config, applied, report=outcome.report_path)
        report = outcome.report
        print(f"{len(report.evaluated_folds)}/{report.k} folds evaluated")
        if report.mean_accuracy is not None:
            print(
                f"accuracy mean {report.mean_accuracy:.4f} "
                f"min {report.min_accuracy:.4f} max {report.max_accuracy:.4f}"
            )
        if report.mean_mse is not None:
            print(f"mse mean {report.mean_mse:.4f} mae mean {report.mean_mae:.4f}")
        return EXIT_OK

    def cmd_replicate(self) -> int:
        """Runs the three frameworks on a dataset and prints the comparison."""
        table = replicate(
            self.args.manifest,
            self.args.output_dir or "runs/replication",
            seed=self.args.seed,
            workers=self.args.workers,
            assignments=self.args.set or [],
            frameworks=self.args.frameworks,
        )
        print(table)
        return EXIT_OK

    def cmd_synthesize(self) -> int:
        """Writes a synthetic demo manifest."""
        output = Path(self.args.output)
        output.parent.mkdir(parents=True, exist_ok=True)
        records = synthetic_manifest_records(self.args.count, seed=self.args.seed or 0)
        ManifestExtractor.write_records(output, records)
        logger.info("Wrote %d synthetic videos to %s", len(records), output)
        print(output)
        return EXIT_OK

    def run(self) -> int:
        """Runs the selected command, mapping failures to exit codes."""
        handler = getattr(self, f"cmd_{self.args.command}")
        try:
            return handler()
        except (ConfigError, RequirementError, ManifestError) as e:
            logger.error("%s", e)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INVALID
        except FileNotFoundError as e:
            logger.error("%s", e)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INVALID if self.args.command == "validate" else EXIT_FAILED
        except (DangerAssessmentError, OSError, ValueError) as e:
            logger.exception("%s failed", self.args.command)
            print(f"error: {e}", file=sys.stderr)
            return EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    """Builds the argument parser of every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Override the experiment seed")
    common.add_argument("--output-dir", help="Override the output directory")
    common.add_argument("--workers", type=int, help="Override the worker pool size")
    common.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override a config key by dotted path, value parsed as YAML (repeatable)",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log at DEBUG level")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Log warnings only")

    parser = argparse.ArgumentParser(
        prog="vigil",
        description="Assess danger in videos from visual and text embeddings.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    configured = argparse.ArgumentParser(add_help=False, parents=[common])
    configured.add_argument(
        "--config",
        required=True,
        help=f"Experiment config file or preset name ({', '.join(PRESET_NAMES)})",
    )

    commands.add_parser("validate", parents=[configured], help="List every config violation")
    commands.add_parser("embed", parents=[configured], help="Populate the embedding caches")
    commands.add_parser("train", parents=[configured], help="Train on the hold-out split")
    evaluate = commands.add_parser(
        "evaluate", parents=[configured], help="Score an artifact on the held-out videos"
    )
    evaluate.add_argument("--artifact", help="Artifact path (default: <output_dir>/model.vart)")
    commands.add_parser("crossval", parents=[configured], help="Run k-fold cross-validation")

    replicate_parser = commands.add_parser(
        "replicate", parents=[common], help="Run the three framework presets and compare"
    )
    replicate_parser.add_argument("--manifest", help="Manifest of the rated video dataset")
    replicate_parser.add_argument(
        "--frameworks",
        nargs="+",
        default=["framework1", "framework2", "framework3"],
        choices=["framework1", "framework2", "framework3"],
    )

    synthesize = commands.add_parser(
        "synthesize", parents=[common], help="Write a synthetic demo manifest"
    )
    synthesize.add_argument("--output", required=True, help="Manifest file to write")
    synthesize.add_argument("--count", type=int, default=100, help="Number of videos")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Runs the command line.

    Args:
        argv: The arguments, defaulting to sys.argv.

    Returns:
        The exit code.
    """
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    return App(args).run()


if __name__ == "__main__":
    sys.exit(main())
