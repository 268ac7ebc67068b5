"""Experiment configuration: YAML documents mapped onto frozen dataclasses.

Input paths (the manifest) resolve against the directory of the config file;
output paths (output_dir, cache_dir) resolve against the working directory.
"""

import json
import logging
import re
from copy import deepcopy
from dataclasses import dataclass
from hashlib import sha256
from os import cpu_count
from pathlib import Path
from typing import Any, Iterable, Optional, Union

import yaml

from .embeddings.backend_factory import BackendFactory, BackendRef
from .embeddings.embedding import FEATURE_MODALITIES, POOLING_METHODS
from .errors import ConfigError
from .models.config import MLPHead, ModelConfig, model_config_from_record
from .transformations.frame_sampler import DEFAULT_FRAME_COUNT
from .transformations.transform import DEFAULT_THRESHOLD

logger = logging.getLogger(__name__)

PRESETS_DIR = Path(__file__).parent / "data" / "presets"
PRESET_NAMES = ("framework1", "framework2", "framework3", "demo")
RATING_AGGREGATIONS = ("mean", "median")
CV_SCOPES = ("full", "train")

TOP_LEVEL_KEYS = frozenset(
    {
        "name",
        "seed",
        "manifest_path",
        "output_dir",
        "cache_dir",
        "workers",
        "strict_manifest",
        "frames",
        "pooling",
        "threshold",
        "rating_aggregation",
        "features",
        "split",
        "cv",
        "backends",
        "model",
        "emit_plots",
        "retain_fold_artifacts",
    }
)
BACKEND_KEYS = frozenset(
    {
        "kind",
        "backend_id",
        "dim",
        "version",
        "serial",
        "salt",
        "signal_strength",
        "signal_from",
        "target",
        "options",
        "credentials_env",
    }
)
SECTION_KEYS = {
    "frames": frozenset({"count"}),
    "split": frozenset({"test_fraction", "stratified"}),
    "cv": frozenset({"k", "scope", "stratified", "test_fraction"}),
}
_ENV_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class FramesConfig:
    count: int = DEFAULT_FRAME_COUNT


@dataclass(frozen=True)
class SplitConfig:
    test_fraction: float = 0.1
    stratified: bool = True


@dataclass(frozen=True)
class CVConfig:
    """k-fold protocol; scope 'train' folds only the training side of a hold-out split."""

    k: int = 10
    scope: str = "full"
    stratified: bool = False
    test_fraction: float = 0.1


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment, with paths resolved."""

    name: str
    seed: int
    manifest_path: Path
    output_dir: Path
    cache_dir: Path
    workers: int
    strict_manifest: bool
    frames: FramesConfig
    pooling: str
    threshold: float
    rating_aggregation: str
    features: str
    split: Optional[SplitConfig]
    cv: Optional[CVConfig]
    visual: BackendRef
    text: BackendRef
    model: dict[str, Any]
    emit_plots: bool
    retain_fold_artifacts: bool
    document: dict[str, Any]

    @property
    def input_dim(self) -> int:
        """Dimension of the model input for the configured features."""
        if self.features == "visual":
            return self.visual.dim
        if self.features == "text":
            return self.text.dim
        return self.visual.dim + self.text.dim

    @property
    def is_regression(self) -> bool:
        """Whether the model is an MLP regressor."""
        return self.model.get("type", "mlp") == "mlp" and self.model.get("head") == MLPHead.REGRESSOR.value

    @property
    def uses_mock_backends(self) -> bool:
        """Whether any backend is a mock."""
        return self.visual.is_mock or self.text.is_mock

    def model_config(self) -> ModelConfig:
        """Builds the model config, with the input dim and seed of this experiment."""
        record = dict(self.model)
        record["seed"] = self.seed
        if record.get("type", "mlp") == "mlp":
            record["input_dim"] = self.input_dim
        return model_config_from_record(record)

    def holdout(self) -> Optional[SplitConfig]:
        """The hold-out split a train/evaluate run uses, if the config defines one."""
        if self.split is not None:
            return self.split
        if self.cv is not None and self.cv.scope == "train":
            return SplitConfig(test_fraction=self.cv.test_fraction, stratified=True)
        return None

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the resolved document."""
        canonical = json.dumps(self.document, sort_keys=True, separators=(",", ":"))
        return sha256(canonical.encode("utf-8")).hexdigest()


def preset_path(name: str) -> Path:
    """Returns the path of a shipped preset config.

    Raises:
        ConfigError: If no preset has that name.
    """
    if name not in PRESET_NAMES:
        raise ConfigError([f"unknown preset '{name}', expected one of {', '.join(PRESET_NAMES)}"])
    return PRESETS_DIR / f"{name}.yaml"


def load_document(path: Union[str, Path]) -> dict[str, Any]:
    """Reads a YAML config document.

    Raises:
        FileNotFoundError: If the file does not exist.
        ConfigError: If the file is not a YAML mapping.
    """
    path = Path(path)
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError([f"{path}: not valid YAML ({e})"]) from e
    if not isinstance(document, dict):
        raise ConfigError([f"{path}: a config must be a YAML mapping"])
    return document


def set_dotted(document: dict[str, Any], dotted_key: str, value: Any) -> None:
    """Sets `a.b.c` in a nested mapping, creating intermediate mappings."""
    *parents, leaf = dotted_key.split(".")
    node = document
    for key in parents:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[leaf] = value


def parse_assignment(assignment: str) -> tuple[str, Any]:
    """Parses a `--set dotted.key=value` argument; the value is read as YAML."""
    key, separator, raw_value = assignment.partition("=")
    if not separator or not key.strip():
        raise ConfigError([f"override '{assignment}' is not of the form key=value"])
    return key.strip(), yaml.safe_load(raw_value)


def apply_overrides(
    document: dict[str, Any],
    seed: Optional[int] = None,
    output_dir: Optional[Union[str, Path]] = None,
    workers: Optional[int] = None,
    assignments: Iterable[str] = (),
) -> tuple[dict[str, Any], dict[str, Any]]:
    """Applies command-line overrides to a copy of a document.

    Returns:
        The overridden document and the overrides applied, by dotted key.
    """
    document = deepcopy(document)
    applied: dict[str, Any] = {}
    for assignment in assignments:
        key, value = parse_assignment(assignment)
        set_dotted(document, key, value)
        applied[key] = value
    if seed is not None:
        document["seed"] = applied["seed"] = seed
    if output_dir is not None:
        document["output_dir"] = applied["output_dir"] = str(Path(output_dir).resolve())
    if workers is not None:
        document["workers"] = applied["workers"] = workers
    return document, applied


def _backend_violations(role: str, raw: Any) -> list[str]:
    if not isinstance(raw, dict):
        return [f"backends.{role} must be a mapping"]
    problems = [f"backends.{role}: unknown key '{key}'" for key in sorted(set(raw) - BACKEND_KEYS)]
    kind = raw.get("kind", "mock")
    if kind not in BackendFactory._backends:
        problems.append(f"backends.{role}: unknown kind '{kind}'")
    if not raw.get("backend_id"):
        problems.append(f"backends.{role}: backend_id is required")
    dim = raw.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        problems.append(f"backends.{role}: dim must be a positive integer")
    if kind == "plugin" and not raw.get("target"):
        problems.append(f"backends.{role}: plugin backends need a 'target' (module:callable)")
    signal_from = raw.get("signal_from")
    if signal_from is not None:
        if signal_from != "rating":
            problems.append(f"backends.{role}: signal_from must be 'rating'")
        if kind != "mock":
            problems.append(f"backends.{role}: signal mode is only available on mock backends")
    env_name = raw.get("credentials_env")
    if env_name is not None and not (isinstance(env_name, str) and _ENV_NAME.match(env_name)):
        problems.append(f"backends.{role}: credentials_env '{env_name}' is not a valid variable name")
    return problems


def _model_violations(raw: Any) -> list[str]:
    if not isinstance(raw, dict):
        return ["model section is required"]
    problems = []
    record = dict(raw)
    if "seed" in record:
        problems.append("model.seed is taken from the top-level seed")
        del record["seed"]
    if record.get("type", "mlp") == "mlp":
        record["input_dim"] = 1
    try:
        model_config_from_record(record)
    except ConfigError as e:
        problems.extend(f"model: {violation}" for violation in e.violations)
    except (TypeError, ValueError) as e:
        problems.append(f"model: {e}")
    return problems


def validate_config(document: dict[str, Any], base_dir: Union[str, Path] = ".") -> list[str]:
    """Collects every violation in a config document.

    Args:
        document: The parsed YAML document, overrides applied.
        base_dir: The directory relative input paths resolve against.

    Returns:
        Human-readable violations, empty when the document is valid.
    """
    problems = [f"unknown key '{key}'" for key in sorted(set(document) - TOP_LEVEL_KEYS)]
    for section, allowed in SECTION_KEYS.items():
        raw = document.get(section)
        if raw is None:
            continue
        if not isinstance(raw, dict):
            problems.append(f"{section} must be a mapping")
            document = {key: value for key, value in document.items() if key != section}
            continue
        problems.extend(f"{section}: unknown key '{key}'" for key in sorted(set(raw) - allowed))

    seed = document.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        problems.append("seed must be a nonnegative integer")

    manifest = document.get("manifest_path")
    if not manifest:
        problems.append("manifest_path is required")
    elif not (Path(base_dir) / manifest).is_file():
        problems.append(f"manifest file not found: {Path(base_dir) / manifest}")

    workers = document.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        problems.append("workers must be a positive integer")

    count = (document.get("frames") or {}).get("count", DEFAULT_FRAME_COUNT)
    if not isinstance(count, int) or count < 1:
        problems.append("frames.count must be a positive integer")

    if document.get("pooling", "mean") not in POOLING_METHODS:
        problems.append(f"unknown pooling '{document.get('pooling')}'")
    if document.get("rating_aggregation", "mean") not in RATING_AGGREGATIONS:
        problems.append(f"unknown rating_aggregation '{document.get('rating_aggregation')}'")
    if document.get("features", "fused") not in FEATURE_MODALITIES:
        problems.append(f"unknown features '{document.get('features')}'")

    threshold = document.get("threshold", DEFAULT_THRESHOLD)
    if not isinstance(threshold, (int, float)) or not 0 <= threshold <= 10:
        problems.append("threshold outside rating scale [0,10]")

    split, cv = document.get("split"), document.get("cv")
    if split is not None and cv is not None:
        problems.append("both split and cv present")
    elif split is None and cv is None:
        problems.append("one of split or cv is required")
    for section in (split, cv):
        if section is None:
            continue
        fraction = section.get("test_fraction", 0.1)
        if not isinstance(fraction, (int, float)) or not 0 < fraction < 1:
            problems.append(f"test_fraction must lie in (0, 1), got {fraction}")
    if cv is not None:
        k = cv.get("k", 10)
        if not isinstance(k, int) or k < 2:
            problems.append(f"cv.k must be at least 2, got {k}")
        if cv.get("scope", "full") not in CV_SCOPES:
            problems.append(f"unknown cv.scope '{cv.get('scope')}'")

    backends = document.get("backends") or {}
    for role in ("visual", "text"):
        if role not in backends:
            problems.append(f"backends.{role} is required")
        else:
            problems.extend(_backend_violations(role, backends[role]))

    problems.extend(_model_violations(document.get("model")))
    return problems


def _backend_ref(raw: dict[str, Any]) -> BackendRef:
    fields = dict(raw)
    fields.setdefault("kind", "mock")
    fields["version"] = str(fields.get("version", "1"))
    fields["options"] = dict(fields.get("options") or {})
    return BackendRef(**fields)


def build_config(document: dict[str, Any], base_dir: Union[str, Path] = ".") -> ExperimentConfig:
    """Validates a document and maps it onto an ExperimentConfig.

    Raises:
        ConfigError: With every violation, if the document is invalid.
    """
    violations = validate_config(document, base_dir)
    if violations:
        raise ConfigError(violations)

    name = str(document.get("name", "experiment"))
    output_dir = Path(document.get("output_dir") or Path("runs") / name).resolve()
    cache_dir = Path(document.get("cache_dir") or Path("runs") / "cache").resolve()
    manifest_path = (Path(base_dir) / document["manifest_path"]).resolve()
    workers = document.get("workers") or cpu_count() or 1
    split = document.get("split")
    cv = document.get("cv")

    resolved = deepcopy(document)
    resolved.update(
        {
            "manifest_path": str(manifest_path),
            "output_dir": str(output_dir),
            "cache_dir": str(cache_dir),
        }
    )
    resolved.pop("workers", None)

    return ExperimentConfig(
        name=name,
        seed=int(document.get("seed", 0)),
        manifest_path=manifest_path,
        output_dir=output_dir,
        cache_dir=cache_dir,
        workers=int(workers),
        strict_manifest=bool(document.get("strict_manifest", False)),
        frames=FramesConfig(**(document.get("frames") or {})),
        pooling=document.get("pooling", "mean"),
        threshold=float(document.get("threshold", DEFAULT_THRESHOLD)),
        rating_aggregation=document.get("rating_aggregation", "mean"),
        features=document.get("features", "fused"),
        split=None if split is None else SplitConfig(**split),
        cv=None if cv is None else CVConfig(**cv),
        visual=_backend_ref(document["backends"]["visual"]),
        text=_backend_ref(document["backends"]["text"]),
        model=dict(document["model"]),
        emit_plots=bool(document.get("emit_plots", False)),
        retain_fold_artifacts=bool(document.get("retain_fold_artifacts", False)),
        document=resolved,
    )


def load_config(
    path: Union[str, Path], **overrides: Any
) -> tuple[ExperimentConfig, dict[str, Any]]:
    """Loads, overrides and validates a config file.

    Args:
        path: The YAML config.
        **overrides: Keyword arguments of `apply_overrides`.

    Returns:
        The experiment config and the overrides applied.
    """
    path = Path(path)
    document, applied = apply_overrides(load_document(path), **overrides)
    config = build_config(document, path.parent)
    logger.info("Loaded config '%s' from %s (seed=%d)", config.name, path, config.seed)
    return config, applied
