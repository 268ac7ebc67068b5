from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Optional, Union

from ..errors import ConfigError


class MLPHead(Enum):
    BINARY_CLASSIFIER = "binary_classifier"
    REGRESSOR = "regressor"

    @property
    def output_dim(self) -> int:
        """Number of network outputs for the head."""
        return 2 if self is MLPHead.BINARY_CLASSIFIER else 1


class SVMKernel(Enum):
    RBF = "rbf"
    LINEAR = "linear"


@dataclass(frozen=True)
class MLPConfig:
    """Architecture and optimisation settings of a fully connected head."""

    input_dim: int
    head: MLPHead = MLPHead.BINARY_CLASSIFIER
    hidden_dims: tuple[int, ...] = (256, 64)
    dropout_rate: float = 0.3
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    early_stopping_patience: Optional[int] = None
    early_stopping_min_delta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(self.hidden_dims))
        violations = self.violations()
        if violations:
            raise ConfigError(violations)

    def violations(self) -> list[str]:
        """Lists every invalid field."""
        problems = []
        if self.input_dim < 1:
            problems.append(f"input_dim must be positive, got {self.input_dim}")
        if any(width < 1 for width in self.hidden_dims):
            problems.append(f"hidden_dims must be positive, got {list(self.hidden_dims)}")
        if not 0 <= self.dropout_rate < 1:
            problems.append(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.learning_rate <= 0:
            problems.append(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            problems.append(f"epochs must be positive, got {self.epochs}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be positive, got {self.batch_size}")
        if self.early_stopping_patience is not None and self.early_stopping_patience < 1:
            problems.append("early_stopping_patience must be positive when set")
        return problems

    def to_record(self) -> dict[str, Any]:
        """Returns the config as a JSON-ready dict."""
        record = asdict(self)
        record["head"] = self.head.value
        record["hidden_dims"] = list(self.hidden_dims)
        record["type"] = "mlp"
        return record

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "MLPConfig":
        """Builds a config from a YAML model section."""
        fields = {key: value for key, value in record.items() if key != "type"}
        fields["head"] = MLPHead(fields.get("head", MLPHead.BINARY_CLASSIFIER.value))
        if "hidden_dims" in fields:
            fields["hidden_dims"] = tuple(fields["hidden_dims"])
        return cls(**fields)


@dataclass(frozen=True)
class SVMConfig:
    """Kernel SVM settings.

    `kernel_width` is either 'auto', meaning gamma = 1 / (dim * feature
    variance), or a positive RBF width w with gamma = 1 / (2 w^2).
    """

    kernel: SVMKernel = SVMKernel.RBF
    regularization_c: float = 1.0
    kernel_width: Union[str, float] = "auto"
    seed: int = 0
    max_iter: int = 100_000
    tolerance: float = 1e-3

    def __post_init__(self) -> None:
        violations = self.violations()
        if violations:
            raise ConfigError(violations)

    def violations(self) -> list[str]:
        """Lists every invalid field."""
        problems = []
        if self.regularization_c <= 0:
            problems.append(f"regularization_c must be positive, got {self.regularization_c}")
        if isinstance(self.kernel_width, str):
            if self.kernel_width != "auto":
                problems.append(f"kernel_width must be 'auto' or positive, got '{self.kernel_width}'")
        elif self.kernel_width <= 0:
            problems.append(f"kernel_width must be positive, got {self.kernel_width}")
        if self.max_iter < 1:
            problems.append(f"max_iter must be positive, got {self.max_iter}")
        return problems

    def to_record(self) -> dict[str, Any]:
        """Returns the config as a JSON-ready dict."""
        return {
            "type": "svm",
            "kernel": self.kernel.value,
            "regularization_c": self.regularization_c,
            "kernel_width": self.kernel_width,
            "seed": self.seed,
            "max_iter": self.max_iter,
            "tolerance": self.tolerance,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "SVMConfig":
        """Builds a config from a YAML model section."""
        fields = {key: value for key, value in record.items() if key != "type"}
        fields["kernel"] = SVMKernel(fields.get("kernel", SVMKernel.RBF.value))
        return cls(**fields)


ModelConfig = Union[MLPConfig, SVMConfig]


def model_config_from_record(record: dict[str, Any]) -> ModelConfig:
    """Builds an MLP or SVM config from its record, dispatching on 'type'."""
    model_type = record.get("type", "mlp")
    if model_type == "mlp":
        return MLPConfig.from_record(record)
    if model_type == "svm":
        return SVMConfig.from_record(record)
    raise ConfigError([f"unknown model type '{model_type}'"])
