"""Fully connected heads trained from scratch with numpy.

Hidden layers use ReLU followed by inverted dropout. The binary head emits two
logits scored with softmax cross-entropy; the regression head emits one scalar
scored with mean squared error. Training uses Adam on shuffled mini-batches,
with initialization, shuffling and dropout masks all drawn from one generator
seeded by the config.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from ..embeddings.types import EmbeddingVector, vectors_to_matrix
from ..errors import (
    DimensionMismatchError,
    ModelKindError,
    NonFiniteLossError,
    SingleClassError,
    TargetRangeError,
)
from ..transformations.transform import AlertLabel
from .artifact import ModelKind, TrainedModelArtifact
from .config import MLPConfig, MLPHead

logger = logging.getLogger(__name__)

RATING_FLOOR = 0.0
RATING_CEILING = 10.0
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass
class TrainingLog:
    epoch_losses: list[float] = field(default_factory=list)
    final_loss: float = float("nan")
    wall_clock_seconds: float = 0.0
    seed: int = 0
    stopped_early: bool = False

    def to_record(self) -> dict[str, Any]:
        """Returns the log as a JSON-ready dict."""
        return {
            "epoch_losses": list(self.epoch_losses),
            "final_loss": self.final_loss,
            "wall_clock_seconds": self.wall_clock_seconds,
            "seed": self.seed,
            "stopped_early": self.stopped_early,
        }


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row maximum."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy and its gradient with respect to the logits."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -float(log_probs[np.arange(n), labels].mean())
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def mean_squared_error(outputs: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error of a one-column output and its gradient."""
    residual = outputs[:, 0] - targets
    loss = float(np.mean(residual**2))
    return loss, (2.0 * residual / residual.shape[0])[:, None]


class MLPNetwork:
    """Stack of dense layers with float64 parameters."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]) -> None:
        self.weights = weights
        self.biases = biases

    @classmethod
    def initialize(
        cls,
        input_dim: int,
        hidden_dims: Sequence[int],
        output_dim: int,
        rng: np.random.Generator,
    ) -> "MLPNetwork":
        """Draws fan-in scaled uniform weights and zero biases.

        Hidden layers use limit sqrt(6 / fan_in), the output layer sqrt(3 / fan_in).
        """
        widths = [input_dim, *hidden_dims, output_dim]
        weights, biases = [], []
        for layer, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            gain = 3.0 if layer == len(widths) - 2 else 6.0
            limit = np.sqrt(gain / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def input_dim(self) -> int:
        """Width of the first layer's input."""
        return self.weights[0].shape[0]

    def forward(
        self,
        inputs: np.ndarray,
        dropout_rate: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> tuple[np.ndarray, list[tuple[np.ndarray, Optional[np.ndarray]]]]:
        """Runs the network, returning outputs and the cache backward needs.

        Dropout is applied only when both a positive rate and a generator are given.
        """
        cache = []
        activations = inputs
        last = len(self.weights) - 1
        for layer, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            pre_activation = activations @ weight + bias
            if layer == last:
                cache.append((activations, None))
                return pre_activation, cache
            hidden = np.maximum(pre_activation, 0.0)
            mask = None
            if dropout_rate > 0 and rng is not None:
                mask = (rng.random(hidden.shape) >= dropout_rate) / (1.0 - dropout_rate)
                hidden = hidden * mask
            cache.append((activations, mask))
            cache.append((pre_activation, None))
            activations = hidden
        raise AssertionError("network has no layers")

    def backward(
        self,
        cache: list[tuple[np.ndarray, Optional[np.ndarray]]],
        grad_output: np.ndarray,
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Backpropagates an output gradient into parameter gradients."""
        n_layers = len(self.weights)
        grad_weights: list[np.ndarray] = [np.empty(0)] * n_layers
        grad_biases: list[np.ndarray] = [np.empty(0)] * n_layers
        grad = grad_output
        for layer in range(n_layers - 1, -1, -1):
            layer_input, _ = cache[2 * layer]
            grad_weights[layer] = layer_input.T @ grad
            grad_biases[layer] = grad.sum(axis=0)
            if layer == 0:
                break
            grad = grad @ self.weights[layer].T
            _, mask = cache[2 * (layer - 1)]
            pre_activation, _ = cache[2 * layer - 1]
            if mask is not None:
                grad = grad * mask
            grad = grad * (pre_activation > 0)
        return grad_weights, grad_biases

    def loss_and_gradients(
        self,
        inputs: np.ndarray,
        targets: np.ndarray,
        head: MLPHead,
        dropout_rate: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Runs a forward and backward pass.

        Args:
            inputs: The (n, input_dim) batch.
            targets: Class indices or ratings, per head.
            head: The output head.
            dropout_rate: The hidden-layer dropout rate.
            rng: The generator for dropout masks.

        Returns:
            The loss and the weight and bias gradients, layer by layer.
        """
        outputs, cache = self.forward(inputs, dropout_rate, rng)
        if head is MLPHead.BINARY_CLASSIFIER:
            loss, grad_output = cross_entropy(outputs, targets.astype(np.int64))
        else:
            loss, grad_output = mean_squared_error(outputs, targets)
        grad_weights, grad_biases = self.backward(cache, grad_output)
        return loss, grad_weights, grad_biases

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases interleaved, layer by layer."""
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def to_arrays(self) -> dict[str, np.ndarray]:
        """Returns the parameters keyed W0, b0, W1, ..."""
        arrays = {}
        for layer, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            arrays[f"W{layer}"] = weight.astype(np.float32)
            arrays[f"b{layer}"] = bias.astype(np.float32)
        return arrays

    @classmethod
    def from_artifact(cls, artifact: TrainedModelArtifact) -> "MLPNetwork":
        """Rebuilds a network from stored parameters."""
        n_layers = len(artifact.parameters) // 2
        return cls(
            [artifact.parameters[f"W{i}"].astype(np.float64) for i in range(n_layers)],
            [artifact.parameters[f"b{i}"].astype(np.float64) for i in range(n_layers)],
        )


class AdamOptimizer:
    """Adaptive-moment gradient descent over a list of parameter arrays."""

    def __init__(self, parameters: list[np.ndarray], learning_rate: float) -> None:
        self.parameters = parameters
        self.learning_rate = learning_rate
        self.first_moments = [np.zeros_like(p) for p in parameters]
        self.second_moments = [np.zeros_like(p) for p in parameters]
        self.steps = 0

    def step(self, gradients: list[np.ndarray]) -> None:
        """Applies one Adam update in place."""
        self.steps += 1
        correction1 = 1.0 - ADAM_BETA1**self.steps
        correction2 = 1.0 - ADAM_BETA2**self.steps
        for param, grad, m, v in zip(
            self.parameters, gradients, self.first_moments, self.second_moments
        ):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * grad
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * grad * grad
            param -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPSILON)


def _feature_matrix(features: Sequence[EmbeddingVector], input_dim: int) -> np.ndarray:
    matrix = vectors_to_matrix(features).astype(np.float64)
    if matrix.shape[1] != input_dim:
        raise DimensionMismatchError(
            f"Features have dim {matrix.shape[1]}, config expects {input_dim}"
        )
    return matrix


def fit_network(
    inputs: np.ndarray, targets: np.ndarray, config: MLPConfig
) -> tuple[MLPNetwork, TrainingLog]:
    """Trains a network on prepared float64 inputs.

    Raises:
        NonFiniteLossError: If an epoch ends with a NaN or infinite loss.
    """
    started = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    network = MLPNetwork.initialize(
        config.input_dim, config.hidden_dims, config.head.output_dim, rng
    )
    optimizer = AdamOptimizer(network.parameters(), config.learning_rate)
    log = TrainingLog(seed=config.seed)
    best_loss = np.inf
    stale_epochs = 0
    n = inputs.shape[0]

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grad_weights, grad_biases = network.loss_and_gradients(
                inputs[batch], targets[batch], config.head, config.dropout_rate, rng
            )
            total += loss * len(batch)
            optimizer.step([g for pair in zip(grad_weights, grad_biases) for g in pair])
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise NonFiniteLossError(epoch, epoch_loss)
        log.epoch_losses.append(epoch_loss)
        logger.debug("epoch=%d loss=%.6f", epoch, epoch_loss)

        if config.early_stopping_patience is not None:
            if epoch_loss < best_loss - config.early_stopping_min_delta:
                best_loss = epoch_loss
                stale_epochs = 0
            else:
                stale_epochs += 1
                if stale_epochs >= config.early_stopping_patience:
                    log.stopped_early = True
                    logger.info("Early stopping at epoch %d", epoch)
                    break

    log.final_loss = log.epoch_losses[-1]
    log.wall_clock_seconds = time.perf_counter() - started
    logger.info(
        "Trained %s head for %d epochs, final loss %.6f",
        config.head.value,
        len(log.epoch_losses),
        log.final_loss,
    )
    return network, log


def _artifact(
    kind: ModelKind, network: MLPNetwork, config: MLPConfig, **metadata: Any
) -> TrainedModelArtifact:
    return TrainedModelArtifact(
        model_kind=kind,
        config=config.to_record(),
        parameters=network.to_arrays(),
        input_dim=config.input_dim,
        **metadata,
    )


def train_binary_classifier(
    features: Sequence[EmbeddingVector],
    labels: Sequence[AlertLabel],
    config: MLPConfig,
    **metadata: Any,
) -> tuple[TrainedModelArtifact, TrainingLog]:
    """Trains the two-logit alert classifier with cross-entropy and dropout.

    Args:
        features: The input embeddings, all of dim config.input_dim.
        labels: The alert labels aligned with features.
        config: The MLP config; its head must be BINARY_CLASSIFIER.
        **metadata: Artifact metadata (backends, pooling, threshold, feature_modality).

    Returns:
        The MLP_BINARY artifact and the training log.

    Raises:
        DimensionMismatchError: If features do not match config.input_dim.
        SingleClassError: If only one alert class is present.
        NonFiniteLossError: If training diverges.
    """
    if config.head is not MLPHead.BINARY_CLASSIFIER:
        raise ModelKindError(f"Config head is {config.head.value}, expected binary_classifier")
    if len(features) != len(labels):
        raise DimensionMismatchError(f"{len(features)} features but {len(labels)} labels")
    targets = np.array([label.value for label in labels], dtype=np.int64)
    if len(np.unique(targets)) < 2:
        raise SingleClassError("Training data must contain both alert classes")
    network, log = fit_network(_feature_matrix(features, config.input_dim), targets, config)
    return _artifact(ModelKind.MLP_BINARY, network, config, **metadata), log


def train_regressor(
    features: Sequence[EmbeddingVector],
    targets: Sequence[float],
    config: MLPConfig,
    **metadata: Any,
) -> tuple[TrainedModelArtifact, TrainingLog]:
    """Trains the danger-score regressor with unclamped mean squared error.

    Raises:
        TargetRangeError: If a target lies outside [0, 10].
        DimensionMismatchError: If features do not match config.input_dim.
    """
    if config.head is not MLPHead.REGRESSOR:
        raise ModelKindError(f"Config head is {config.head.value}, expected regressor")
    if len(features) != len(targets):
        raise DimensionMismatchError(f"{len(features)} features but {len(targets)} targets")
    values = np.asarray(targets, dtype=np.float64)
    if np.any((values < RATING_FLOOR) | (values > RATING_CEILING)):
        raise TargetRangeError("Regression targets must lie in [0, 10]")
    network, log = fit_network(_feature_matrix(features, config.input_dim), values, config)
    return _artifact(ModelKind.MLP_REGRESSOR, network, config, **metadata), log


def _checked_input(
    artifact: TrainedModelArtifact, kind: ModelKind, features: np.ndarray
) -> np.ndarray:
    if artifact.model_kind is not kind:
        raise ModelKindError(
            f"Expected a {kind.value} artifact, got {artifact.model_kind.value}"
        )
    if features.shape[-1] != artifact.input_dim:
        raise DimensionMismatchError(
            f"Feature dim {features.shape[-1]} does not match model input dim {artifact.input_dim}"
        )
    return features.astype(np.float64)


def alert_probabilities(artifact: TrainedModelArtifact, features: np.ndarray) -> np.ndarray:
    """Returns HIGH_ALERT probabilities for an (n, dim) matrix, dropout disabled."""
    inputs = _checked_input(artifact, ModelKind.MLP_BINARY, np.atleast_2d(features))
    logits, _ = MLPNetwork.from_artifact(artifact).forward(inputs)
    return softmax(logits)[:, AlertLabel.HIGH_ALERT.value]


def predict_alert(
    artifact: TrainedModelArtifact, feature: EmbeddingVector
) -> tuple[AlertLabel, float]:
    """Classifies one feature vector.

    Returns:
        The label (HIGH_ALERT iff probability >= 0.5) and the HIGH_ALERT probability.
    """
    probability = float(alert_probabilities(artifact, feature.values)[0])
    return AlertLabel.from_int(probability >= 0.5), probability


def raw_scores(artifact: TrainedModelArtifact, features: np.ndarray) -> np.ndarray:
    """Returns unclamped regressor outputs for an (n, dim) matrix."""
    inputs = _checked_input(artifact, ModelKind.MLP_REGRESSOR, np.atleast_2d(features))
    outputs, _ = MLPNetwork.from_artifact(artifact).forward(inputs)
    return outputs[:, 0]


def clamp_score(raw: float) -> float:
    """Clamps a raw regression output to the rating scale."""
    return float(min(max(raw, RATING_FLOOR), RATING_CEILING))


def predict_score(artifact: TrainedModelArtifact, feature: EmbeddingVector) -> float:
    """Predicts a danger score, clamped into [0, 10]."""
    return clamp_score(float(raw_scores(artifact, feature.values)[0]))
