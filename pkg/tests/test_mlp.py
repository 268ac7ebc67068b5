import numpy as np
import pytest

from danger_assessment.embeddings.synthetic import class_signal_dataset, linear_target_dataset
from danger_assessment.embeddings.types import EmbeddingKind, EmbeddingVector
from danger_assessment.errors import (
    ArtifactVersionError,
    ConfigError,
    CorruptArtifactError,
    DimensionMismatchError,
    ModelKindError,
    NonFiniteLossError,
    SingleClassError,
    TargetRangeError,
)
from danger_assessment.models.artifact import (
    ModelKind,
    TrainedModelArtifact,
    decode_artifact,
    deserialize_artifact,
    encode_artifact,
    serialize_artifact,
)
from danger_assessment.models.config import MLPConfig, MLPHead
from danger_assessment.models.mlp import (
    MLPNetwork,
    predict_alert,
    predict_score,
    softmax,
    train_binary_classifier,
    train_regressor,
)
from danger_assessment.transformations.transform import AlertLabel

STEP = 1e-5


def _safe_inputs(network, rng, n, dim):
    """Draws inputs whose hidden pre-activations stay clear of the ReLU kink."""
    while True:
        inputs = rng.standard_normal((n, dim))
        _, cache = network.forward(inputs)
        pre_activations = [cache[i][0] for i in range(1, len(cache), 2)]
        if all(np.min(np.abs(pre)) > 1e-3 for pre in pre_activations):
            return inputs


def _numeric_gradients(network, inputs, targets, head):
    gradients = []
    for param in network.parameters():
        grad = np.zeros_like(param)
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + STEP
            plus = network.loss_and_gradients(inputs, targets, head)[0]
            param[index] = original - STEP
            minus = network.loss_and_gradients(inputs, targets, head)[0]
            param[index] = original
            grad[index] = (plus - minus) / (2 * STEP)
        gradients.append(grad)
    return gradients


@pytest.mark.parametrize("head", [MLPHead.BINARY_CLASSIFIER, MLPHead.REGRESSOR])
def test_backprop_matches_finite_differences(head):
    rng = np.random.default_rng(0 if head is MLPHead.BINARY_CLASSIFIER else 1)
    for _ in range(20):
        input_dim = int(rng.integers(2, 6))
        hidden = tuple(int(w) for w in rng.integers(2, 6, size=int(rng.integers(0, 3))))
        network = MLPNetwork.initialize(input_dim, hidden, head.output_dim, rng)
        for bias in network.biases:
            bias += rng.normal(0.0, 0.1, size=bias.shape)
        inputs = _safe_inputs(network, rng, 5, input_dim)
        if head is MLPHead.BINARY_CLASSIFIER:
            targets = rng.integers(0, 2, size=5)
        else:
            targets = rng.uniform(0.0, 10.0, size=5)

        _, grad_weights, grad_biases = network.loss_and_gradients(inputs, targets, head)
        analytic = np.concatenate(
            [g.ravel() for pair in zip(grad_weights, grad_biases) for g in pair]
        )
        numeric = np.concatenate(
            [g.ravel() for g in _numeric_gradients(network, inputs, targets, head)]
        )
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
        assert np.linalg.norm(analytic - numeric) / scale <= 1e-4


def _classifier_config(input_dim, **overrides):
    settings = dict(
        input_dim=input_dim,
        hidden_dims=(32,),
        dropout_rate=0.1,
        learning_rate=0.01,
        epochs=60,
        batch_size=16,
        seed=0,
    )
    settings.update(overrides)
    return MLPConfig(**settings)


def test_classifier_learns_class_signal():
    dataset = class_signal_dataset(n=200, seed=0)
    features, labels = list(dataset.fused), list(dataset.labels)
    artifact, log = train_binary_classifier(
        features[:180], labels[:180], _classifier_config(64), threshold=7.0
    )

    predictions = [predict_alert(artifact, feature)[0] for feature in features[180:]]
    accuracy = np.mean([p is t for p, t in zip(predictions, labels[180:])])
    assert accuracy >= 0.95
    assert artifact.model_kind is ModelKind.MLP_BINARY
    assert len(log.epoch_losses) == 60
    assert log.final_loss < log.epoch_losses[0]


def test_classifier_fits_its_training_set():
    dataset = class_signal_dataset(n=200, seed=0)
    features, labels = list(dataset.fused), list(dataset.labels)
    artifact, _ = train_binary_classifier(features, labels, _classifier_config(64))

    predictions = [predict_alert(artifact, feature)[0] for feature in features]
    assert np.mean([p is t for p, t in zip(predictions, labels)]) >= 0.99


def test_softmax_of_equal_logits_is_even():
    assert np.array_equal(softmax(np.zeros((1, 2))), np.array([[0.5, 0.5]]))
    logits = np.random.default_rng(0).normal(0.0, 20.0, size=(100, 2))
    np.testing.assert_allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-9)


def test_predict_alert_threshold_and_probability_range():
    dataset = class_signal_dataset(n=60, seed=1)
    artifact, _ = train_binary_classifier(
        list(dataset.fused), list(dataset.labels), _classifier_config(64, epochs=5)
    )
    for feature in dataset.fused:
        label, probability = predict_alert(artifact, feature)
        assert 0.0 <= probability <= 1.0
        assert (label is AlertLabel.HIGH_ALERT) == (probability >= 0.5)


def test_regressor_fits_linear_targets():
    dataset, _ = linear_target_dataset(n=200, seed=0)
    config = MLPConfig(
        input_dim=8,
        head=MLPHead.REGRESSOR,
        hidden_dims=(),
        dropout_rate=0.0,
        learning_rate=0.01,
        epochs=400,
        batch_size=16,
        seed=0,
    )
    features, targets = list(dataset.fused), list(dataset.targets)
    artifact, _ = train_regressor(features[:180], targets[:180], config)

    predictions = [predict_score(artifact, feature) for feature in features[180:]]
    assert np.mean((np.array(predictions) - np.array(targets[180:])) ** 2) <= 0.05
    assert all(0.0 <= p <= 10.0 for p in predictions)


def test_regressor_learns_a_constant_target():
    dataset, _ = linear_target_dataset(n=40, seed=4)
    config = MLPConfig(
        input_dim=8,
        head=MLPHead.REGRESSOR,
        hidden_dims=(),
        dropout_rate=0.0,
        learning_rate=0.05,
        epochs=1000,
        batch_size=16,
        seed=0,
    )
    artifact, _ = train_regressor(list(dataset.fused), [4.2] * 40, config)
    for feature in dataset.fused:
        assert predict_score(artifact, feature) == pytest.approx(4.2, abs=1e-3)


def test_zero_epochs_is_a_config_error():
    with pytest.raises(ConfigError, match="epochs must be positive"):
        MLPConfig(input_dim=8, epochs=0)


@pytest.mark.parametrize("weight, expected", [(50.0, 10.0), (-50.0, 0.0)])
def test_regressor_scores_are_clamped(weight, expected):
    artifact = TrainedModelArtifact(
        model_kind=ModelKind.MLP_REGRESSOR,
        config={},
        parameters={"W0": np.full((2, 1), weight), "b0": np.zeros(1)},
        input_dim=2,
    )
    feature = EmbeddingVector(np.ones(2), EmbeddingKind.FUSED)
    assert predict_score(artifact, feature) == expected


def test_regressor_rejects_out_of_range_targets():
    dataset, _ = linear_target_dataset(n=10, seed=2)
    config = MLPConfig(input_dim=8, head=MLPHead.REGRESSOR, hidden_dims=(), epochs=1)
    with pytest.raises(TargetRangeError):
        train_regressor(list(dataset.fused), [11.0] * 10, config)


def test_single_class_training_fails():
    dataset = class_signal_dataset(n=20, seed=0)
    with pytest.raises(SingleClassError):
        train_binary_classifier(
            list(dataset.fused), [AlertLabel.NO_ALERT] * 20, _classifier_config(64, epochs=1)
        )


def test_dimension_and_kind_checks():
    dataset = class_signal_dataset(n=20, seed=0)
    with pytest.raises(DimensionMismatchError):
        train_binary_classifier(
            list(dataset.fused), list(dataset.labels), _classifier_config(10, epochs=1)
        )
    artifact, _ = train_binary_classifier(
        list(dataset.fused), list(dataset.labels), _classifier_config(64, epochs=1)
    )
    with pytest.raises(DimensionMismatchError):
        predict_alert(artifact, dataset.video[0])
    with pytest.raises(ModelKindError):
        predict_score(artifact, dataset.fused[0])


def test_diverging_training_raises_non_finite_loss():
    dataset, _ = linear_target_dataset(n=40, seed=0)
    config = MLPConfig(
        input_dim=8,
        head=MLPHead.REGRESSOR,
        hidden_dims=(4,),
        dropout_rate=0.0,
        learning_rate=1e200,
        epochs=5,
    )
    with np.errstate(all="ignore"), pytest.raises(NonFiniteLossError) as info:
        train_regressor(list(dataset.fused), list(dataset.targets), config)
    assert info.value.epoch == 0


def test_training_is_deterministic_per_seed():
    dataset = class_signal_dataset(n=60, seed=2)
    features, labels = list(dataset.fused), list(dataset.labels)
    first, first_log = train_binary_classifier(features, labels, _classifier_config(64, epochs=5))
    second, second_log = train_binary_classifier(features, labels, _classifier_config(64, epochs=5))
    other, _ = train_binary_classifier(features, labels, _classifier_config(64, epochs=5, seed=1))

    assert first.digest() == second.digest()
    assert first_log.epoch_losses == second_log.epoch_losses
    assert first.digest() != other.digest()


def test_artifacts_round_trip_through_files(tmp_path):
    dataset = class_signal_dataset(n=40, seed=3)
    for seed in range(10):
        artifact, _ = train_binary_classifier(
            list(dataset.fused),
            list(dataset.labels),
            _classifier_config(64, hidden_dims=(8, 4), epochs=2, seed=seed),
            backends=({"backend_id": "mock-visual-32"},),
            threshold=6.5,
        )
        path = tmp_path / f"model_{seed}.vart"
        serialize_artifact(artifact, path)
        loaded = deserialize_artifact(path)

        assert loaded.header() == artifact.header()
        assert loaded.threshold == 6.5
        for name, array in artifact.parameters.items():
            assert np.array_equal(loaded.parameters[name], array)
        for feature in dataset.fused[:5]:
            assert predict_alert(loaded, feature) == predict_alert(artifact, feature)


def test_artifact_version_and_corruption_errors():
    dataset = class_signal_dataset(n=20, seed=0)
    artifact, _ = train_binary_classifier(
        list(dataset.fused), list(dataset.labels), _classifier_config(64, epochs=1)
    )
    data = encode_artifact(artifact)

    newer = TrainedModelArtifact(
        model_kind=artifact.model_kind,
        config=artifact.config,
        parameters=artifact.parameters,
        input_dim=artifact.input_dim,
        format_version=2,
    )
    with pytest.raises(ArtifactVersionError):
        decode_artifact(encode_artifact(newer))

    flipped = bytearray(data)
    flipped[-20] ^= 0xFF
    with pytest.raises(CorruptArtifactError):
        decode_artifact(bytes(flipped))
    with pytest.raises(CorruptArtifactError):
        decode_artifact(data[:-10])
    with pytest.raises(CorruptArtifactError):
        decode_artifact(b"XART" + data[4:])


def test_early_stopping_ends_training():
    dataset = class_signal_dataset(n=40, seed=0)
    config = _classifier_config(
        64, epochs=50, early_stopping_patience=1, early_stopping_min_delta=1e9
    )
    _, log = train_binary_classifier(list(dataset.fused), list(dataset.labels), config)
    assert log.stopped_early
    assert len(log.epoch_losses) == 2
    assert log.to_record()["final_loss"] == log.epoch_losses[-1]
