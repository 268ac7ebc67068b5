import numpy as np
import pytest
from sklearn.svm import SVC

from danger_assessment.embeddings.synthetic import class_signal_dataset
from danger_assessment.embeddings.types import EmbeddingKind, EmbeddingVector
from danger_assessment.errors import (
    ConfigError,
    ConvergenceError,
    ModelKindError,
    SingleClassError,
)
from danger_assessment.models.artifact import ModelKind, deserialize_artifact, serialize_artifact
from danger_assessment.models.config import MLPConfig, SVMConfig, SVMKernel
from danger_assessment.models.mlp import predict_alert
from danger_assessment.models.svm import kernel_gamma, svm_decision_values, svm_predict, train_svm
from danger_assessment.transformations.transform import AlertLabel

CORNERS = {(0.0, 0.0): 0, (1.0, 1.0): 0, (0.0, 1.0): 1, (1.0, 0.0): 1}


def vectors(matrix):
    return [EmbeddingVector(row, EmbeddingKind.TEXT) for row in np.asarray(matrix)]


def xor_points(per_corner=10, seed=0):
    rng = np.random.default_rng(seed)
    points, labels = [], []
    for corner, label in CORNERS.items():
        points.append(np.array(corner) + rng.normal(0.0, 0.05, size=(per_corner, 2)))
        labels.extend([AlertLabel.from_int(label)] * per_corner)
    return np.vstack(points), labels


def test_rbf_solves_xor():
    points, labels = xor_points()
    artifact = train_svm(vectors(points), labels, SVMConfig(kernel_width=0.5))

    assert artifact.model_kind is ModelKind.SVM
    assert artifact.solver["gamma"] == pytest.approx(2.0)
    for corner, label in CORNERS.items():
        predicted, _ = svm_predict(artifact, EmbeddingVector(np.array(corner), EmbeddingKind.TEXT))
        assert predicted is AlertLabel.from_int(label)


def test_linear_kernel_separates_halves():
    rng = np.random.default_rng(1)
    points = rng.uniform(-1.0, 1.0, size=(80, 3))
    points[:, 0] += np.sign(points[:, 0]) * 0.5
    labels = [AlertLabel.from_int(x > 0) for x in points[:, 0]]
    artifact = train_svm(vectors(points), labels, SVMConfig(kernel=SVMKernel.LINEAR))

    decisions = svm_decision_values(artifact, points)
    assert all((d >= 0) == (label is AlertLabel.HIGH_ALERT) for d, label in zip(decisions, labels))


@pytest.mark.parametrize("kernel", [SVMKernel.RBF, SVMKernel.LINEAR])
def test_stored_decision_matches_solver(kernel):
    dataset = class_signal_dataset(n=80, visual_dim=8, text_dim=8, seed=4, signal_strength=1.0)
    features, labels = list(dataset.text), list(dataset.labels)
    config = SVMConfig(kernel=kernel, regularization_c=1.0)
    artifact = train_svm(features, labels, config)

    matrix = np.stack([f.values for f in features]).astype(np.float64)
    reference = SVC(
        kernel=kernel.value,
        C=1.0,
        gamma=kernel_gamma(config, matrix),
        tol=config.tolerance,
        random_state=0,
    ).fit(matrix, [label.value for label in labels])
    assert np.allclose(
        svm_decision_values(artifact, matrix), reference.decision_function(matrix), atol=1e-4
    )


def test_auto_width_uses_feature_variance():
    matrix = np.random.default_rng(5).standard_normal((30, 4)) * 2.0
    gamma = kernel_gamma(SVMConfig(), matrix)
    assert gamma == pytest.approx(1.0 / (4 * matrix.var()))
    assert kernel_gamma(SVMConfig(), np.ones((3, 2))) == 1.0


def test_svm_artifact_round_trips(tmp_path):
    points, labels = xor_points(seed=2)
    artifact = train_svm(vectors(points), labels, SVMConfig(kernel_width=0.5), feature_modality="text")
    path = tmp_path / "svm.vart"
    serialize_artifact(artifact, path)
    loaded = deserialize_artifact(path)

    assert loaded.feature_modality == "text"
    assert np.array_equal(svm_decision_values(loaded, points), svm_decision_values(artifact, points))


def test_single_class_and_kind_errors():
    points, labels = xor_points()
    with pytest.raises(SingleClassError):
        train_svm(vectors(points), [AlertLabel.HIGH_ALERT] * len(points), SVMConfig())

    artifact = train_svm(vectors(points), labels, SVMConfig(kernel_width=0.5))
    with pytest.raises(ModelKindError):
        predict_alert(artifact, EmbeddingVector(np.zeros(2), EmbeddingKind.TEXT))


def test_iteration_cap_raises_convergence_error():
    dataset = class_signal_dataset(n=80, visual_dim=8, text_dim=8, seed=0, signal_strength=0.5)
    with pytest.raises(ConvergenceError):
        train_svm(list(dataset.text), list(dataset.labels), SVMConfig(max_iter=1))


def test_invalid_model_configs():
    with pytest.raises(ConfigError):
        SVMConfig(regularization_c=0.0)
    with pytest.raises(ConfigError):
        SVMConfig(kernel_width="wide")
    with pytest.raises(ConfigError):
        MLPConfig(input_dim=4, dropout_rate=1.0)


def test_linear_kernel_cannot_solve_xor():
    corners = np.array(list(CORNERS))
    labels = [AlertLabel.from_int(label) for label in CORNERS.values()]
    artifact = train_svm(vectors(corners), labels, SVMConfig(kernel=SVMKernel.LINEAR))

    predictions = [svm_predict(artifact, vector)[0] for vector in vectors(corners)]
    accuracy = np.mean([p is t for p, t in zip(predictions, labels)])
    assert accuracy <= 0.75


def test_swapped_labels_flip_decision_values():
    points, labels = xor_points(seed=3)
    swapped = [
        AlertLabel.NO_ALERT if label is AlertLabel.HIGH_ALERT else AlertLabel.HIGH_ALERT
        for label in labels
    ]
    config = SVMConfig(kernel_width=0.5)
    original = svm_decision_values(train_svm(vectors(points), labels, config), points)
    flipped = svm_decision_values(train_svm(vectors(points), swapped, config), points)

    assert np.all(np.sign(flipped) == -np.sign(original))
    np.testing.assert_allclose(flipped, -original, atol=1e-2)
