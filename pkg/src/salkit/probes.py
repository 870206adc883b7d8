"""Leakage probes and the iterative null-space projection baseline.

Probes are L2-regularized logistic classifiers trained by full-batch gradient
descent: a primal one on raw features and a dual one on kernel columns. They
measure how much guarded-attribute (or task) signal a representation still
carries. The INLP baseline repeatedly trains an attribute probe, removes the
probe's weight direction(s) with a rank-one projection, and stops once the
probe cannot beat chance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import LabeledDataset
from .errors import ContractError, NumericError
from .kernels import KernelSpec, gram_matrix, kappa
from .linear import SalEraser, project_inplace

MIN_SAMPLES = 10


@dataclass(frozen=True)
class TrainConfig:
    """Gradient-descent settings shared by all probes."""

    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    seed: int = 0


def _encode_labels(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    try:
        classes = np.array(sorted(set(labels.tolist())))
    except TypeError:
        classes = np.array(sorted(set(labels.tolist()), key=str))
    if classes.size < 2:
        raise ContractError("probe training needs at least two classes")
    index = {c: i for i, c in enumerate(classes.tolist())}
    return classes, np.array([index[v] for v in labels.tolist()])


def _fit_logistic(
    features: np.ndarray, y_idx: np.ndarray, n_classes: int, config: TrainConfig
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Full-batch gradient descent on the (binary or softmax) logistic loss.

    Binary returns a single weight column; multiclass one column per class.
    """
    n, d = features.shape
    rng = np.random.default_rng(config.seed)
    lr, l2 = config.learning_rate, config.l2
    losses: list[float] = []

    if n_classes == 2:
        w = 0.001 * rng.standard_normal(d)
        b = 0.0
        y = (y_idx == 1).astype(float)
        sign = 2.0 * y - 1.0
        for _ in range(config.epochs):
            scores = features @ w + b
            loss = float(np.logaddexp(0.0, -sign * scores).mean()) + 0.5 * l2 * float(w @ w)
            if not np.isfinite(loss):
                raise NumericError("probe training diverged (non-finite loss)")
            losses.append(loss)
            err = expit(scores) - y
            w -= lr * (features.T @ err / n + l2 * w)
            b -= lr * float(err.mean())
        return w.reshape(-1, 1), np.array([b]), losses

    w = 0.001 * rng.standard_normal((d, n_classes))
    b = np.zeros(n_classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_idx] = 1.0
    for _ in range(config.epochs):
        scores = features @ w + b
        shifted = scores - scores.max(axis=1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=1))
        loss = float((log_z - shifted[np.arange(n), y_idx]).mean())
        loss += 0.5 * l2 * float((w * w).sum())
        if not np.isfinite(loss):
            raise NumericError("probe training diverged (non-finite loss)")
        losses.append(loss)
        p = np.exp(shifted - log_z[:, None])
        err = (p - onehot) / n
        w -= lr * (features.T @ err + l2 * w)
        b -= lr * err.sum(axis=0)
    return w, b, losses


def _scores_to_labels(scores: np.ndarray, classes: np.ndarray) -> np.ndarray:
    if scores.shape[1] == 1:
        return classes[(scores[:, 0] > 0).astype(int)]
    return classes[np.argmax(scores, axis=1)]


@dataclass(frozen=True)
class LinearProbe:
    """Logistic probe on raw features. Binary probes keep a single weight vector."""

    weights: np.ndarray  # d (binary) or d x C
    bias: np.ndarray
    classes: np.ndarray
    config: TrainConfig
    train_accuracy: float
    loss_history: np.ndarray = field(repr=False)

    def decision_scores(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        w = self.weights.reshape(-1, 1) if self.weights.ndim == 1 else self.weights
        return inputs @ w + self.bias

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return _scores_to_labels(self.decision_scores(inputs), self.classes)


@dataclass(frozen=True)
class KernelProbe:
    """Logistic probe on kernel columns against the stored training inputs.

    Kernel values are divided by the mean training Gram diagonal before
    training and prediction, which keeps the shared step size usable across
    kernel families of very different magnitudes.
    """

    spec: KernelSpec
    dual_weights: np.ndarray  # n (binary) or n x C
    bias: np.ndarray
    train_inputs: np.ndarray
    scale: float
    classes: np.ndarray
    config: TrainConfig
    train_accuracy: float
    loss_history: np.ndarray = field(repr=False)

    def decision_scores(self, inputs: np.ndarray) -> np.ndarray:
        feats = kappa(self.spec, self.train_inputs, np.asarray(inputs, dtype=float))
        feats = np.atleast_2d(feats) / self.scale
        w = self.dual_weights.reshape(-1, 1) if self.dual_weights.ndim == 1 else self.dual_weights
        return feats @ w + self.bias

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return _scores_to_labels(self.decision_scores(inputs), self.classes)


def _check_probe_inputs(inputs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2:
        raise ContractError("probe inputs must be a 2-D matrix")
    if inputs.shape[0] != len(labels):
        raise ContractError("inputs and labels disagree on sample count")
    if inputs.shape[0] < MIN_SAMPLES:
        raise ContractError(f"probe training needs at least {MIN_SAMPLES} samples")
    if not np.isfinite(inputs).all():
        raise NumericError("non-finite probe inputs")
    return inputs


def train_linear_probe(
    inputs: np.ndarray, labels: np.ndarray, config: TrainConfig = TrainConfig()
) -> LinearProbe:
    """Train a linear logistic probe. Deterministic given the config seed."""
    inputs = _check_probe_inputs(inputs, labels)
    classes, y_idx = _encode_labels(labels)
    w, b, losses = _fit_logistic(inputs, y_idx, classes.size, config)
    predicted = _scores_to_labels(inputs @ w + b, classes)
    acc = float(np.mean(predicted == np.asarray(labels)))
    return LinearProbe(
        weights=w[:, 0] if classes.size == 2 else w,
        bias=b,
        classes=classes,
        config=config,
        train_accuracy=acc,
        loss_history=np.array(losses),
    )


def train_kernel_probe(
    inputs: np.ndarray,
    labels: np.ndarray,
    spec: KernelSpec,
    config: TrainConfig = TrainConfig(),
) -> KernelProbe:
    """Train a dual logistic probe with the given kernel."""
    inputs = _check_probe_inputs(inputs, labels)
    classes, y_idx = _encode_labels(labels)
    gram = gram_matrix(spec, inputs)
    scale = float(np.diag(gram).mean())
    if scale <= 0:
        scale = 1.0
    w, b, losses = _fit_logistic(gram / scale, y_idx, classes.size, config)
    predicted = _scores_to_labels((gram / scale) @ w + b, classes)
    acc = float(np.mean(predicted == np.asarray(labels)))
    return KernelProbe(
        spec=spec,
        dual_weights=w[:, 0] if classes.size == 2 else w,
        bias=b,
        train_inputs=inputs.copy(),
        scale=scale,
        classes=classes,
        config=config,
        train_accuracy=acc,
        loss_history=np.array(losses),
    )


@dataclass(frozen=True)
class InlpEraser:
    """Directions removed by iterative null-space projection.

    ``directions`` has one orthonormal row per removed direction; the composed
    projector is I - D^T D. ``probe_accuracies`` records the attribute probe
    accuracy seen at the start of each performed iteration.
    """

    directions: np.ndarray  # m x d, orthonormal rows
    iterations: int
    input_mean: np.ndarray
    probe_accuracies: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.probe_accuracies is None:
            object.__setattr__(self, "probe_accuracies", np.zeros(0))

    @property
    def dim(self) -> int:
        return self.input_mean.shape[0]

    def projector(self) -> np.ndarray:
        d = self.dim
        if self.directions.shape[0] == 0:
            return np.eye(d)
        return np.eye(d) - self.directions.T @ self.directions


def fit_inlp(
    dataset: LabeledDataset,
    iterations: int,
    probe_config: TrainConfig = TrainConfig(),
) -> InlpEraser:
    """Iteratively train an attribute probe and null out its weight direction(s).

    Each iteration trains a linear probe for the guarded labels on the current
    (projected) inputs. Binary probes contribute their single weight vector,
    multiclass probes one vector per class. New directions are orthogonalized
    against those already removed, so the composed projector stays symmetric
    and idempotent. Stops early once the probe cannot beat the majority-class
    rate by more than 0.02.
    """
    if not dataset.is_centered():
        raise ContractError("dataset is not centered; call center() first")
    if iterations < 0:
        raise ContractError(f"iterations must be non-negative, got {iterations}")
    labels = dataset.guarded_labels
    _, counts = np.unique(labels, return_counts=True)
    chance = counts.max() / counts.sum()

    x = dataset.inputs.copy()
    d = dataset.n_features
    directions: list[np.ndarray] = []
    accuracies: list[float] = []
    performed = 0
    for _ in range(iterations):
        probe = train_linear_probe(x, labels, probe_config)
        accuracies.append(probe.train_accuracy)
        if probe.train_accuracy <= chance + 0.02:
            break
        performed += 1
        if probe.weights.ndim == 1:
            candidates = [probe.weights]
        else:
            candidates = [probe.weights[:, j] for j in range(probe.weights.shape[1])]
        for vec in candidates:
            vec = vec.copy()
            for prev in directions:
                vec -= (prev @ vec) * prev
            nrm = float(np.linalg.norm(vec))
            if nrm <= 1e-10:
                continue
            vec /= nrm
            directions.append(vec)
            x = x - np.outer(x @ vec, vec)

    dir_matrix = np.array(directions) if directions else np.zeros((0, d))
    return InlpEraser(
        directions=dir_matrix,
        iterations=performed,
        input_mean=dataset.input_mean.copy(),
        probe_accuracies=np.array(accuracies),
    )


def apply_eraser(eraser, inputs: np.ndarray) -> np.ndarray:
    """Apply a fitted in-place eraser to one vector or a matrix of row vectors."""
    inputs = np.asarray(inputs, dtype=float)
    if isinstance(eraser, SalEraser):
        return project_inplace(eraser, inputs)
    if isinstance(eraser, InlpEraser):
        if inputs.shape[-1] != eraser.dim:
            raise ContractError(
                f"input dimension {inputs.shape[-1]} does not match eraser "
                f"dimension {eraser.dim}"
            )
        centered = inputs - eraser.input_mean
        return centered @ eraser.projector() + eraser.input_mean
    raise ContractError(f"unsupported eraser type {type(eraser).__name__}")
