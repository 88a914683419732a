"""Binary relevance classifiers, cross-validation and Pareto model selection.

Two classifiers are provided: a linear SVM trained with per-example SGD on
the hinge + L2 objective, and a feed-forward MLP (logistic hidden layers,
softmax output) trained with full-batch gradient descent. Both are
deterministic for a fixed seed. Labels are +1 (positive / relevant) and
-1 (negative / irrelevant).

The SVM regularizer is ||w||^2 / (2 C): larger C means a softer margin, so
the classic C semantics where the best reported C = 5 corresponds to light
regularization on high-dimensional text vectors. The step size decays as
step_size / sqrt(epoch).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

POSITIVE = 1
NEGATIVE = -1

DEFAULT_SVM_C = 5.0
DEFAULT_SVM_STEP_SIZE = 0.05
DEFAULT_SVM_ITERATIONS = 100
DEFAULT_MLP_HIDDEN = (10, 10, 10)
DEFAULT_MLP_ITERATIONS = 200
DEFAULT_MLP_LEARNING_RATE = 0.5

# Hyperparameter search grids for model selection.
SVM_C_GRID = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0)
SVM_STEP_GRID = (0.1, 0.5, 1.0, 1.5, 2.0, 5.0)
MLP_TOTAL_LAYER_GRID = tuple(range(2, 9))
MLP_NEURON_GRID = (5, 7, 10, 12, 14, 16, 18, 20)
VECTOR_SIZE_GRID = (30, 50, 80, 100, 200, 300, 500, 750, 1000, 1500, 3000)


@dataclass(frozen=True)
class LabeledExample:
    vector: np.ndarray
    label: int
    post_id: str = ""

    def __post_init__(self) -> None:
        if self.label not in (POSITIVE, NEGATIVE):
            raise ValueError(f"label must be +1 or -1: {self.label}")


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def tpr(self) -> float:
        if self.tp + self.fn == 0:
            raise ValueError("TPR undefined without positive examples")
        return self.tp / (self.tp + self.fn)

    @property
    def tnr(self) -> float:
        if self.tn + self.fp == 0:
            raise ValueError("TNR undefined without negative examples")
        return self.tn / (self.tn + self.fp)


class Classifier(Protocol):
    def predict(self, vector: np.ndarray) -> int: ...


def _split_xy(data: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    if not data:
        raise ValueError("empty training set")
    dim = len(data[0].vector)
    if any(len(ex.vector) != dim for ex in data):
        raise ValueError("inconsistent vector dimensions in training set")
    labels = {ex.label for ex in data}
    if labels != {POSITIVE, NEGATIVE}:
        raise ValueError("degenerate training set: both classes required")
    x = np.asarray([ex.vector for ex in data], dtype=np.float64)
    y = np.asarray([ex.label for ex in data], dtype=np.float64)
    return x, y


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    c: float
    step_size: float
    max_iterations: int

    def decision_value(self, vector: np.ndarray) -> float:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != self.weights.shape:
            raise ValueError(
                f"dimension mismatch: model {self.weights.shape[0]}, input {vector.shape}"
            )
        return float(self.weights @ vector + self.bias)

    def predict(self, vector: np.ndarray) -> int:
        return POSITIVE if self.decision_value(vector) >= 0 else NEGATIVE


def train_svm(
    data: Sequence[LabeledExample],
    c: float = DEFAULT_SVM_C,
    step_size: float = DEFAULT_SVM_STEP_SIZE,
    max_iterations: int = DEFAULT_SVM_ITERATIONS,
    rng_seed: int = 0,
) -> LinearSvmModel:
    """Hinge-loss + L2 SGD, one shuffled pass per epoch, step/sqrt(epoch)."""
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if c <= 0 or step_size <= 0:
        raise ValueError("c and step_size must be positive")
    x, y = _split_xy(data)
    n, dim = x.shape
    rng = np.random.default_rng(rng_seed)
    w = np.zeros(dim, dtype=np.float64)
    b = 0.0
    lam = 1.0 / c
    for epoch in range(1, max_iterations + 1):
        eta = step_size / math.sqrt(epoch)
        # For eta/c >= 1 the multiplicative L2 shrink would flip sign and
        # diverge (reachable at extreme grid corners); clamp it at zero.
        shrink = max(0.0, 1.0 - eta * lam)
        for i in rng.permutation(n):
            margin = y[i] * (w @ x[i] + b)
            w *= shrink
            if margin < 1.0:
                w += eta * y[i] * x[i]
                b += eta * y[i]
    return LinearSvmModel(
        weights=w, bias=b, c=c, step_size=step_size, max_iterations=max_iterations
    )


def predict_svm(model: LinearSvmModel, vector: np.ndarray) -> int:
    return model.predict(vector)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    max_iterations: int

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities, shape (n, 2)."""
        a = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if a.shape[1] != self.layer_sizes[0]:
            raise ValueError(
                f"dimension mismatch: model {self.layer_sizes[0]}, input {a.shape[1]}"
            )
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = _sigmoid(a @ w + b)
        return np.exp(_log_softmax(a @ self.weights[-1] + self.biases[-1]))

    def predict(self, vector: np.ndarray) -> int:
        probs = self.forward(vector)[0]
        return POSITIVE if probs[1] > probs[0] else NEGATIVE


def _init_mlp_params(
    layer_sizes: Sequence[int], rng: np.random.Generator
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases = [], []
    for n_in, n_out in itertools.pairwise(layer_sizes):
        weights.append(rng.normal(0.0, 1.0 / math.sqrt(n_in), size=(n_in, n_out)))
        biases.append(np.zeros(n_out, dtype=np.float64))
    return weights, biases


def mlp_loss_and_gradients(
    layer_sizes: Sequence[int],
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    x: np.ndarray,
    y_index: np.ndarray,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy loss and its analytic gradients.

    y_index holds output-class indices (0 = negative, 1 = positive). Exposed
    separately from training so the gradients can be checked against finite
    differences.
    """
    n = x.shape[0]
    activations = [x]
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        a = _sigmoid(a @ w + b)
        activations.append(a)
    logits = a @ weights[-1] + biases[-1]
    log_probs = _log_softmax(logits)
    loss = -float(log_probs[np.arange(n), y_index].mean())

    delta = np.exp(log_probs)
    delta[np.arange(n), y_index] -= 1.0
    delta /= n
    grad_w: list[np.ndarray] = [np.empty(0)] * len(weights)
    grad_b: list[np.ndarray] = [np.empty(0)] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            hidden = activations[layer]
            delta = (delta @ weights[layer].T) * hidden * (1.0 - hidden)
    return loss, grad_w, grad_b


def train_mlp(
    data: Sequence[LabeledExample],
    layer_sizes: Sequence[int] | None = None,
    max_iterations: int = DEFAULT_MLP_ITERATIONS,
    rng_seed: int = 0,
    learning_rate: float = DEFAULT_MLP_LEARNING_RATE,
) -> MlpModel:
    """Full-batch gradient descent on cross-entropy; deterministic per seed."""
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    x, y = _split_xy(data)
    n, dim = x.shape
    if layer_sizes is None:
        layer_sizes = (dim, *DEFAULT_MLP_HIDDEN, 2)
    layer_sizes = tuple(int(s) for s in layer_sizes)
    if layer_sizes[0] != dim:
        raise ValueError(f"input layer size {layer_sizes[0]} != feature dimension {dim}")
    if layer_sizes[-1] != 2:
        raise ValueError("output layer must have 2 neurons")
    if any(s < 1 for s in layer_sizes):
        raise ValueError("layer sizes must be positive")
    y_index = (y > 0).astype(np.intp)
    rng = np.random.default_rng(rng_seed)
    weights, biases = _init_mlp_params(layer_sizes, rng)
    for _ in range(max_iterations):
        _, grad_w, grad_b = mlp_loss_and_gradients(layer_sizes, weights, biases, x, y_index)
        for layer in range(len(weights)):
            weights[layer] -= learning_rate * grad_w[layer]
            biases[layer] -= learning_rate * grad_b[layer]
    return MlpModel(
        layer_sizes=layer_sizes, weights=weights, biases=biases, max_iterations=max_iterations
    )


def predict_mlp(model: MlpModel, vector: np.ndarray) -> int:
    return model.predict(vector)


def evaluate(model: Classifier, test: Sequence[LabeledExample]) -> ConfusionCounts:
    """Confusion counts of a trained classifier on labeled examples."""
    if not test:
        raise ValueError("empty test set")
    counts = ConfusionCounts()
    for example in test:
        predicted = model.predict(example.vector)
        if example.label == POSITIVE:
            if predicted == POSITIVE:
                counts.tp += 1
            else:
                counts.fn += 1
        else:
            if predicted == NEGATIVE:
                counts.tn += 1
            else:
                counts.fp += 1
    return counts


@dataclass(frozen=True)
class SvmConfig:
    c: float = DEFAULT_SVM_C
    step_size: float = DEFAULT_SVM_STEP_SIZE
    max_iterations: int = DEFAULT_SVM_ITERATIONS

    def train(self, data: Sequence[LabeledExample], rng_seed: int = 0) -> LinearSvmModel:
        return train_svm(data, self.c, self.step_size, self.max_iterations, rng_seed)


@dataclass(frozen=True)
class MlpConfig:
    hidden_layers: tuple[int, ...] = DEFAULT_MLP_HIDDEN
    max_iterations: int = DEFAULT_MLP_ITERATIONS
    learning_rate: float = DEFAULT_MLP_LEARNING_RATE

    def train(self, data: Sequence[LabeledExample], rng_seed: int = 0) -> MlpModel:
        dim = len(data[0].vector)
        layer_sizes = (dim, *self.hidden_layers, 2)
        return train_mlp(data, layer_sizes, self.max_iterations, rng_seed, self.learning_rate)


class TrainerConfig(Protocol):
    def train(self, data: Sequence[LabeledExample], rng_seed: int = 0) -> Classifier: ...


def stratified_folds(
    data: Sequence[LabeledExample], k_folds: int, rng_seed: int = 0
) -> list[list[int]]:
    """Deterministic stratified partition into k folds of example indices."""
    if k_folds < 2:
        raise ValueError("k_folds must be >= 2")
    if len(data) < k_folds:
        raise ValueError(f"need at least {k_folds} examples, got {len(data)}")
    pos = [i for i, ex in enumerate(data) if ex.label == POSITIVE]
    neg = [i for i, ex in enumerate(data) if ex.label == NEGATIVE]
    if len(pos) < 2 or len(neg) < 2:
        raise ValueError("each class needs at least 2 examples for stratified folds")
    rng = np.random.default_rng(rng_seed)
    ordered = [pos[j] for j in rng.permutation(len(pos))]
    ordered += [neg[j] for j in rng.permutation(len(neg))]
    folds: list[list[int]] = [[] for _ in range(k_folds)]
    for position, index in enumerate(ordered):
        folds[position % k_folds].append(index)
    return folds


@dataclass
class CrossValidationResult:
    mean_tpr: float
    mean_tnr: float
    fold_counts: list[ConfusionCounts] = field(default_factory=list)


def cross_validate(
    data: Sequence[LabeledExample],
    config: TrainerConfig,
    k_folds: int = 10,
    rng_seed: int = 0,
) -> CrossValidationResult:
    """Mean TPR/TNR over a deterministic stratified k-fold split.

    Folds whose validation part lacks a class are skipped in that rate's
    mean (relevant only when k approaches the class counts).
    """
    folds = stratified_folds(data, k_folds, rng_seed)
    tprs, tnrs, all_counts = [], [], []
    for fold in folds:
        held_out = set(fold)
        train_part = [ex for i, ex in enumerate(data) if i not in held_out]
        valid_part = [data[i] for i in fold]
        model = config.train(train_part, rng_seed)
        counts = evaluate(model, valid_part)
        all_counts.append(counts)
        if counts.tp + counts.fn > 0:
            tprs.append(counts.tpr)
        if counts.tn + counts.fp > 0:
            tnrs.append(counts.tnr)
    return CrossValidationResult(
        mean_tpr=float(np.mean(tprs)),
        mean_tnr=float(np.mean(tnrs)),
        fold_counts=all_counts,
    )


@dataclass(frozen=True)
class GridResult:
    config: object
    tpr: float
    tnr: float


def _strictly_dominates(a: GridResult, b: GridResult) -> bool:
    return a.tpr >= b.tpr and a.tnr >= b.tnr and (a.tpr > b.tpr or a.tnr > b.tnr)


def pareto_select(results: Sequence[GridResult]) -> tuple[list[GridResult], GridResult]:
    """Pareto-dominant configurations and the one closest to (TPR, TNR) = (1, 1).

    Ties on distance break toward higher TPR, then lexicographic config
    order, so selection is total and deterministic.
    """
    if not results:
        raise ValueError("no grid results to select from")
    dominant = [
        r
        for r in results
        if not any(_strictly_dominates(other, r) for other in results if other is not r)
    ]
    chosen = min(
        dominant,
        key=lambda r: (math.hypot(1.0 - r.tpr, 1.0 - r.tnr), -r.tpr, repr(r.config)),
    )
    return dominant, chosen


def grid_search(
    data: Sequence[LabeledExample],
    configs: Iterable[TrainerConfig],
    k_folds: int = 10,
    rng_seed: int = 0,
    progress: Callable[[TrainerConfig, CrossValidationResult], None] | None = None,
) -> list[GridResult]:
    """Cross-validate every configuration; order of results follows configs."""
    results = []
    for config in configs:
        cv = cross_validate(data, config, k_folds, rng_seed)
        if progress is not None:
            progress(config, cv)
        results.append(GridResult(config=config, tpr=cv.mean_tpr, tnr=cv.mean_tnr))
    return results


def default_svm_grid() -> list[SvmConfig]:
    return [SvmConfig(c=c, step_size=s) for c in SVM_C_GRID for s in SVM_STEP_GRID]


def default_mlp_grid() -> list[MlpConfig]:
    # Layer counts include input and output; 2 total layers means no hidden
    # layer, where the neuron count is moot and one config suffices.
    grid = [MlpConfig(hidden_layers=())]
    grid += [
        MlpConfig(hidden_layers=(neurons,) * (total - 2))
        for total in MLP_TOTAL_LAYER_GRID
        for neurons in MLP_NEURON_GRID
        if total > 2
    ]
    return grid
