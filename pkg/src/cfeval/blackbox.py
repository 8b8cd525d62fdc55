"""Binary logistic regression: the black box under explanation and the
whitebox whose own weights define the reference explanations."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .dataset import Dataset, FeatureSchema, Instance, Representation, encode
from .errors import DataError, NumericalError
from .explanation import Explanation, top_k

logger = logging.getLogger(__name__)

MODEL_HEADER = "cfeval-logistic-model v1"


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float = 0.0
    training_loss: float | None = field(default=None, compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise ValueError("weights must be a vector")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise NumericalError("model parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"input has {x.shape[-1]} coordinates, model expects {self.dim}")
        return x

    def logit(self, x) -> np.ndarray:
        return self._check(x) @ self.weights + self.bias

    def proba1(self, x) -> np.ndarray:
        """p(y=1 | x) for a vector or a row-stacked matrix."""
        return expit(self.logit(x))

    def proba_of(self, x, label) -> np.ndarray:
        """p(label | x), with ``label`` broadcast against the rows of ``x``."""
        p1 = self.proba1(x)
        return np.where(np.asarray(label) == 1, p1, 1.0 - p1)

    def labels(self, x) -> np.ndarray:
        return (self.proba1(x) > 0.5).astype(int)


@dataclass(frozen=True)
class Prediction:
    label: int
    probs: tuple[float, float]

    @classmethod
    def from_p1(cls, p1: float) -> "Prediction":
        p1 = float(p1)
        return cls(int(p1 > 0.5), (1.0 - p1, p1))

    def prob(self, label: int) -> float:
        return self.probs[label]


def _vector(rep) -> np.ndarray:
    return rep.vector if isinstance(rep, Representation) else np.asarray(rep, dtype=float)


def predict(model: LogisticModel, rep) -> Prediction:
    """Class probabilities; the label is the argmax, with p=0.5 going to 0."""
    return Prediction.from_p1(model.proba1(_vector(rep)))


def gradient(model: LogisticModel, rep, target_class: int) -> np.ndarray:
    """d p(target_class | x) / d x."""
    p1 = float(model.proba1(_vector(rep)))
    g = p1 * (1.0 - p1) * model.weights
    return g if target_class == 1 else -g


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.5
    epochs: int = 2000
    l2: float = 1e-3


def _bce(z: np.ndarray, y: np.ndarray) -> float:
    # log(1 + e^z) - y z, computed without overflow
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def train_logistic(data, labels: Sequence[int], hyper: TrainConfig | None = None) -> LogisticModel:
    """Full-batch gradient descent on L2-regularised cross-entropy.

    ``data`` is a :class:`Dataset` or an ``(n, d)`` design matrix. Parameters
    start at zero, so the result is a pure function of the inputs.
    """
    hyper = hyper or TrainConfig()
    X = data.matrix if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0 or 1")
    if np.all(y == y[0]):
        raise DataError(f"training labels contain a single class ({int(y[0])})")
    n, d = X.shape
    w, b = np.zeros(d), 0.0
    for epoch in range(hyper.epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            z = X @ w + b
            resid = expit(z) - y
            w = w - hyper.lr * (X.T @ resid / n + hyper.l2 * w)
            b = b - hyper.lr * float(resid.mean())
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise NumericalError(f"training diverged at epoch {epoch}; lower the learning rate (lr={hyper.lr})")
    z = X @ w + b
    loss = _bce(z, y) + 0.5 * hyper.l2 * float(w @ w)
    if not np.isfinite(loss):
        raise NumericalError(f"non-finite training loss; lower the learning rate (lr={hyper.lr})")
    logger.info("trained logistic model: n=%d d=%d final loss %.6f", n, d, loss)
    return LogisticModel(w, b, training_loss=loss)


def accuracy(model: LogisticModel, data: Dataset, labels: Sequence[int] | None = None) -> float:
    y = np.asarray(data.gold_labels if labels is None else labels)
    if any(v is None for v in y):
        raise DataError("accuracy needs a label for every instance")
    return float(np.mean(model.labels(data.matrix) == y.astype(int)))


# ------------------------------------------------------------ ground truth


def feature_effects(model: LogisticModel, schema: FeatureSchema, rep) -> np.ndarray:
    """Per-feature contribution to the logit: sum of weight * value over the span."""
    contrib = model.weights * _vector(rep)
    return np.array([contrib[a:b].sum() for a, b in schema.spans])


def ground_truth_features(
    model: LogisticModel, schema: FeatureSchema, instance: Instance, L: int
) -> Explanation:
    """Top-``L`` features by their effect in favour of the predicted class.

    Effects are signed toward the prediction, so a feature pushing against
    the predicted label ranks below one that is irrelevant. Ties go to the
    lower feature index.
    """
    if not 1 <= L <= len(schema):
        raise DataError(f"L={L} outside [1, {len(schema)}]")
    rep = encode(instance, schema)
    effects = feature_effects(model, schema, rep)
    sign = 1.0 if predict(model, rep).label == 1 else -1.0
    aligned = sign * effects
    idx = top_k(aligned, L)
    return Explanation(tuple(idx), tuple(aligned[idx]))


def recovery_fraction(explanations: Sequence[Explanation], gold: Sequence[Explanation]) -> float:
    """Mean over instances of the share of gold features recovered."""
    if len(explanations) != len(gold):
        raise ValueError(f"{len(explanations)} explanations vs {len(gold)} gold explanations")
    if not gold:
        raise ValueError("no instances")
    fracs = []
    for i, (e, g) in enumerate(zip(explanations, gold)):
        if len(g) == 0:
            raise ValueError(f"instance {i}: empty gold explanation")
        fracs.append(len(set(e.feature_indices) & set(g.feature_indices)) / len(g))
    return float(np.mean(fracs))


# --------------------------------------------------------------- model IO


def save_model(model: LogisticModel, path, schema: FeatureSchema | None = None) -> None:
    lines = [
        MODEL_HEADER,
        f"schema {schema.digest() if schema is not None else '-'}",
        f"dim {model.dim}",
        f"bias {model.bias:.17g}",
    ]
    lines += [f"{w:.17g}" for w in model.weights]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path, schema: FeatureSchema | None = None) -> LogisticModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != MODEL_HEADER:
        raise DataError(f"{path}: not a model file")
    try:
        digest = lines[1].split()[1]
        dim = int(lines[2].split()[1])
        bias = float(lines[3].split()[1])
        weights = np.array([float(x) for x in lines[4:4 + dim]])
    except (IndexError, ValueError):
        raise DataError(f"{path}: malformed model file") from None
    if weights.shape[0] != dim:
        raise DataError(f"{path}: expected {dim} weights, found {weights.shape[0]}")
    if schema is not None:
        if digest != "-" and digest != schema.digest():
            raise DataError(f"{path}: model was trained on a different schema")
        if dim != schema.width:
            raise DataError(f"{path}: model has {dim} weights, schema encodes {schema.width}")
    return LogisticModel(weights, bias)
