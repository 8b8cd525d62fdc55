"""Counterfactual faithfulness scores and the erasure baselines."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .blackbox import LogisticModel, Prediction
from .counterfactual import CounterfactualResult
from .dataset import Dataset, FeatureSchema, Representation
from .errors import NumericalError
from .explanation import Explanation

REMOVAL_MODES = ("delete", "mask")


@dataclass(frozen=True)
class MethodScores:
    """All scores for one explainer under one removal mode.

    ``proximity_soft`` is the mean distance of the counterfactuals used for
    the soft scores; it differs from ``proximity`` when the discrete search
    picks max-drop rather than random combinations.
    """

    validity: float
    proximity: float
    ces: float
    validity_soft: float
    proximity_soft: float
    ces_soft: float
    comp: float
    suff: float
    dfr: float
    ground_truth_fraction: float
    removal_mode: str

    def to_dict(self) -> dict:
        return asdict(self)


def _nonempty(results):
    if len(results) == 0:
        raise ValueError("no counterfactual results")
    return results


def validity(results: Sequence[CounterfactualResult]) -> float:
    _nonempty(results)
    return float(np.mean([r.flipped for r in results]))


def proximity(results: Sequence[CounterfactualResult]) -> float:
    _nonempty(results)
    return float(np.mean([r.distance for r in results]))


def _total_distance(results) -> float:
    total = float(np.sum([r.distance for r in _nonempty(results)]))
    if total <= 0:
        raise NumericalError("all counterfactual distances are zero; the score is undefined")
    return total


def ces(results: Sequence[CounterfactualResult]) -> float:
    """Flip count over total distance (ratio of sums, i.e. validity / proximity)."""
    return float(np.sum([r.flipped for r in results])) / _total_distance(results)


def _drops(results, original_predictions) -> np.ndarray:
    _nonempty(results)
    if original_predictions is None:
        return np.array([r.prob_drop for r in results])
    if len(original_predictions) != len(results):
        raise ValueError("one original prediction per result is required")
    out = []
    for r, pred in zip(results, original_predictions):
        y = pred.label
        out.append(pred.probs[y] - r.p_cf[y])
    return np.array(out)


def validity_soft(
    results: Sequence[CounterfactualResult], original_predictions: Sequence[Prediction] | None = None
) -> float:
    """Mean drop of the originally predicted class probability.

    Defaults to the prediction recorded on each result.
    """
    return float(np.mean(_drops(results, original_predictions)))


def ces_soft(
    results: Sequence[CounterfactualResult], original_predictions: Sequence[Prediction] | None = None
) -> float:
    return float(np.sum(_drops(results, original_predictions))) / _total_distance(results)


# ----------------------------------------------------------------- erasure


def erase(rep: Representation, explanation: Explanation, mode: str, schema: FeatureSchema) -> Representation:
    """Replace the explained spans by zeros (delete) or the mask fill (mask)."""
    explanation.check(len(schema))
    fill = schema.fill_vector(mode)
    coords = explanation.mask(len(schema))[schema.coord_feature]
    return Representation(np.where(coords, fill, rep.vector), rep.spans)


def _explained_matrix(dataset: Dataset, explanations: Sequence[Explanation]) -> np.ndarray:
    if len(explanations) != len(dataset):
        raise ValueError(f"{len(explanations)} explanations for {len(dataset)} instances")
    M = len(dataset.schema)
    for e in explanations:
        e.check(M)
    return np.array([e.mask(M) for e in explanations])


def _erased(dataset: Dataset, feature_mask: np.ndarray, mode: str) -> np.ndarray:
    fill = dataset.schema.fill_vector(mode)
    return np.where(feature_mask[:, dataset.schema.coord_feature], fill, dataset.matrix)


def erasure_drops(
    model: LogisticModel, dataset: Dataset, explanations: Sequence[Explanation], mode: str, keep: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Per-instance p(y_hat) drop and flip indicator after erasure.

    ``keep=False`` erases the explained features; ``keep=True`` erases their
    complement.
    """
    E = _explained_matrix(dataset, explanations)
    X = dataset.matrix
    y_hat = model.labels(X)
    X_erased = _erased(dataset, ~E if keep else E, mode)
    drop = model.proba_of(X, y_hat) - model.proba_of(X_erased, y_hat)
    return drop, model.labels(X_erased) != y_hat


def comprehensiveness(model, dataset, explanations, mode: str = "delete") -> float:
    return float(np.mean(erasure_drops(model, dataset, explanations, mode)[0]))


def sufficiency(model, dataset, explanations, mode: str = "delete") -> float:
    return float(np.mean(erasure_drops(model, dataset, explanations, mode, keep=True)[0]))


def dfr(model, dataset, explanations, mode: str = "delete") -> float:
    """Fraction of predictions flipped by erasing the explanation."""
    return float(np.mean(erasure_drops(model, dataset, explanations, mode)[1]))
