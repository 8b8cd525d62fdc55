"""Counterfactual search restricted to the explained features.

Two routes: exhaustive enumeration of categorical value combinations, and
gradient descent on the embeddings of the explained positions under a
proximity + alpha * p(y_hat) objective.
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .blackbox import LogisticModel, Prediction, gradient, predict
from .dataset import Dataset, FeatureSchema, Instance, Representation, encode
from .errors import ConfigError, DataError, NumericalError
from .explanation import Explanation
from .seeding import derive_seed

DISTANCE_METRICS = ("euclidean", "cosine", "constant")


@dataclass(frozen=True, eq=False)
class CounterfactualResult:
    """Outcome of one search.

    ``edited_values`` maps feature index to the new vocabulary index
    (discrete) or the new embedding vector (continuous).
    """

    original: Instance
    explanation: Explanation
    original_prediction: Prediction
    edited_values: dict
    y_cf: int
    p_cf: tuple[float, float]
    flipped: bool
    distance: float
    n_evaluated: int = 0
    iterations: int = 0

    @property
    def prob_drop(self) -> float:
        """p(y_hat | x) - p(y_hat | x_cf)."""
        y = self.original_prediction.label
        return self.original_prediction.probs[y] - self.p_cf[y]


@dataclass(frozen=True)
class OptimizerConfig:
    alpha: float = 1.0
    step_size: float = 0.05
    max_iters: int = 500
    init_noise_scale: float = 0.01
    seed: int = 0
    tol: float = 1e-8

    def __post_init__(self):
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.step_size <= 0 or self.max_iters < 1:
            raise ConfigError("step_size and max_iters must be positive")
        if self.init_noise_scale < 0:
            raise ConfigError("init_noise_scale must be non-negative")


def _vec(rep) -> np.ndarray:
    return rep.vector if isinstance(rep, Representation) else np.asarray(rep, dtype=float)


def distance(rep_a, rep_b, metric: str = "euclidean", c: float = 1.0) -> float:
    if metric == "constant":
        return float(c)
    a, b = _vec(rep_a), _vec(rep_b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if metric == "euclidean":
        return float(np.linalg.norm(a - b))
    if metric == "cosine":
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na == 0 or nb == 0:
            raise ValueError("cosine distance is undefined for a zero vector")
        return float(1.0 - (a @ b) / (na * nb))
    raise ConfigError(f"unknown distance metric {metric!r}; choose from {DISTANCE_METRICS}")


def _row_distances(X: np.ndarray, x: np.ndarray, metric: str, c: float) -> np.ndarray:
    if metric == "constant":
        return np.full(X.shape[0], float(c))
    if metric == "euclidean":
        return np.linalg.norm(X - x, axis=1)
    return np.array([distance(row, x, metric) for row in X])


# ----------------------------------------------------------------- discrete


def _require_kind(schema: FeatureSchema, indices, categorical: bool) -> None:
    for j in indices:
        f = schema[j]
        if f.is_categorical != categorical:
            want = "categorical" if categorical else "embedded"
            raise DataError(f"feature {f.name!r} (index {j}) is {f.kind}, search needs {want}")


def discrete_search(
    model: LogisticModel,
    schema: FeatureSchema,
    instance: Instance,
    explanation: Explanation,
    soft: bool = False,
    seed: int = 0,
    metric: str = "euclidean",
    c: float = 1.0,
) -> CounterfactualResult:
    """Enumerate value combinations of the explained features.

    Combinations are visited in lexicographic vocabulary order, skipping the
    original assignment; the first that flips the label is returned. Without
    a flip, hard mode returns a seeded random combination and soft mode the
    one with the largest drop in p(y_hat).
    """
    explanation.check(len(schema))
    feats = list(explanation.feature_indices)
    _require_kind(schema, feats, categorical=True)
    x = encode(instance, schema).vector
    orig = predict(model, x)
    y_hat = orig.label
    own = tuple(instance.values[j] for j in feats)
    combos = [
        combo
        for combo in itertools.product(*(range(schema[j].n_values) for j in feats))
        if combo != own
    ]
    if not combos:
        names = [schema[j].name for j in feats]
        raise DataError(f"no alternative values for explained features {names}")
    values = np.tile(np.array(instance.values), (len(combos), 1))
    values[:, feats] = np.array(combos)
    X = schema.encode_values(values)
    p1 = model.proba1(X)
    labels = (p1 > 0.5).astype(int)
    hits = np.flatnonzero(labels != y_hat)
    if hits.size:
        k = int(hits[0])
    elif soft:
        p_same = p1 if y_hat == 1 else 1.0 - p1
        k = int(np.argmin(p_same))
    else:
        k = int(np.random.default_rng(seed).integers(len(combos)))
    return CounterfactualResult(
        original=instance,
        explanation=explanation,
        original_prediction=orig,
        edited_values={j: int(v) for j, v in zip(feats, combos[k]) if v != instance.values[j]},
        y_cf=int(labels[k]),
        p_cf=(float(1.0 - p1[k]), float(p1[k])),
        flipped=bool(labels[k] != y_hat),
        distance=float(_row_distances(X[k:k + 1], x, metric, c)[0]),
        n_evaluated=(k + 1) if hits.size else len(combos),
    )


# --------------------------------------------------------------- continuous


def free_coordinates(schema: FeatureSchema, feats: Sequence[int]) -> np.ndarray:
    return np.concatenate([np.arange(*schema.spans[j]) for j in feats])


def relaxed_objective(
    model: LogisticModel,
    base: np.ndarray,
    coords: np.ndarray,
    w_orig: np.ndarray,
    w_cf: np.ndarray,
    y_hat: int,
    alpha: float,
) -> tuple[float, np.ndarray]:
    """Value and gradient of ``||w - w_cf||^2 + alpha * p(y_hat | x_cf)``.

    ``base`` is the original representation; ``coords`` are the free
    coordinates (the explained spans) that ``w_cf`` overwrites.
    """
    x_cf = base.copy()
    x_cf[coords] = w_cf
    diff = w_cf - w_orig
    p = float(model.proba_of(x_cf, y_hat))
    value = float(diff @ diff) + alpha * p
    grad = 2.0 * diff + alpha * gradient(model, x_cf, y_hat)[coords]
    return value, grad


def continuous_search(
    model: LogisticModel,
    schema: FeatureSchema,
    instance: Instance,
    explanation: Explanation,
    cfg: OptimizerConfig | None = None,
    metric: str = "euclidean",
    c: float = 1.0,
) -> CounterfactualResult:
    """Optimise the embeddings of the explained features.

    Starts from the original embeddings plus Gaussian noise and runs gradient
    descent with step halving on rejected steps, so the objective never
    increases. Stops after ``max_iters`` or once a step improves the
    objective by less than ``tol``.
    """
    cfg = cfg or OptimizerConfig()
    explanation.check(len(schema))
    feats = list(explanation.feature_indices)
    _require_kind(schema, feats, categorical=False)
    x = encode(instance, schema).vector
    orig = predict(model, x)
    y_hat = orig.label
    coords = free_coordinates(schema, feats)
    w_orig = x[coords]
    rng = np.random.default_rng(cfg.seed)
    w = w_orig + rng.normal(0.0, cfg.init_noise_scale, size=w_orig.shape)
    value, grad = relaxed_objective(model, x, coords, w_orig, w, y_hat, cfg.alpha)
    if not np.isfinite(value):
        raise NumericalError("non-finite objective at initialisation")
    step = cfg.step_size
    it = 0
    for it in range(1, cfg.max_iters + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            cand = w - step * grad
            v_new, g_new = relaxed_objective(model, x, coords, w_orig, cand, y_hat, cfg.alpha)
        if not (np.isfinite(v_new) and np.all(np.isfinite(cand))):
            raise NumericalError(f"non-finite objective at iteration {it}; reduce step_size")
        if v_new <= value:
            gain = value - v_new
            w, value, grad = cand, v_new, g_new
            if gain < cfg.tol:
                break
        else:
            step *= 0.5
            if step < 1e-12:
                break
    x_cf = x.copy()
    x_cf[coords] = w
    pred = predict(model, x_cf)
    edited = {}
    for j in feats:
        a, b = schema.spans[j]
        edited[j] = x_cf[a:b].copy()
    return CounterfactualResult(
        original=instance,
        explanation=explanation,
        original_prediction=orig,
        edited_values=edited,
        y_cf=pred.label,
        p_cf=pred.probs,
        flipped=pred.label != y_hat,
        distance=distance(x, x_cf, metric, c),
        iterations=it,
    )


# ------------------------------------------------------------------- batch


def check_mode(schema: FeatureSchema, mode: str) -> None:
    """Reject a search mode that cannot handle every feature of the schema."""
    if mode == "discrete":
        _require_kind(schema, range(len(schema)), categorical=True)
    elif mode == "continuous":
        _require_kind(schema, range(len(schema)), categorical=False)
    else:
        raise ConfigError(f"unknown counterfactual mode {mode!r}")


def batch_counterfactuals(
    model: LogisticModel,
    dataset: Dataset,
    explanations: Sequence[Explanation],
    mode: str = "discrete",
    cfg: OptimizerConfig | None = None,
    *,
    soft: bool = False,
    seed: int = 0,
    metric: str = "euclidean",
    c: float = 1.0,
    workers: int = 1,
) -> list[CounterfactualResult]:
    """One counterfactual per instance, in dataset order.

    Instance ``i`` is seeded from ``(seed, mode, i)``, so the output does not
    depend on ``workers``.
    """
    if len(explanations) != len(dataset):
        raise DataError(f"{len(explanations)} explanations for {len(dataset)} instances")
    check_mode(dataset.schema, mode)
    cfg = cfg or OptimizerConfig()

    def run(i: int) -> CounterfactualResult:
        inst, expl = dataset.instances[i], explanations[i]
        try:
            if mode == "discrete":
                return discrete_search(
                    model, dataset.schema, inst, expl, soft=soft,
                    seed=derive_seed(seed, "cf:discrete", i), metric=metric, c=c,
                )
            return continuous_search(
                model, dataset.schema, inst, expl,
                replace(cfg, seed=derive_seed(seed, "cf:continuous", i)), metric=metric, c=c,
            )
        except (DataError, NumericalError) as exc:
            raise type(exc)(f"instance {i}: {exc}") from None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, range(len(dataset))))
    return [run(i) for i in range(len(dataset))]


def dump_traces(results: Sequence[CounterfactualResult], path) -> None:
    """Write one JSON record per instance for auditing."""
    with open(Path(path), "w", encoding="utf-8") as fh:
        for i, r in enumerate(results):
            edits = {
                str(j): (v.tolist() if isinstance(v, np.ndarray) else v) for j, v in sorted(r.edited_values.items())
            }
            rec = {
                "instance": i,
                "explanation": list(r.explanation.feature_indices),
                "edited": edits,
                "y_hat": r.original_prediction.label,
                "p_orig": list(r.original_prediction.probs),
                "y_cf": r.y_cf,
                "p_cf": list(r.p_cf),
                "flipped": r.flipped,
                "distance": r.distance,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
