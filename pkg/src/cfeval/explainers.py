"""Feature-attribution explainers.

Every explainer returns exactly ``L`` distinct feature indices for any valid
instance, ordered from most to least important.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .blackbox import LogisticModel, ground_truth_features, predict
from .dataset import Dataset, FeatureSchema, Instance, encode
from .errors import ConfigError, DataError, NumericalError
from .explanation import Explanation, read_explanations, top_k, write_explanations
from .seeding import derive_rng

__all__ = [
    "Explanation",
    "LimeConfig",
    "DecisionBoundaryConfig",
    "random_explain",
    "omission_explain",
    "lime_explain",
    "decision_boundary_explain",
    "whitebox_self_explain",
    "EXPLAINERS",
    "explain_dataset",
    "read_explanations",
    "write_explanations",
]


def _check_L(L: int, M: int) -> None:
    if not 1 <= L <= M:
        raise ConfigError(f"explanation size L={L} must lie in [1, {M}]")


def random_explain(instance: Instance, L: int, seed: int | np.random.Generator) -> Explanation:
    M = len(instance)
    _check_L(L, M)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Explanation(tuple(int(j) for j in rng.choice(M, size=L, replace=False)))


def omission_scores(model: LogisticModel, schema: FeatureSchema, instance: Instance) -> np.ndarray:
    """Drop in p(y_hat) when each feature's span is zeroed out."""
    x = encode(instance, schema).vector
    label = predict(model, x).label
    X = np.tile(x, (len(schema), 1))
    X[schema.coord_feature[None, :] == np.arange(len(schema))[:, None]] = 0.0
    return model.proba_of(x, label) - model.proba_of(X, label)


def omission_explain(model: LogisticModel, schema: FeatureSchema, instance: Instance, L: int) -> Explanation:
    _check_L(L, len(schema))
    scores = omission_scores(model, schema, instance)
    idx = top_k(scores, L)
    return Explanation(tuple(idx), tuple(scores[idx]))


@dataclass(frozen=True)
class LimeConfig:
    """Local surrogate settings.

    ``kernel_width=None`` uses ``0.75 * M``. Tiny coefficients (below
    ``zero_tol``) are treated as exact zeros so a constant model falls back
    to the index tie rule.
    """

    n_samples: int = 500
    kernel_width: float | None = None
    ridge_lambda: float = 1.0
    seed: int = 0
    zero_tol: float = 1e-12


def lime_coefficients(
    model: LogisticModel, schema: FeatureSchema, instance: Instance, cfg: LimeConfig, rng=None
) -> np.ndarray:
    M = len(schema)
    if cfg.n_samples < M + 1:
        raise ConfigError(f"LIME needs n_samples >= M + 1 = {M + 1}, got {cfg.n_samples}")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    x = encode(instance, schema).vector
    label = predict(model, x).label
    # first sample is the instance itself
    Z = (rng.random((cfg.n_samples, M)) < 0.5).astype(float)
    Z[0] = 1.0
    X = np.where(Z[:, schema.coord_feature] == 1.0, x, schema.fill_vector("mask"))
    target = model.proba_of(X, label)
    width = cfg.kernel_width if cfg.kernel_width is not None else 0.75 * M
    hamming = M - Z.sum(axis=1)
    kw = np.exp(-(hamming**2) / width**2)
    mean_z = kw @ Z / kw.sum()
    mean_t = kw @ target / kw.sum()
    Zc, tc = Z - mean_z, target - mean_t
    A = Zc.T @ (kw[:, None] * Zc) + cfg.ridge_lambda * np.eye(M)
    try:
        coef = np.linalg.solve(A, Zc.T @ (kw * tc))
    except np.linalg.LinAlgError:
        raise NumericalError("LIME surrogate fit is singular; increase ridge_lambda or n_samples") from None
    coef[np.abs(coef) < cfg.zero_tol] = 0.0
    return coef


def lime_explain(
    model: LogisticModel, schema: FeatureSchema, instance: Instance, L: int, cfg: LimeConfig | None = None, rng=None
) -> Explanation:
    """Weighted ridge surrogate on random feature-presence masks."""
    cfg = cfg or LimeConfig()
    _check_L(L, len(schema))
    coef = lime_coefficients(model, schema, instance, cfg, rng)
    idx = top_k(np.abs(coef), L)
    return Explanation(tuple(idx), tuple(coef[idx]))


@dataclass(frozen=True)
class DecisionBoundaryConfig:
    n_samples: int = 500
    seed: int = 0


def decision_boundary_explain(
    model: LogisticModel,
    schema: FeatureSchema,
    instance: Instance,
    L: int,
    cfg: DecisionBoundaryConfig | None = None,
    rng=None,
) -> Explanation:
    """Explain by the smallest sampled edit that crosses the decision boundary.

    Each sample edits a random non-empty subset of features, drawing a new
    value (or token) different from the current one. Among label-flipping
    samples the one with the fewest edited features wins, then the smallest
    Euclidean distance, then the earliest draw. The edited set is cut or
    padded to ``L`` in omission-score order. Without any flip the result is
    the omission explanation.
    """
    cfg = cfg or DecisionBoundaryConfig()
    M = len(schema)
    _check_L(L, M)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    om_order = top_k(omission_scores(model, schema, instance), M)
    n_values = np.array([f.n_values for f in schema.features])
    editable = n_values > 1
    if not editable.any() or cfg.n_samples < 1:
        return omission_explain(model, schema, instance, L)

    base = np.array(instance.values)
    n = cfg.n_samples
    sizes = rng.integers(1, M + 1, size=n)
    order = np.argsort(rng.random((n, M)), axis=1)
    ranks = np.argsort(order, axis=1)
    edit = (ranks < sizes[:, None]) & editable
    offsets = 1 + np.floor(rng.random((n, M)) * np.maximum(n_values - 1, 1)).astype(np.intp)
    values = np.where(edit, (base + offsets) % n_values, base)

    x = encode(instance, schema).vector
    y_hat = predict(model, x).label
    X = schema.encode_values(values)
    flips = np.flatnonzero((model.labels(X) != y_hat) & edit.any(axis=1))
    if flips.size == 0:
        return omission_explain(model, schema, instance, L)
    n_edit = edit[flips].sum(axis=1)
    dist = np.linalg.norm(X[flips] - x, axis=1)
    best = flips[np.lexsort((flips, dist, n_edit))[0]]
    edited = set(np.flatnonzero(edit[best]).tolist())
    chosen = [j for j in om_order if j in edited][:L]
    chosen += [j for j in om_order if j not in edited][: L - len(chosen)]
    return Explanation(tuple(chosen))


def whitebox_self_explain(model: LogisticModel, schema: FeatureSchema, instance: Instance, L: int) -> Explanation:
    return ground_truth_features(model, schema, instance, L)


# ----------------------------------------------------------------- registry

ExplainFn = Callable[[LogisticModel, FeatureSchema, Instance, int, np.random.Generator, dict], Explanation]


def _random(model, schema, inst, L, rng, opts):
    return random_explain(inst, L, rng)


def _omission(model, schema, inst, L, rng, opts):
    return omission_explain(model, schema, inst, L)


def _lime(model, schema, inst, L, rng, opts):
    return lime_explain(model, schema, inst, L, LimeConfig(**opts), rng=rng)


def _db(model, schema, inst, L, rng, opts):
    return decision_boundary_explain(model, schema, inst, L, DecisionBoundaryConfig(**opts), rng=rng)


def _whitebox(model, schema, inst, L, rng, opts):
    return whitebox_self_explain(model, schema, inst, L)


EXPLAINERS: dict[str, ExplainFn] = {
    "random": _random,
    "omission": _omission,
    "lime": _lime,
    "decision_boundary": _db,
    "whitebox": _whitebox,
}


def explain_dataset(
    name: str,
    model: LogisticModel,
    dataset: Dataset,
    L: int,
    seed: int = 0,
    options: dict | None = None,
) -> list[Explanation]:
    """Run a registered explainer on every instance.

    Instance ``i`` draws from its own stream keyed by ``(seed, name, i)``.
    """
    try:
        fn = EXPLAINERS[name]
    except KeyError:
        raise ConfigError(f"unknown explainer {name!r}; choose from {sorted(EXPLAINERS)}") from None
    opts = dict(options or {})
    opts.pop("seed", None)
    out = []
    for i, inst in enumerate(dataset.instances):
        try:
            out.append(fn(model, dataset.schema, inst, L, derive_rng(seed, f"explain:{name}", i), opts))
        except DataError as exc:
            raise DataError(f"instance {i}: {exc}") from None
    return out
