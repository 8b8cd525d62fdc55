"""End-to-end runs: data -> whitebox training -> explanations -> report.

All artefacts of one configuration live in ``<out>/run-<config hash>``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from . import blackbox
from .blackbox import LogisticModel, TrainConfig, ground_truth_features, recovery_fraction
from .counterfactual import DISTANCE_METRICS, OptimizerConfig, batch_counterfactuals, check_mode, dump_traces
from .dataset import Dataset, SyntheticSpec, load_tabular, load_text, synthesize
from .errors import ConfigError, DataError
from .explainers import EXPLAINERS, DecisionBoundaryConfig, LimeConfig, explain_dataset
from .explanation import Explanation, read_explanations, write_explanations
from .metrics import REMOVAL_MODES, MethodScores, ces, ces_soft, erasure_drops, proximity, validity, validity_soft
from .report import EvaluationReport, atomic_write, build_report, emit
from .seeding import derive_rng, derive_seed

logger = logging.getLogger(__name__)

DEFAULT_EXPLAINERS = ("random", "omission", "lime", "decision_boundary", "whitebox")
_EXPLAINER_OPTIONS = {"lime": LimeConfig, "decision_boundary": DecisionBoundaryConfig}


def _take(d: dict, cls, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class RunConfig:
    dataset: dict
    seed: int
    explainers: dict = field(default_factory=lambda: {n: {} for n in DEFAULT_EXPLAINERS})
    external_explanations: dict = field(default_factory=dict)
    L: int = 1
    cf_mode: str = "discrete"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    removal_modes: tuple[str, ...] = ("delete",)
    distance: str = "euclidean"
    distance_constant: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)
    out: str = "runs"
    workers: int = 1
    traces: bool = False

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        allowed = {f.name for f in fields(cls)}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown config key(s) {sorted(unknown)}")
        if "seed" not in d:
            raise ConfigError("config must set 'seed'")
        if "dataset" not in d or not isinstance(d["dataset"], dict):
            raise ConfigError("config must describe a 'dataset'")
        kw = dict(d)
        kw["dataset"] = _resolve_paths(dict(d["dataset"]), base_dir)
        explainers = kw.get("explainers", {n: {} for n in DEFAULT_EXPLAINERS})
        if isinstance(explainers, list):
            explainers = {n: {} for n in explainers}
        kw["explainers"] = {n: dict(o or {}) for n, o in explainers.items()}
        ext = dict(kw.get("external_explanations") or {})
        if base_dir is not None:
            ext = {n: str((base_dir / p).resolve()) for n, p in ext.items()}
        kw["external_explanations"] = ext
        kw["optimizer"] = _take(dict(kw.get("optimizer") or {}), OptimizerConfig, "optimizer")
        kw["train"] = _take(dict(kw.get("train") or {}), TrainConfig, "train")
        kw["removal_modes"] = tuple(kw.get("removal_modes", ("delete",)))
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if self.cf_mode not in ("discrete", "continuous"):
            raise ConfigError(f"cf_mode must be 'discrete' or 'continuous', got {self.cf_mode!r}")
        if not isinstance(self.L, int) or self.L < 1:
            raise ConfigError("L must be a positive integer")
        for m in self.removal_modes:
            if m not in REMOVAL_MODES:
                raise ConfigError(f"unknown removal mode {m!r}")
        if self.distance not in DISTANCE_METRICS:
            raise ConfigError(f"unknown distance {self.distance!r}")
        for name, opts in self.explainers.items():
            if name not in EXPLAINERS:
                raise ConfigError(f"unknown explainer {name!r}; choose from {sorted(EXPLAINERS)}")
            if name in _EXPLAINER_OPTIONS:
                _take({k: v for k, v in opts.items() if k != "seed"}, _EXPLAINER_OPTIONS[name], name)
            elif opts:
                raise ConfigError(f"explainer {name!r} takes no options")
        clash = set(self.explainers) & set(self.external_explanations)
        if clash:
            raise ConfigError(f"external explanations reuse built-in names {sorted(clash)}")
        if not self.explainers and not self.external_explanations:
            raise ConfigError("no explainers configured")
        if self.dataset.get("source") not in ("synthetic", "tabular", "text"):
            raise ConfigError("dataset.source must be one of synthetic, tabular, text")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["removal_modes"] = list(self.removal_modes)
        return d

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("out")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode("utf-8")).hexdigest()

    @property
    def run_dir(self) -> Path:
        return Path(self.out) / f"run-{self.digest()[:12]}"


def _resolve_paths(ds: dict, base_dir: Path | None) -> dict:
    if base_dir is None:
        return ds
    for key in ("csv", "schema", "corpus", "embeddings"):
        if key in ds:
            ds[key] = str((base_dir / ds[key]).resolve())
    return ds


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_dict(doc, base_dir=path.parent)


# --------------------------------------------------------------------- data


def load_data(config: RunConfig) -> Dataset:
    ds = dict(config.dataset)
    source = ds.pop("source")
    if source == "synthetic":
        if "vocab_size" in ds and isinstance(ds["vocab_size"], list):
            ds["vocab_size"] = tuple(ds["vocab_size"])
        spec = _take(ds, SyntheticSpec, "dataset")
        data, _ = synthesize(spec, config.seed)
    elif source == "tabular":
        if not {"csv", "schema"} <= set(ds):
            raise ConfigError("tabular dataset needs 'csv' and 'schema'")
        data = load_tabular(ds["csv"], ds["schema"])
    else:
        if not {"corpus", "embeddings", "max_len"} <= set(ds):
            raise ConfigError("text dataset needs 'corpus', 'embeddings' and 'max_len'")
        data = load_text(ds["corpus"], ds["embeddings"], int(ds["max_len"]), ds.get("mask_token", "<unk>"))
    if any(y is None for y in data.gold_labels):
        raise DataError("dataset has no label column; training needs a label per instance")
    return data


def split_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle, then contiguous 80/10/10 slices."""
    perm = derive_rng(seed, "split").permutation(n)
    n_train, n_val = n * 8 // 10, n // 10
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def splits(config: RunConfig, data: Dataset | None = None) -> dict[str, Dataset]:
    data = data if data is not None else load_data(config)
    tr, va, te = split_indices(len(data), config.seed)
    if len(tr) == 0 or len(te) == 0:
        raise DataError(f"dataset of {len(data)} instances is too small for an 80/10/10 split")
    out = {"train": data.subset(tr), "test": data.subset(te)}
    if len(va):
        out["val"] = data.subset(va)
    return out


# -------------------------------------------------------------------- stages


def train_model(config: RunConfig, parts: dict[str, Dataset]) -> tuple[LogisticModel, dict]:
    train = parts["train"]
    model = blackbox.train_logistic(train, train.gold_labels, config.train)
    summary = {
        "train_accuracy": blackbox.accuracy(model, train),
        "val_accuracy": blackbox.accuracy(model, parts["val"]) if "val" in parts else None,
        "test_accuracy": blackbox.accuracy(model, parts["test"]),
        "final_loss": model.training_loss,
        "n_train": len(train),
        "n_test": len(parts["test"]),
    }
    return model, summary


def make_explanations(config: RunConfig, model: LogisticModel, test: Dataset) -> dict[str, list[Explanation]]:
    out = {}
    for name, opts in config.explainers.items():
        out[name] = explain_dataset(name, model, test, config.L, config.seed, opts)
    for name, path in config.external_explanations.items():
        out[name] = read_explanations(path, len(test.schema), len(test))
    return out


def evaluate_explainer(
    model: LogisticModel,
    data: Dataset,
    explanations: Sequence[Explanation],
    *,
    cf_mode: str = "discrete",
    optimizer: OptimizerConfig | None = None,
    removal_modes: Sequence[str] = ("delete",),
    metric: str = "euclidean",
    c: float = 1.0,
    seed: int = 0,
    workers: int = 1,
    traces_to=None,
) -> list[MethodScores]:
    """Counterfactual, erasure and ground-truth scores for one explainer.

    Discrete mode runs the search twice: hard (random fallback) for the
    label-based scores and soft (max-drop fallback) for the soft scores.
    """
    kw = dict(seed=seed, metric=metric, c=c, workers=workers)
    hard = batch_counterfactuals(model, data, explanations, cf_mode, optimizer, soft=False, **kw)
    soft = batch_counterfactuals(model, data, explanations, cf_mode, optimizer, soft=True, **kw) if cf_mode == "discrete" else hard
    if traces_to is not None:
        dump_traces(hard, traces_to)
    gold = [ground_truth_features(model, data.schema, inst, len(e)) for inst, e in zip(data.instances, explanations)]
    base = dict(
        validity=validity(hard),
        proximity=proximity(hard),
        ces=ces(hard),
        validity_soft=validity_soft(soft),
        proximity_soft=proximity(soft),
        ces_soft=ces_soft(soft),
        ground_truth_fraction=recovery_fraction(explanations, gold),
    )
    out = []
    for mode in removal_modes:
        comp_drop, flips = erasure_drops(model, data, explanations, mode)
        suff_drop, _ = erasure_drops(model, data, explanations, mode, keep=True)
        out.append(
            MethodScores(
                comp=float(np.mean(comp_drop)),
                suff=float(np.mean(suff_drop)),
                dfr=float(np.mean(flips)),
                removal_mode=mode,
                **base,
            )
        )
    return out


def evaluate(
    config: RunConfig,
    model: LogisticModel,
    test: Dataset,
    explanations: dict[str, list[Explanation]],
    traces_dir: Path | None = None,
) -> EvaluationReport:
    check_mode(test.schema, config.cf_mode)
    scores = {}
    for name, expl in explanations.items():
        logger.info("evaluating %s", name)
        scores[name] = evaluate_explainer(
            model,
            test,
            expl,
            cf_mode=config.cf_mode,
            optimizer=config.optimizer,
            removal_modes=config.removal_modes,
            metric=config.distance,
            c=config.distance_constant,
            seed=derive_seed(config.seed, f"evaluate:{name}"),
            workers=config.workers,
            traces_to=(traces_dir / f"{name}.jsonl") if traces_dir is not None else None,
        )
    snapshot = config.to_dict()
    snapshot.pop("out")
    snapshot.pop("workers")
    return build_report(
        scores,
        dataset_id=str(config.dataset.get("source")) + ":" + config.digest()[:12],
        cf_mode=config.cf_mode,
        L=config.L,
        config=snapshot,
    )


def run_in_memory(config: RunConfig) -> tuple[EvaluationReport, dict]:
    """Whole pipeline without touching the file system."""
    parts = splits(config)
    check_mode(parts["test"].schema, config.cf_mode)
    model, summary = train_model(config, parts)
    expl = make_explanations(config, model, parts["test"])
    return evaluate(config, model, parts["test"], expl), summary


# ------------------------------------------------------------ CLI commands


def cmd_train(config: RunConfig) -> dict:
    parts = splits(config)
    model, summary = train_model(config, parts)
    run_dir = config.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    blackbox.save_model(model, run_dir / "model.txt", parts["train"].schema)
    atomic_write(run_dir / "train.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def _load_trained(config: RunConfig, schema) -> LogisticModel:
    path = config.run_dir / "model.txt"
    if not path.exists():
        raise DataError(f"{path} not found; run 'train' first")
    return blackbox.load_model(path, schema)


def cmd_explain(config: RunConfig) -> dict[str, Path]:
    test = splits(config)["test"]
    model = _load_trained(config, test.schema)
    expl_dir = config.run_dir / "explanations"
    expl_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, expl in make_explanations(config, model, test).items():
        write_explanations(expl_dir / f"{name}.txt", expl)
        written[name] = expl_dir / f"{name}.txt"
    return written


def cmd_evaluate(config: RunConfig) -> EvaluationReport:
    test = splits(config)["test"]
    check_mode(test.schema, config.cf_mode)
    model = _load_trained(config, test.schema)
    expl_dir = config.run_dir / "explanations"
    explanations = {}
    for name in list(config.explainers) + list(config.external_explanations):
        path = expl_dir / f"{name}.txt"
        if not path.exists():
            raise DataError(f"{path} not found; run 'explain' first")
        explanations[name] = read_explanations(path, len(test.schema), len(test))
    traces_dir = None
    if config.traces:
        traces_dir = config.run_dir / "traces"
        traces_dir.mkdir(exist_ok=True)
    report = evaluate(config, model, test, explanations, traces_dir)
    emit(report, config.run_dir)
    return report


def cmd_full(config: RunConfig) -> Path:
    cmd_train(config)
    cmd_explain(config)
    cmd_evaluate(config)
    return config.run_dir


def synthetic_config(seed: int, **overrides) -> RunConfig:
    """Default desk-scale synthetic configuration."""
    d = {
        "seed": seed,
        "dataset": {"source": "synthetic", "n_features": 6, "n_instances": 2000, "vocab_size": 4},
    }
    d.update(overrides)
    return RunConfig.from_dict(d)


__all__ = [
    "RunConfig",
    "load_config",
    "load_data",
    "split_indices",
    "splits",
    "train_model",
    "make_explanations",
    "evaluate_explainer",
    "evaluate",
    "run_in_memory",
    "cmd_train",
    "cmd_explain",
    "cmd_evaluate",
    "cmd_full",
    "synthetic_config",
]
