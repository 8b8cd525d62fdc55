"""Typed feature schemas, instances, loaders and the synthetic benchmark.

Categorical features are one-hot encoded; embedded features are looked up in
an embedding table. The flat representation is the concatenation of the
per-feature spans in schema order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .errors import DataError
from .seeding import derive_rng

logger = logging.getLogger(__name__)

CATEGORICAL = "categorical"
EMBEDDED = "embedded"
DEFAULT_MASK_TOKEN = "<unk>"


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Token vocabulary with one ``dim``-length vector per token."""

    tokens: tuple[str, ...]
    vectors: np.ndarray
    mask_token: str = DEFAULT_MASK_TOKEN

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.tokens):
            raise DataError(
                f"embedding table has {len(self.tokens)} tokens but vectors of shape {vectors.shape}"
            )
        if vectors.shape[1] < 1:
            raise DataError("embedding dimension must be positive")
        if len(set(self.tokens)) != len(self.tokens):
            raise DataError("embedding table contains duplicate tokens")
        if self.mask_token not in self.tokens:
            raise DataError(f"mask token {self.mask_token!r} missing from embedding table")
        vectors.setflags(write=False)
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "vectors", vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.tokens)

    @cached_property
    def token_ids(self) -> dict[str, int]:
        return {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def mask_id(self) -> int:
        return self.token_ids[self.mask_token]

    @property
    def mask_vector(self) -> np.ndarray:
        return self.vectors[self.mask_id]

    def lookup(self, token: str) -> int | None:
        return self.token_ids.get(token)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update("\n".join(self.tokens).encode("utf-8"))
        h.update(self.mask_token.encode("utf-8"))
        h.update(np.ascontiguousarray(self.vectors, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class FeatureSpec:
    name: str
    kind: str
    vocabulary: tuple[str, ...] = ()
    table: EmbeddingTable | None = None

    @classmethod
    def categorical(cls, name: str, vocabulary: Iterable[str]) -> "FeatureSpec":
        return cls(name, CATEGORICAL, tuple(str(v) for v in vocabulary))

    @classmethod
    def embedded(cls, name: str, table: EmbeddingTable) -> "FeatureSpec":
        return cls(name, EMBEDDED, table=table)

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            if not self.vocabulary:
                raise DataError(f"feature {self.name!r}: empty vocabulary")
            if len(set(self.vocabulary)) != len(self.vocabulary):
                raise DataError(f"feature {self.name!r}: duplicate vocabulary values")
        elif self.kind == EMBEDDED:
            if self.table is None:
                raise DataError(f"feature {self.name!r}: embedded feature needs a table")
        else:
            raise DataError(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def width(self) -> int:
        return len(self.vocabulary) if self.is_categorical else self.table.dim

    @property
    def n_values(self) -> int:
        """Number of admissible values (vocabulary or token count)."""
        return len(self.vocabulary) if self.is_categorical else len(self.table)

    def value_label(self, value: int) -> str:
        return self.vocabulary[value] if self.is_categorical else self.table.tokens[value]


@dataclass(frozen=True)
class Instance:
    values: tuple[int, ...]
    gold_label: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    def replace(self, edits: dict[int, int]) -> "Instance":
        values = list(self.values)
        for j, v in edits.items():
            values[j] = int(v)
        return Instance(tuple(values), self.gold_label)


@dataclass(frozen=True, eq=False)
class Representation:
    """Flat real vector plus the ``(start, stop)`` span of each feature."""

    vector: np.ndarray
    spans: tuple[tuple[int, int], ...]

    def __post_init__(self):
        vector = np.asarray(self.vector, dtype=float)
        if self.spans and vector.shape != (self.spans[-1][1],):
            raise DataError(f"vector of shape {vector.shape} does not match layout")
        object.__setattr__(self, "vector", vector)

    def span(self, j: int) -> np.ndarray:
        a, b = self.spans[j]
        return self.vector[a:b]

    def __len__(self) -> int:
        return self.vector.shape[0]


class FeatureSchema:
    """Ordered, immutable list of feature specs and the encoding layout."""

    def __init__(self, features: Sequence[FeatureSpec]):
        self.features: tuple[FeatureSpec, ...] = tuple(features)
        if not self.features:
            raise DataError("schema has no features")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("feature names must be unique")
        spans, start = [], 0
        for f in self.features:
            spans.append((start, start + f.width))
            start += f.width
        self.spans: tuple[tuple[int, int], ...] = tuple(spans)
        self.width = start
        self.coord_feature = np.repeat(np.arange(len(self.features)), [f.width for f in self.features])
        self.coord_feature.setflags(write=False)

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    def __getitem__(self, j: int) -> FeatureSpec:
        return self.features[j]

    def __repr__(self) -> str:
        return f"FeatureSchema({[f.name for f in self.features]!r})"

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    @property
    def all_categorical(self) -> bool:
        return all(f.is_categorical for f in self.features)

    @property
    def all_embedded(self) -> bool:
        return all(not f.is_categorical for f in self.features)

    def validate(self, instance: Instance) -> None:
        if len(instance.values) != len(self.features):
            raise DataError(
                f"instance has {len(instance.values)} values, schema has {len(self.features)} features"
            )
        for f, v in zip(self.features, instance.values):
            if not 0 <= v < f.n_values:
                raise DataError(f"feature {f.name!r}: value index {v} out of range [0, {f.n_values})")
        if instance.gold_label not in (None, 0, 1):
            raise DataError(f"gold label must be 0 or 1, got {instance.gold_label!r}")

    def encode_values(self, values: np.ndarray) -> np.ndarray:
        """Encode an ``(n, M)`` integer matrix of feature values to ``(n, width)``."""
        values = np.asarray(values, dtype=np.intp)
        out = np.zeros((values.shape[0], self.width))
        rows = np.arange(values.shape[0])
        for j, (f, (a, b)) in enumerate(zip(self.features, self.spans)):
            if f.is_categorical:
                out[rows, a + values[:, j]] = 1.0
            else:
                out[:, a:b] = f.table.vectors[values[:, j]]
        return out

    def fill_vector(self, mode: str) -> np.ndarray:
        """Replacement vector used when a feature is removed.

        ``delete`` is all zeros; ``mask`` uses the mask-token embedding for
        embedded features and an all-zero span for categorical ones.
        """
        if mode == "delete":
            return np.zeros(self.width)
        if mode != "mask":
            raise ValueError(f"unknown removal mode {mode!r}")
        out = np.zeros(self.width)
        for f, (a, b) in zip(self.features, self.spans):
            if not f.is_categorical:
                out[a:b] = f.table.mask_vector
        return out

    def digest(self) -> str:
        payload = []
        for f in self.features:
            entry = {"name": f.name, "kind": f.kind}
            if f.is_categorical:
                entry["vocabulary"] = list(f.vocabulary)
            else:
                entry["table"] = f.table.digest()
            payload.append(entry)
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class Dataset:
    schema: FeatureSchema
    instances: tuple[Instance, ...]
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if not self.instances:
            raise DataError("dataset is empty")
        for i, inst in enumerate(self.instances):
            try:
                self.schema.validate(inst)
            except DataError as exc:
                raise DataError(f"instance {i}: {exc}") from None

    def __len__(self) -> int:
        return len(self.instances)

    def __getitem__(self, i):
        return self.instances[i]

    @cached_property
    def values(self) -> np.ndarray:
        out = np.array([inst.values for inst in self.instances], dtype=np.intp)
        out.setflags(write=False)
        return out

    @cached_property
    def matrix(self) -> np.ndarray:
        out = self.schema.encode_values(self.values)
        out.setflags(write=False)
        return out

    @property
    def gold_labels(self) -> list[int | None]:
        return [inst.gold_label for inst in self.instances]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(self.schema, tuple(self.instances[i] for i in indices), dict(self.info))


def encode(instance: Instance, schema: FeatureSchema) -> Representation:
    schema.validate(instance)
    vec = schema.encode_values(np.array([instance.values]))[0]
    return Representation(vec, schema.spans)


def decode(rep: Representation, schema: FeatureSchema) -> Instance:
    """Inverse of :func:`encode` for representations produced by it."""
    values = []
    for f, (a, b) in zip(schema.features, schema.spans):
        span = rep.vector[a:b]
        if f.is_categorical:
            hot = np.flatnonzero(span == 1.0)
            if len(hot) != 1 or np.count_nonzero(span) != 1:
                raise DataError(f"feature {f.name!r}: span is not one-hot")
            values.append(int(hot[0]))
        else:
            match = np.flatnonzero(np.all(f.table.vectors == span, axis=1))
            if len(match) == 0:
                raise DataError(f"feature {f.name!r}: span matches no table entry")
            values.append(int(match[0]))
    return Instance(tuple(values))


# ---------------------------------------------------------------- loaders


def read_embeddings(path, mask_token: str = DEFAULT_MASK_TOKEN) -> EmbeddingTable:
    """Read ``token v1 ... vd`` lines. A missing mask token gets a zero vector."""
    tokens, rows, dim = [], [], None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            token, raw = parts[0], parts[1:]
            if dim is None:
                dim = len(raw)
                if dim == 0:
                    raise DataError(f"{path}:{lineno}: embedding row has no values")
            elif len(raw) != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(raw)}")
            try:
                rows.append([float(x) for x in raw])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric embedding value") from None
            tokens.append(token)
    if dim is None:
        raise DataError(f"{path}: embedding file is empty")
    if mask_token not in tokens:
        tokens.append(mask_token)
        rows.append([0.0] * dim)
    return EmbeddingTable(tuple(tokens), np.array(rows), mask_token)


def load_schema(schema_path) -> FeatureSchema:
    """Parse a YAML/JSON schema file.

    Each entry of ``features`` has ``name`` and ``kind``; categorical entries
    list a ``vocabulary``, embedded entries give an ``embedding_path``
    (relative to the schema file) and optionally a ``mask_token``.
    """
    schema_path = Path(schema_path)
    with open(schema_path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or not isinstance(doc.get("features"), list):
        raise DataError(f"{schema_path}: expected a mapping with a 'features' list")
    tables: dict[tuple[str, str], EmbeddingTable] = {}
    features = []
    for k, entry in enumerate(doc["features"]):
        if not isinstance(entry, dict) or "name" not in entry:
            raise DataError(f"{schema_path}: feature entry {k} needs a name")
        name, kind = str(entry["name"]), entry.get("kind", CATEGORICAL)
        if kind == CATEGORICAL:
            features.append(FeatureSpec.categorical(name, entry.get("vocabulary") or ()))
        elif kind == EMBEDDED:
            emb = schema_path.parent / entry["embedding_path"]
            mask = entry.get("mask_token", DEFAULT_MASK_TOKEN)
            key = (str(emb.resolve()), mask)
            if key not in tables:
                tables[key] = read_embeddings(emb, mask)
            features.append(FeatureSpec.embedded(name, tables[key]))
        else:
            raise DataError(f"{schema_path}: feature {name!r} has unknown kind {kind!r}")
    return FeatureSchema(features)


def load_tabular(csv_path, schema_path) -> Dataset:
    schema = load_schema(schema_path)
    lookups = []
    for f in schema:
        if f.is_categorical:
            lookups.append({v: i for i, v in enumerate(f.vocabulary)})
        else:
            lookups.append(None)
    instances, oov = [], 0
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{csv_path}: file is empty")
        header = [h.strip() for h in header]
        has_label = header[-1:] == ["label"] and "label" not in schema.names
        columns = header[:-1] if has_label else header
        if columns != schema.names:
            missing = [n for n in schema.names if n not in columns]
            detail = f"missing column(s) {missing}" if missing else f"columns {columns} != {schema.names}"
            raise DataError(f"{csv_path}: header row: {detail}")
        for rowno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{csv_path}:{rowno}: expected {len(header)} fields, got {len(row)}")
            values = []
            for j, (f, raw) in enumerate(zip(schema.features, row)):
                raw = raw.strip()
                if f.is_categorical:
                    if raw not in lookups[j]:
                        raise DataError(
                            f"{csv_path}:{rowno}: unknown value {raw!r} for feature {f.name!r}"
                        )
                    values.append(lookups[j][raw])
                else:
                    tid = f.table.lookup(raw)
                    if tid is None:
                        oov += 1
                        tid = f.table.mask_id
                    values.append(tid)
            label = None
            if has_label:
                label = _parse_label(row[-1], f"{csv_path}:{rowno}")
            instances.append(Instance(tuple(values), label))
    if not instances:
        raise DataError(f"{csv_path}: no data rows")
    return Dataset(schema, tuple(instances), {"source": str(csv_path), "oov_tokens": oov})


def _parse_label(raw: str, where: str) -> int:
    raw = raw.strip()
    if raw not in ("0", "1"):
        raise DataError(f"{where}: label must be 0 or 1, got {raw!r}")
    return int(raw)


def load_text(corpus_path, embedding_path, max_len: int, mask_token: str = DEFAULT_MASK_TOKEN) -> Dataset:
    """Load ``label<TAB>text`` lines as fixed-length token sequences.

    Short documents are padded with the mask token, long ones truncated, and
    out-of-vocabulary tokens are mapped to the mask token.
    """
    if max_len < 1:
        raise DataError("max_len must be positive")
    table = read_embeddings(embedding_path, mask_token)
    schema = FeatureSchema([FeatureSpec.embedded(f"tok{p}", table) for p in range(max_len)])
    mask_id = table.mask_id
    instances, oov = [], 0
    with open(corpus_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            label_raw, sep, text = line.rstrip("\n").partition("\t")
            if not sep:
                raise DataError(f"{corpus_path}:{lineno}: expected 'label<TAB>text'")
            label = _parse_label(label_raw, f"{corpus_path}:{lineno}")
            ids = []
            for tok in text.split()[:max_len]:
                tid = table.lookup(tok)
                if tid is None:
                    oov += 1
                    tid = mask_id
                ids.append(tid)
            ids += [mask_id] * (max_len - len(ids))
            instances.append(Instance(tuple(ids), label))
    if not instances:
        raise DataError(f"{corpus_path}: corpus is empty")
    if oov:
        logger.info("%s: %d out-of-vocabulary tokens mapped to %s", corpus_path, oov, mask_token)
    return Dataset(schema, tuple(instances), {"source": str(corpus_path), "oov_tokens": oov})


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of a synthetic benchmark.

    ``vocab_size`` is an int or one int per feature (categorical kind);
    embedded benchmarks share a table of ``n_tokens`` random vectors of
    length ``dim`` plus a mask token.
    """

    n_features: int
    n_instances: int
    kind: str = CATEGORICAL
    vocab_size: int | tuple[int, ...] = 4
    dim: int = 8
    n_tokens: int = 20
    weight_scale: float = 1.0
    label_noise: float = 0.0

    def vocab_sizes(self) -> list[int]:
        if isinstance(self.vocab_size, int):
            return [self.vocab_size] * self.n_features
        return [int(v) for v in self.vocab_size]


def synthesize(spec: SyntheticSpec, seed: int):
    """Sample a uniform dataset labelled by a planted logistic model.

    Returns ``(dataset, planted_model)``. Gold labels are the planted
    model's predictions, optionally flipped with probability ``label_noise``.
    """
    from .blackbox import LogisticModel

    if spec.n_features < 1:
        raise DataError("synthetic spec needs at least one feature")
    if spec.n_instances < 1:
        raise DataError("synthetic spec needs at least one instance")
    rng = derive_rng(seed, "synthesize")
    if spec.kind == CATEGORICAL:
        sizes = spec.vocab_sizes()
        if len(sizes) != spec.n_features or min(sizes) < 1:
            raise DataError(f"degenerate vocabulary sizes {sizes}")
        features = [
            FeatureSpec.categorical(f"f{j}", [f"v{k}" for k in range(v)]) for j, v in enumerate(sizes)
        ]
        n_values = np.array(sizes)
    elif spec.kind == EMBEDDED:
        if spec.dim < 1 or spec.n_tokens < 1:
            raise DataError("embedded synthetic spec needs dim >= 1 and n_tokens >= 1")
        vecs = rng.normal(0.0, 1.0 / np.sqrt(spec.dim), size=(spec.n_tokens + 1, spec.dim))
        tokens = tuple(f"w{k}" for k in range(spec.n_tokens)) + (DEFAULT_MASK_TOKEN,)
        table = EmbeddingTable(tokens, vecs, DEFAULT_MASK_TOKEN)
        features = [FeatureSpec.embedded(f"tok{j}", table) for j in range(spec.n_features)]
        # the mask token is never sampled as real content
        n_values = np.full(spec.n_features, spec.n_tokens)
    else:
        raise DataError(f"unknown synthetic kind {spec.kind!r}")
    schema = FeatureSchema(features)
    values = np.floor(rng.random((spec.n_instances, spec.n_features)) * n_values).astype(np.intp)
    weights = rng.normal(0.0, spec.weight_scale, size=schema.width)
    model = LogisticModel(weights, 0.0)
    labels = (schema.encode_values(values) @ weights > 0).astype(int)
    if spec.label_noise > 0:
        flip = rng.random(spec.n_instances) < spec.label_noise
        labels = np.where(flip, 1 - labels, labels)
    instances = tuple(Instance(tuple(row), int(y)) for row, y in zip(values.tolist(), labels))
    return Dataset(schema, instances, {"source": "synthetic"}), model
