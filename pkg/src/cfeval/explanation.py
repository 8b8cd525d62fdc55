"""Feature-attribution explanations and their line-oriented file format."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Explanation:
    """Ordered subset of an instance's feature indices, most important first."""

    feature_indices: tuple[int, ...]
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        idx = tuple(int(i) for i in self.feature_indices)
        if not idx:
            raise DataError("explanation must select at least one feature")
        if len(set(idx)) != len(idx):
            raise DataError(f"explanation has repeated indices {idx}")
        if min(idx) < 0:
            raise DataError(f"negative feature index in {idx}")
        object.__setattr__(self, "feature_indices", idx)
        if self.scores is not None:
            object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))

    def __len__(self) -> int:
        return len(self.feature_indices)

    def __iter__(self):
        return iter(self.feature_indices)

    def check(self, n_features: int) -> None:
        if max(self.feature_indices) >= n_features:
            raise DataError(f"feature index out of range [0, {n_features}) in {self.feature_indices}")

    def mask(self, n_features: int) -> np.ndarray:
        out = np.zeros(n_features, dtype=bool)
        out[list(self.feature_indices)] = True
        return out


def top_k(scores: np.ndarray, k: int) -> list[int]:
    """Indices of the ``k`` largest scores; ties go to the lower index."""
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    return [int(i) for i in order[:k]]


def write_explanations(path, explanations: Sequence[Explanation]) -> None:
    lines = [" ".join(str(i) for i in e.feature_indices) for e in explanations]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_explanations(path, n_features: int, n_instances: int | None = None) -> list[Explanation]:
    """One line per instance, space-separated feature indices."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                idx = [int(tok) for tok in line.split()]
                expl = Explanation(tuple(idx))
                expl.check(n_features)
            except (ValueError, DataError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            out.append(expl)
    if n_instances is not None and len(out) != n_instances:
        raise DataError(f"{path}: {len(out)} explanations for {n_instances} instances")
    return out
