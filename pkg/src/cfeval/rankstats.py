"""Rankings of explainers and their agreement with the reference ranking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HIGHER_BETTER = "higher_better"
LOWER_BETTER = "lower_better"

# Metric key -> direction. Proximity is deliberately absent: it only feeds
# the CES ratios and is never ranked on its own.
METRIC_DIRECTIONS = {
    "validity": HIGHER_BETTER,
    "validity_soft": HIGHER_BETTER,
    "ces": HIGHER_BETTER,
    "ces_soft": HIGHER_BETTER,
    "comp": HIGHER_BETTER,
    "dfr": HIGHER_BETTER,
    "suff": LOWER_BETTER,
    "ground_truth": HIGHER_BETTER,
}


def direction_of(metric: str) -> str | None:
    """Direction for a metric key such as ``comp_delete`` or ``ces``."""
    if metric in METRIC_DIRECTIONS:
        return METRIC_DIRECTIONS[metric]
    base = metric.rsplit("_", 1)[0]
    if base in ("comp", "suff", "dfr"):
        return METRIC_DIRECTIONS[base]
    return None


@dataclass(frozen=True)
class Ranking:
    method_names: tuple[str, ...]
    ranks: tuple[float, ...]
    direction: str

    def rank_of(self, name: str) -> float:
        return self.ranks[self.method_names.index(name)]

    def to_dict(self) -> dict:
        return {"method_names": list(self.method_names), "ranks": list(self.ranks), "direction": self.direction}

    @classmethod
    def from_dict(cls, d: dict) -> "Ranking":
        return cls(tuple(d["method_names"]), tuple(d["ranks"]), d["direction"])


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, smallest value first; tied values share their mean position."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def rank(values: Sequence[float], direction: str = HIGHER_BETTER, names: Sequence[str] | None = None) -> Ranking:
    """Rank methods so that 1 is the best value in the given direction."""
    if len(values) == 0:
        raise ValueError("cannot rank an empty list")
    if direction == HIGHER_BETTER:
        r = average_ranks(-np.asarray(values, dtype=float))
    elif direction == LOWER_BETTER:
        r = average_ranks(values)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    names = tuple(names) if names is not None else tuple(str(i) for i in range(len(values)))
    if len(names) != len(values):
        raise ValueError("one name per value is required")
    return Ranking(names, tuple(float(x) for x in r), direction)


def _pair(u, v) -> tuple[np.ndarray, np.ndarray]:
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError("inputs must be equal-length vectors")
    if len(u) < 2:
        raise ValueError("rank correlation needs at least two items")
    return u, v


def kendall_tau(u: Sequence[float], v: Sequence[float]) -> float:
    """(concordant - discordant) / (n(n-1)/2); pairs tied in either input count as neither."""
    u, v = _pair(u, v)
    n = len(u)
    iu = np.triu_indices(n, k=1)
    s = np.sign(u[:, None] - u[None, :])[iu] * np.sign(v[:, None] - v[None, :])[iu]
    return float(s.sum() / (n * (n - 1) / 2))


def spearman_rho(u: Sequence[float], v: Sequence[float]) -> float:
    """1 - 6 sum d^2 / (n(n^2 - 1)) on average ranks.

    Exact without ties; with ties it is the usual approximation.
    """
    u, v = _pair(u, v)
    n = len(u)
    d = average_ranks(u) - average_ranks(v)
    return float(1.0 - 6.0 * float(d @ d) / (n * (n * n - 1)))
