"""Per-stage, per-instance random streams.

Every stochastic step draws from a generator keyed by
``(global_seed, stage_tag, instance_index)`` so results never depend on the
order in which instances or explainers are processed.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def seed_sequence(seed: int, tag: str = "", index: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) % 2**63, _tag_key(tag), int(index)])


def derive_rng(seed: int, tag: str = "", index: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, tag, index))


def derive_seed(seed: int, tag: str = "", index: int = 0) -> int:
    """Integer seed for APIs that take ``seed: int`` rather than a generator."""
    return int(seed_sequence(seed, tag, index).generate_state(1, dtype=np.uint32)[0])
