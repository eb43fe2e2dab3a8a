"""Counter-based, splittable random streams.

A :class:`Stream` is a pure address ``(seed, path)``. Children are obtained by
appending an index to the path, so any sub-computation (a chunk of samples, a
trial of the tester) can be replayed in isolation and in any order. Each
address is mapped to a Philox generator through ``numpy.random.SeedSequence``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import special

SEED_ENV_VAR = "NSTEST_SEED"

_U53 = 2.0**-53


@dataclass(frozen=True)
class Stream:
    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def child(self, index: int) -> "Stream":
        return Stream(self.seed, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 53 bits of resolution."""
    k = rng.integers(0, 1 << 53, size=size, dtype=np.uint64)
    return (k.astype(np.float64) + 0.5) * _U53


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normals by inverse CDF, one uniform per variate."""
    return special.ndtri(open_uniform(rng, size))


def seed_from_env() -> int | None:
    raw = os.environ.get(SEED_ENV_VAR)
    return None if raw in (None, "") else int(raw)
