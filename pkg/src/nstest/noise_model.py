"""Correlated pair samplers and Monte Carlo noise sensitivity.

Two stationary diffusions are supported:

* heat flow on the torus ``T^n`` (curvature 0): ``X ~ U(T^n)``,
  ``Y = X + sqrt(2t) Z mod 1``;
* the Ornstein-Uhlenbeck process on ``R^n`` (curvature 1): ``X ~ N(0, I)``,
  ``Y = e^{-t} X + sqrt(1 - e^{-2t}) Z``.

Samples are generated in fixed-size chunks, chunk ``k`` drawing from
``stream.child(k)``, so estimates do not depend on the number of workers.
"""

from __future__ import annotations

import math
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .rng import Stream, open_uniform, standard_normal
from .set_model import Euclidean, Region, SpaceMismatchError, Torus

CHUNK = 1 << 16
WRAP_SCALE = 0.25

HEAT_TORUS = "heat-torus"
ORNSTEIN_UHLENBECK = "ou"


class WrapRegimeWarning(UserWarning):
    """Torus noise scale sqrt(2t) is large enough that wrapping is not negligible."""


@dataclass(frozen=True)
class NoiseModel:
    kind: str
    n: int = 1

    def __post_init__(self):
        if self.kind not in (HEAT_TORUS, ORNSTEIN_UHLENBECK):
            raise ValueError(f"unknown noise model kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("dimension must be >= 1")

    @property
    def curvature(self) -> float:
        return 0.0 if self.kind == HEAT_TORUS else 1.0

    @property
    def space(self):
        return Torus(self.n) if self.kind == HEAT_TORUS else Euclidean(self.n)

    @property
    def name(self) -> str:
        return f"{self.kind}-{self.n}"

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        """Parse ``heat-torus-2`` / ``ou-1`` style names (dimension defaults to 1)."""
        m = re.fullmatch(r"(heat-torus|ou)(?:-(\d+))?", text.strip())
        if not m:
            raise ValueError(f"unknown model {text!r}; expected heat-torus-<n> or ou-<n>")
        return cls(m.group(1), int(m.group(2) or 1))


def heat_torus(n: int = 1) -> NoiseModel:
    return NoiseModel(HEAT_TORUS, n)


def ornstein_uhlenbeck(n: int = 1) -> NoiseModel:
    return NoiseModel(ORNSTEIN_UHLENBECK, n)


def curvature_of(model: NoiseModel) -> float:
    return model.curvature


@dataclass(frozen=True)
class NsEstimate:
    mean: float
    std_error: float
    m: int
    t: float
    exits: int = 0
    entries: int = 0

    def to_dict(self):
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "m": self.m,
            "t": self.t,
            "exits": self.exits,
            "entries": self.entries,
        }


def _check_t(t):
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")


def warn_if_wrapping(model: NoiseModel, t: float) -> None:
    if model.kind == HEAT_TORUS and math.sqrt(2 * t) > WRAP_SCALE:
        warnings.warn(
            f"sqrt(2t) = {math.sqrt(2 * t):.3g} exceeds {WRAP_SCALE}; torus wrapping is significant",
            WrapRegimeWarning,
            stacklevel=3,
        )


def _draw(model: NoiseModel, t: float, size: int, rng: np.random.Generator):
    shape = (size, model.n)
    if model.kind == HEAT_TORUS:
        x = open_uniform(rng, shape)
        z = standard_normal(rng, shape)
        y = np.mod(x + math.sqrt(2 * t) * z, 1.0)
    else:
        x = standard_normal(rng, shape)
        z = standard_normal(rng, shape)
        y = math.exp(-t) * x + math.sqrt(-math.expm1(-2 * t)) * z
    return x, y


def sample_pairs(model: NoiseModel, t: float, size: int, stream: Stream):
    """Draw ``size`` correlated pairs ``(X, Y)`` as two ``(size, n)`` arrays."""
    _check_t(t)
    warn_if_wrapping(model, t)
    xs, ys = [], []
    for k, start in enumerate(range(0, size, CHUNK)):
        x, y = _draw(model, t, min(CHUNK, size - start), stream.child(k).generator())
        xs.append(x)
        ys.append(y)
    if not xs:
        return np.empty((0, model.n)), np.empty((0, model.n))
    return np.concatenate(xs), np.concatenate(ys)


def sample_pair(model: NoiseModel, t: float, stream: Stream):
    x, y = sample_pairs(model, t, 1, stream)
    return x[0], y[0]


def _check_spaces(model: NoiseModel, region: Region):
    if model.space != region.space:
        raise SpaceMismatchError(f"model lives on {model.space}, region on {region.space}")


def _count_chunk(model, region, t, size, stream):
    x, y = _draw(model, t, size, stream.generator())
    in_x = region._contains(x)
    in_y = region._contains(y)
    return int(np.count_nonzero(in_x & ~in_y)), int(np.count_nonzero(in_y & ~in_x))


def ns_estimate(
    model: NoiseModel,
    region: Region,
    t: float,
    m: int,
    stream: Stream,
    workers: int | None = 1,
) -> NsEstimate:
    """Fraction of ``m`` pairs with ``1_A(X) != 1_A(Y)``.

    Chunks are independent and may be evaluated by ``workers`` threads;
    ``workers=None`` uses the executor default.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    _check_t(t)
    _check_spaces(model, region)
    warn_if_wrapping(model, t)
    jobs = [(k, min(CHUNK, m - start)) for k, start in enumerate(range(0, m, CHUNK))]

    def run(job):
        k, size = job
        return _count_chunk(model, region, t, size, stream.child(k))

    if workers == 1 or len(jobs) == 1:
        counts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(run, jobs))
    exits = sum(c[0] for c in counts)
    entries = sum(c[1] for c in counts)
    mean = (exits + entries) / m
    return NsEstimate(
        mean=mean,
        std_error=math.sqrt(mean * (1 - mean) / m),
        m=m,
        t=t,
        exits=exits,
        entries=entries,
    )
