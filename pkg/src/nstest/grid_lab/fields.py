"""Grid fields and the two smoothing semigroups acting on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import special

from ..gaussian_analysis import std_normal_pdf
from ..noise_model import HEAT_TORUS, ORNSTEIN_UHLENBECK, NoiseModel
from ..set_model import Euclidean, Region, SpaceMismatchError, Torus, contains

TORUS = "torus"
OU_WINDOW = "ou"

DEFAULT_WIDTH = 6.0
CELLS_PER_SMOOTHING_LENGTH = 10
MIN_GH_NODES = 64


class ResolutionError(ValueError):
    """The grid is too coarse for the requested smoothing time."""


@dataclass(frozen=True, eq=False)
class GridField:
    """Cell-centred samples on ``T^1``/``T^2`` or on the window ``[-W, W]``.

    For the OU window, ``width`` is the half-width ``W`` and cell weights are
    ``phi(x) * h``; on the torus every cell weighs ``h^dim``.
    """

    values: np.ndarray
    domain: str = TORUS
    width: float = 1.0

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        span = 1.0 if self.domain == TORUS else 2.0 * self.width
        return span / self.N

    def centers(self) -> np.ndarray:
        if self.domain == TORUS:
            return (np.arange(self.N) + 0.5) / self.N
        return -self.width + (np.arange(self.N) + 0.5) * self.h

    def weights(self) -> np.ndarray | float:
        if self.domain == TORUS:
            return 1.0 / self.values.size
        return std_normal_pdf(self.centers()) * self.h

    def integrate(self, values: np.ndarray) -> float:
        """Integral of ``values`` (same grid) against the stationary measure."""
        w = self.weights()
        if np.ndim(w) == 0:
            return float(np.mean(values))
        return float(np.sum(values * w))

    def with_values(self, values: np.ndarray) -> "GridField":
        return replace(self, values=values)

    def same_grid(self, other: "GridField") -> bool:
        return (
            self.values.shape == other.values.shape
            and self.domain == other.domain
            and self.width == other.width
        )


def model_for(region: Region) -> NoiseModel:
    """The semigroup that grid_lab pairs with a region's space."""
    if isinstance(region.space, Torus):
        return NoiseModel(HEAT_TORUS, region.space.n)
    return NoiseModel(ORNSTEIN_UHLENBECK, region.space.n)


def rasterize(region: Region, N: int, width: float = DEFAULT_WIDTH) -> GridField:
    """Indicator of ``region`` evaluated at cell centres."""
    if N < 2:
        raise ValueError("resolution must be at least 2")
    space = region.space
    if isinstance(space, Torus) and space.n in (1, 2):
        c = (np.arange(N) + 0.5) / N
        if space.n == 1:
            vals = contains(region, c[:, None])
        else:
            xx, yy = np.meshgrid(c, c, indexing="ij")
            vals = contains(region, np.column_stack([xx.ravel(), yy.ravel()])).reshape(N, N)
        return GridField(vals.astype(float), TORUS)
    if isinstance(space, Euclidean) and space.n == 1:
        if width < 6.0:
            raise ValueError("OU window half-width must be >= 6")
        c = -width + (np.arange(N) + 0.5) * (2.0 * width / N)
        return GridField(contains(region, c[:, None]).astype(float), OU_WINDOW, float(width))
    raise SpaceMismatchError(f"grid_lab supports T^1, T^2 and R^1 only, not {space}")


def required_resolution(t: float) -> int:
    """Smallest torus resolution with ``sqrt(2t) >= 10 h``."""
    return math.ceil(CELLS_PER_SMOOTHING_LENGTH / math.sqrt(2.0 * t))


def apply_heat(f: GridField, t: float) -> GridField:
    """Heat semigroup on the torus by an exact Fourier multiplier.

    Mode ``k`` is damped by ``exp(-4 pi^2 |k|^2 t)``, i.e. circular
    convolution with the wrapped Gaussian of standard deviation ``sqrt(2t)``
    per axis.
    """
    if f.domain != TORUS:
        raise SpaceMismatchError("apply_heat needs a torus field")
    if not t > 0:
        raise ValueError("t must be positive")
    if math.sqrt(2.0 * t) < CELLS_PER_SMOOTHING_LENGTH * f.h:
        raise ResolutionError(
            f"sqrt(2t) = {math.sqrt(2 * t):.3g} spans fewer than {CELLS_PER_SMOOTHING_LENGTH} "
            f"cells at N = {f.N}; need N >= {required_resolution(t)}"
        )
    vals = f.values
    axes = tuple(range(vals.ndim))
    spec = np.fft.rfftn(vals, axes=axes)
    multiplier = np.ones(spec.shape)
    for ax in axes:
        n_ax = vals.shape[ax]
        k = np.fft.rfftfreq(n_ax, 1.0 / n_ax) if ax == axes[-1] else np.fft.fftfreq(n_ax, 1.0 / n_ax)
        shape = [1] * vals.ndim
        shape[ax] = k.size
        multiplier = multiplier * np.exp(-4.0 * math.pi**2 * t * k**2).reshape(shape)
    out = np.fft.irfftn(spec * multiplier, s=vals.shape, axes=axes)
    # Maximum principle; removes round-off excursions of order 1e-16.
    return f.with_values(np.clip(out, vals.min(), vals.max()))


def _ou_exact(f: GridField, t: float, rows: int = 512) -> np.ndarray:
    # Integrates the piecewise-linear interpolant of f (constant beyond the
    # outer cell centres) against the Gaussian N(e^{-t} x, 1 - e^{-2t}).
    c = f.centers()
    v = f.values
    h = f.h
    sd = math.sqrt(-math.expm1(-2.0 * t))
    slope = np.diff(v) / h
    out = np.empty_like(v)
    for start in range(0, v.size, rows):
        mu = math.exp(-t) * c[start:start + rows, None]
        z = (c[None, :] - mu) / sd
        cdf = special.ndtr(z)
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        d_cdf = np.diff(cdf, axis=1)
        d_pdf = np.diff(pdf, axis=1)
        seg = d_cdf @ v[:-1] + ((mu - c[None, :-1]) * d_cdf - sd * d_pdf) @ slope
        out[start:start + rows] = v[0] * cdf[:, 0] + v[-1] * (1.0 - cdf[:, -1]) + seg
    return out


def ou_gauss_hermite(func, x, t: float, nodes: int = MIN_GH_NODES) -> np.ndarray:
    """``E func(e^{-t} x + sqrt(1 - e^{-2t}) Z)`` by Gauss-Hermite quadrature.

    Accurate for smooth ``func``; ``nodes`` must be at least 64.
    """
    if nodes < MIN_GH_NODES:
        raise ValueError(f"use at least {MIN_GH_NODES} Gauss-Hermite nodes")
    y, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    x = np.asarray(x, dtype=float)
    pts = math.exp(-t) * x[..., None] + math.sqrt(-math.expm1(-2.0 * t)) * y
    return func(pts) @ w


def apply_ou_1d(f: GridField, t: float, quadrature: str = "exact", nodes: int = MIN_GH_NODES) -> GridField:
    """Ornstein-Uhlenbeck semigroup on a 1-D window field.

    ``f`` is read as the piecewise-linear interpolant of its cell values,
    held constant outside the window. ``quadrature="exact"`` integrates that
    interpolant against the Gaussian kernel in closed form; this is the only
    choice that stays accurate for indicator fields. ``"gauss-hermite"``
    applies :func:`ou_gauss_hermite` and is meant for smooth fields.
    """
    if f.domain != OU_WINDOW or f.dim != 1:
        raise SpaceMismatchError("apply_ou_1d needs a 1-D OU window field")
    if not t > 0:
        raise ValueError("t must be positive")
    if quadrature == "exact":
        out = _ou_exact(f, t)
    elif quadrature == "gauss-hermite":
        c = f.centers()
        out = ou_gauss_hermite(lambda p: np.interp(p, c, f.values), c, t, nodes)
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    return f.with_values(np.clip(out, f.values.min(), f.values.max()))


def smooth(f: GridField, t: float) -> GridField:
    return apply_heat(f, t) if f.domain == TORUS else apply_ou_1d(f, t)


def gradient_magnitude(f: GridField) -> GridField:
    """Central-difference gradient norm (periodic on the torus)."""
    v = f.values
    if f.domain == TORUS:
        parts = [(np.roll(v, -1, axis=a) - np.roll(v, 1, axis=a)) / (2.0 * f.h) for a in range(v.ndim)]
        return f.with_values(np.sqrt(sum(p * p for p in parts)))
    return f.with_values(np.abs(np.gradient(v, f.h, edge_order=2)))


@lru_cache(maxsize=8)
def smoothed_indicator(region: Region, t: float, N: int, width: float = DEFAULT_WIDTH):
    """Return ``(1_A, P_t 1_A)`` as grid fields (cached, read-only)."""
    f = rasterize(region, N, width)
    g = smooth(f, t)
    for field in (f, g):
        field.values.flags.writeable = False
    return f, g


def discrete_ns(region: Region, t: float, N: int, model: NoiseModel | None = None,
                width: float = DEFAULT_WIDTH) -> float:
    """Grid value of ``E |P_t 1_A - 1_A|`` under the stationary measure."""
    if model is not None and model.space != region.space:
        raise SpaceMismatchError(f"model lives on {model.space}, region on {region.space}")
    f, g = smoothed_indicator(region, t, N, width)
    return g.integrate(np.abs(g.values - f.values))
