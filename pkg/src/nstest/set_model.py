"""Measurable sets on the flat torus and on Gaussian space.

Regions are immutable descriptions with a vectorised membership oracle.
Shapes with a closed form also report their measure and surface area:
Lebesgue measure and perimeter on ``T^n``, and the standard Gaussian measure
with its Gaussian-weighted surface area on ``R^n``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, ClassVar

import numpy as np
from scipy import special, stats


class SpaceMismatchError(ValueError):
    """A point or model lives in a different space than the region."""


@dataclass(frozen=True)
class Torus:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")

    def to_dict(self):
        return {"kind": "torus", "n": self.n}


@dataclass(frozen=True)
class Euclidean:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")

    def to_dict(self):
        return {"kind": "euclidean", "n": self.n}


Space = Torus | Euclidean


def space_from_dict(d) -> Space:
    kinds = {"torus": Torus, "euclidean": Euclidean}
    try:
        return kinds[d["kind"]](int(d["n"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad space description: {d!r}") from exc


def _wrap(x):
    # x mod 1 in [0, 1); tiny negatives would otherwise round up to 1.0.
    r = np.mod(x, 1.0)
    return np.where(r >= 1.0, 0.0, r)


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(_wrap(float(c))) for c in self.coords))

    @property
    def space(self) -> Torus:
        return Torus(len(self.coords))


@dataclass(frozen=True)
class EuclideanPoint:
    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in self.coords)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError("Euclidean coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def space(self) -> Euclidean:
        return Euclidean(len(self.coords))


def _as_points(region: "Region", points) -> np.ndarray:
    """Normalise a point (or batch) into an ``(k, n)`` array for ``region``."""
    if isinstance(points, (TorusPoint, EuclideanPoint)):
        if points.space != region.space:
            raise SpaceMismatchError(f"point in {points.space}, region in {region.space}")
        return np.asarray(points.coords, dtype=float)[None, :]
    pts = np.asarray(points, dtype=float)
    n = region.space.n
    if pts.ndim == 0 or (pts.ndim == 1 and n == 1):
        pts = pts.reshape(-1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != n:
        raise SpaceMismatchError(f"points of shape {pts.shape} do not live in {region.space}")
    if isinstance(region.space, Torus):
        pts = _wrap(pts)
    return pts


class Region:
    """Base class; subclasses implement ``_contains`` on ``(k, n)`` arrays."""

    tag: ClassVar[str]
    space: Space

    def _contains(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def exact_measure(self) -> float | None:
        return None

    def exact_perimeter(self) -> float | None:
        return None

    def _params(self) -> dict[str, Any]:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        return {"shape": self.tag, "space": self.space.to_dict(), **self._params()}

    def __invert__(self):
        return Complement(self)

    def __or__(self, other):
        return Union((self, other))

    def __and__(self, other):
        return Intersection((self, other))


@dataclass(frozen=True)
class Empty(Region):
    space: Space = Torus(1)
    tag: ClassVar[str] = "empty"

    def _contains(self, pts):
        return np.zeros(len(pts), dtype=bool)

    def exact_measure(self):
        return 0.0

    def exact_perimeter(self):
        return 0.0

    def _params(self):
        return {}


@dataclass(frozen=True)
class IntervalUnion(Region):
    """Disjoint half-open arcs ``[a, b)`` on the circle ``T^1``.

    An arc may wrap past 1 (``b > 1``); its length ``b - a`` must be in (0, 1].
    """

    arcs: tuple[tuple[float, float], ...]
    space: Space = field(default=Torus(1), init=False)
    tag: ClassVar[str] = "interval_union"

    def __post_init__(self):
        normed = []
        for a, b in self.arcs:
            length = float(b) - float(a)
            if not 0.0 < length <= 1.0:
                raise ValueError(f"arc [{a}, {b}) must have length in (0, 1]")
            start = float(a) % 1.0
            normed.append((start, start + length))
        normed.sort()
        # Sorted by start in [0, 1): each arc must end before the next starts,
        # and the last one (possibly wrapping) before the first start + 1.
        nxt = [a for a, _ in normed[1:]] + [normed[0][0] + 1.0] if normed else []
        if any(b > a1 + 1e-12 for (_, b), a1 in zip(normed, nxt)):
            raise ValueError("arcs overlap")
        object.__setattr__(self, "arcs", tuple(normed))

    def _contains(self, pts):
        x = pts[:, 0]
        out = np.zeros(len(x), dtype=bool)
        for a, b in self.arcs:
            out |= np.mod(x - a, 1.0) < (b - a)
        return out

    def exact_measure(self):
        return float(sum(b - a for a, b in self.arcs))

    def exact_perimeter(self):
        if not self.arcs:
            return 0.0
        if abs(self.exact_measure() - 1.0) < 1e-15:
            return 0.0
        # Endpoints where one arc ends exactly where the next begins cancel.
        starts = {round(a % 1.0, 15) for a, _ in self.arcs}
        ends = {round(b % 1.0, 15) for _, b in self.arcs}
        return float(len(starts ^ ends))

    def _params(self):
        return {"arcs": [list(arc) for arc in self.arcs]}


@dataclass(frozen=True)
class Box(Region):
    """Axis-aligned box ``lower <= x < upper``.

    On the torus each side is an arc of length ``upper_i - lower_i`` in (0, 1].
    On Euclidean space bounds may be infinite.
    """

    space: Space
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    tag: ClassVar[str] = "box"

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != self.space.n or len(hi) != self.space.n:
            raise ValueError("box bounds must match the space dimension")
        for a, b in zip(lo, hi):
            if not a < b:
                raise ValueError("box requires lower < upper on every axis")
            if isinstance(self.space, Torus) and not (math.isfinite(a) and b - a <= 1.0):
                raise ValueError("torus box sides must have length in (0, 1]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def _side_lengths(self):
        return [b - a for a, b in zip(self.lower, self.upper)]

    def _contains(self, pts):
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        if isinstance(self.space, Torus):
            return np.all(np.mod(pts - lo, 1.0) < (hi - lo), axis=1)
        return np.all((pts >= lo) & (pts < hi), axis=1)

    def _side_masses(self):
        if isinstance(self.space, Torus):
            return self._side_lengths()
        return [float(special.ndtr(b) - special.ndtr(a)) for a, b in zip(self.lower, self.upper)]

    def exact_measure(self):
        return float(math.prod(self._side_masses()))

    def exact_perimeter(self):
        masses = self._side_masses()
        total = 0.0
        for i, (a, b) in enumerate(zip(self.lower, self.upper)):
            if isinstance(self.space, Torus):
                faces = 0.0 if b - a >= 1.0 else 2.0
            else:
                faces = _phi(a) + _phi(b)
            total += faces * math.prod(masses[:i] + masses[i + 1:])
        return total

    def _params(self):
        return {"lower": list(self.lower), "upper": list(self.upper)}


@dataclass(frozen=True)
class Ball(Region):
    """Closed ball ``|x - center| <= radius``; torus balls use wrapped distance."""

    space: Space
    center: tuple[float, ...]
    radius: float
    tag: ClassVar[str] = "ball"

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        if len(center) != self.space.n:
            raise ValueError("ball center must match the space dimension")
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        if isinstance(self.space, Torus):
            if not self.radius < 0.5:
                raise ValueError("torus ball radius must be < 0.5")
            center = tuple(c % 1.0 for c in center)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    def _contains(self, pts):
        d = pts - np.asarray(self.center)
        if isinstance(self.space, Torus):
            d = np.mod(d + 0.5, 1.0) - 0.5
        return np.einsum("ij,ij->i", d, d) <= self.radius**2

    def exact_measure(self):
        n, r = self.space.n, self.radius
        if isinstance(self.space, Torus):
            return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r**n
        nc = sum(c * c for c in self.center)
        if nc == 0.0:
            return float(stats.chi2.cdf(r * r, n))
        return float(stats.ncx2.cdf(r * r, n, nc))

    def exact_perimeter(self):
        n, r = self.space.n, self.radius
        sphere = 2 * math.pi ** (n / 2) / math.gamma(n / 2) * r ** (n - 1)
        if isinstance(self.space, Torus):
            return sphere
        if any(c != 0.0 for c in self.center):
            return None
        return sphere * (2 * math.pi) ** (-n / 2) * math.exp(-r * r / 2)

    def _params(self):
        return {"center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class HalfSpace(Region):
    """``{x : <normal, x> >= offset}`` in Gaussian space."""

    space: Space
    normal: tuple[float, ...]
    offset: float = 0.0
    tag: ClassVar[str] = "halfspace"

    def __post_init__(self):
        if not isinstance(self.space, Euclidean):
            raise ValueError("half-spaces are only defined on Euclidean space")
        normal = tuple(float(v) for v in self.normal)
        if len(normal) != self.space.n or not any(normal):
            raise ValueError("normal must be a non-zero vector of the space dimension")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    def _unit_offset(self):
        return self.offset / math.hypot(*self.normal)

    def _contains(self, pts):
        return pts @ np.asarray(self.normal) >= self.offset

    def exact_measure(self):
        return float(special.ndtr(-self._unit_offset()))

    def exact_perimeter(self):
        return _phi(self._unit_offset())

    def _params(self):
        return {"normal": list(self.normal), "offset": self.offset}


def _dash_count(t: float) -> int:
    # floor(5 / sqrt(t)) with a guard against 5/sqrt(t) landing a hair below an integer.
    return math.floor(5.0 / math.sqrt(t) + 1e-9)


@dataclass(frozen=True)
class DashedLine(Region):
    """``floor(5/sqrt t)`` arcs of length ``sqrt(t)/10`` with equal gaps, from 0."""

    t: float
    space: Space = field(default=Torus(1), init=False)
    tag: ClassVar[str] = "dashed_line"

    def __post_init__(self):
        if not 0.0 < self.t <= 0.25:
            raise ValueError(f"dashed line requires 0 < t <= 0.25, got {self.t}")
        object.__setattr__(self, "t", float(self.t))

    @property
    def count(self) -> int:
        return _dash_count(self.t)

    @property
    def dash_length(self) -> float:
        return math.sqrt(self.t) / 10.0

    def _contains(self, pts):
        k = np.floor(np.mod(pts[:, 0], 1.0) / self.dash_length)
        return (np.mod(k, 2) == 0) & (k < 2 * self.count)

    def exact_measure(self):
        return self.count * self.dash_length

    def exact_perimeter(self):
        return 2.0 * self.count

    def _params(self):
        return {"t": self.t}


def _check_same_space(parts):
    spaces = {p.space for p in parts}
    if len(spaces) != 1:
        raise SpaceMismatchError(f"boolean combination over different spaces: {spaces}")
    return spaces.pop()


@dataclass(frozen=True)
class Complement(Region):
    inner: Region
    space: Space = field(init=False)
    tag: ClassVar[str] = "complement"

    def __post_init__(self):
        object.__setattr__(self, "space", self.inner.space)

    def _contains(self, pts):
        return ~self.inner._contains(pts)

    def exact_measure(self):
        m = self.inner.exact_measure()
        return None if m is None else 1.0 - m

    def exact_perimeter(self):
        return self.inner.exact_perimeter()

    def to_dict(self):
        return {"shape": self.tag, "of": self.inner.to_dict()}


@dataclass(frozen=True)
class Union(Region):
    parts: tuple[Region, ...]
    space: Space = field(init=False)
    tag: ClassVar[str] = "union"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "space", _check_same_space(self.parts))

    def _contains(self, pts):
        return np.logical_or.reduce([p._contains(pts) for p in self.parts])

    def to_dict(self):
        return {"shape": self.tag, "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple[Region, ...]
    space: Space = field(init=False)
    tag: ClassVar[str] = "intersection"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        object.__setattr__(self, "space", _check_same_space(self.parts))

    def _contains(self, pts):
        return np.logical_and.reduce([p._contains(pts) for p in self.parts])

    def to_dict(self):
        return {"shape": self.tag, "parts": [p.to_dict() for p in self.parts]}


def _phi(x: float) -> float:
    return 0.0 if math.isinf(x) else math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def contains(region: Region, points):
    """Membership oracle. Returns a bool for a single point, else a bool array."""
    pts = _as_points(region, points)
    out = region._contains(pts)
    single = isinstance(points, (TorusPoint, EuclideanPoint)) or np.ndim(points) == 0 or (
        np.ndim(points) == 1 and region.space.n > 1
    )
    return bool(out[0]) if single else out


def exact_measure(region: Region) -> float | None:
    return region.exact_measure()


def exact_perimeter(region: Region) -> float | None:
    return region.exact_perimeter()


def dashed_line_region(t: float) -> DashedLine:
    return DashedLine(t)


# --- JSON -------------------------------------------------------------------

def region_from_dict(d: dict[str, Any]) -> Region:
    try:
        shape = d["shape"]
        if shape == "complement":
            return Complement(region_from_dict(d["of"]))
        if shape in ("union", "intersection"):
            parts = tuple(region_from_dict(p) for p in d["parts"])
            return (Union if shape == "union" else Intersection)(parts)
        if shape == "interval_union":
            return IntervalUnion(tuple(tuple(a) for a in d["arcs"]))
        if shape == "dashed_line":
            return DashedLine(float(d["t"]))
        space = space_from_dict(d["space"])
        if shape == "empty":
            return Empty(space)
        if shape == "box":
            return Box(space, tuple(d["lower"]), tuple(d["upper"]))
        if shape == "ball":
            return Ball(space, tuple(d["center"]), float(d["radius"]))
        if shape == "halfspace":
            return HalfSpace(space, tuple(d["normal"]), float(d.get("offset", 0.0)))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed region description: {exc}") from exc
    raise ValueError(f"unknown shape {d.get('shape')!r}")


def load_region(path: str | Path) -> Region:
    doc = json.loads(Path(path).read_text())
    return region_from_dict(doc.get("region", doc))


def dump_region(region: Region) -> str:
    return json.dumps({"schema": 1, "region": region.to_dict()}, indent=2)


# --- presets ----------------------------------------------------------------

PRESETS = ("empty", "full", "interval-half", "dashed", "disk", "gaussian-halfspace")

_PRESET_RE = re.compile(r"^([a-z-]+)(?:[:(]\s*([0-9.eE+-]+)\s*\)?)?$")


def preset(spec: str, space: Space | None = None) -> Region:
    """Build a named preset.

    ``spec`` is a name from :data:`PRESETS`, optionally with one parameter as
    ``dashed:0.01`` or ``dashed(0.01)`` (the dash scale ``t``) or
    ``disk:0.25`` (the radius). ``empty``/``full`` adopt ``space``.
    """
    m = _PRESET_RE.match(spec.strip())
    if not m or m.group(1) not in PRESETS:
        raise ValueError(f"unknown preset {spec!r}; choose from {', '.join(PRESETS)}")
    name, arg = m.group(1), m.group(2)
    value = None if arg is None else float(arg)
    if name == "empty":
        return Empty(space or Torus(1))
    if name == "full":
        return Complement(Empty(space or Torus(1)))
    if name == "interval-half":
        return IntervalUnion(((0.0, 0.5),))
    if name == "dashed":
        return DashedLine(0.01 if value is None else value)
    if name == "disk":
        return Ball(Torus(2), (0.5, 0.5), 0.25 if value is None else value)
    n = space.n if isinstance(space, Euclidean) else 1
    return HalfSpace(Euclidean(n), (1.0,) + (0.0,) * (n - 1), 0.0 if value is None else value)
