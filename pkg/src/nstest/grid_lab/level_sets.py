"""Superlevel sets of grid fields and their (weighted) perimeters."""

from __future__ import annotations

import numpy as np

from ..gaussian_analysis import std_normal_pdf
from ..set_model import SpaceMismatchError
from .fields import TORUS, GridField

TIE_SHIFT = 1e-12


def superlevel_set(f: GridField, s: float) -> GridField:
    """Binary field of cells with ``f >= s``."""
    if not 0.0 < s < 1.0:
        raise ValueError("level must lie in (0, 1)")
    return f.with_values((f.values >= s).astype(float))


def symmetric_difference_measure(a: GridField, b: GridField) -> float:
    """Stationary measure of the cells where two binary fields disagree."""
    if not a.same_grid(b):
        raise SpaceMismatchError("fields live on different grids")
    return a.integrate((a.values != b.values).astype(float))


def _untie(values: np.ndarray, s: float) -> float:
    # A level sitting exactly on a sample value is nudged upward.
    while np.any(values == s):
        s = s + TIE_SHIFT
    return s


def _perimeter_1d(f: GridField, s: float) -> float:
    v = f.values
    s = _untie(v, s)
    up = v >= s
    if f.domain == TORUS:
        return float(np.count_nonzero(up != np.roll(up, -1)))
    idx = np.flatnonzero(up[:-1] != up[1:])
    if idx.size == 0:
        return 0.0
    c = f.centers()
    x_star = c[idx] + f.h * (s - v[idx]) / (v[idx + 1] - v[idx])
    return float(np.sum(std_normal_pdf(x_star)))


def perimeter_1d(f: GridField, s: float) -> float:
    """Boundary size of ``{f >= s}`` in one dimension.

    On the torus this is the number of crossings around the circle. On the
    OU window each crossing, located by linear interpolation, contributes the
    Gaussian density at the crossing point.
    """
    if f.dim != 1:
        raise ValueError("perimeter_1d needs a 1-D field")
    return _perimeter_1d(f, s)


class _Cells:
    """Corner values of the periodic marching-squares cells near the levels.

    Cell ``(i, j)`` has corners a=(i, j), b=(i+1, j), c=(i, j+1), d=(i+1, j+1).
    Only cells whose value range meets ``[lo, hi]`` are kept.
    """

    def __init__(self, v: np.ndarray, lo: float, hi: float):
        a = v
        b = np.roll(v, -1, axis=0)
        c = np.roll(v, -1, axis=1)
        d = np.roll(b, -1, axis=1)
        cmin = np.minimum(np.minimum(a, b), np.minimum(c, d))
        cmax = np.maximum(np.maximum(a, b), np.maximum(c, d))
        keep = (cmin <= hi) & (cmax >= lo) & (cmax > cmin)
        self.a, self.b, self.c, self.d = (x[keep] for x in (a, b, c, d))
        self.cmin, self.cmax = cmin[keep], cmax[keep]

    def length(self, s: float) -> float:
        """Total contour length at level ``s`` in cell units."""
        corners = np.concatenate([self.a, self.b, self.c, self.d])
        s = _untie(corners, s)
        sel = (self.cmin < s) & (self.cmax >= s)
        if not np.any(sel):
            return 0.0
        a, b, c, d = self.a[sel], self.b[sel], self.c[sel], self.d[sel]
        A, B, C, D = a >= s, b >= s, c >= s, d >= s
        with np.errstate(divide="ignore", invalid="ignore"):
            # Crossing points on the four edges, in local cell coordinates.
            pts = {
                "B": (np.stack([(s - a) / (b - a), np.zeros_like(a)]), A != B),
                "R": (np.stack([np.ones_like(a), (s - b) / (d - b)]), B != D),
                "T": (np.stack([(s - c) / (d - c), np.ones_like(a)]), C != D),
                "L": (np.stack([np.zeros_like(a), (s - a) / (c - a)]), A != C),
            }

        def seg(p, q):
            (xp, ep), (xq, eq) = pts[p], pts[q]
            dist = np.sqrt(np.sum((xp - xq) ** 2, axis=0))
            return np.where(ep & eq, dist, 0.0)

        count = sum(e.astype(int) for _, e in pts.values())
        single = sum(seg(p, q) for p, q in (("B", "R"), ("B", "T"), ("B", "L"),
                                            ("R", "T"), ("R", "L"), ("T", "L")))
        # Saddle: a, d on one side, b, c on the other. The cell-centre average
        # decides whether a and d are joined through the cell.
        centre_with_a = ((a + b + c + d) / 4.0 >= s) == A
        saddle = np.where(centre_with_a, seg("B", "R") + seg("T", "L"), seg("B", "L") + seg("R", "T"))
        return float(np.sum(np.where(count == 4, saddle, np.where(count == 2, single, 0.0))))


def perimeter_2d(f: GridField, s: float) -> float:
    """Length of the level curve ``{f = s}`` on ``T^2`` by marching squares."""
    if f.dim != 2 or f.domain != TORUS:
        raise ValueError("perimeter_2d needs a 2-D torus field")
    return _Cells(f.values, s, s).length(s) * f.h


def perimeter_curve(f: GridField, levels) -> np.ndarray:
    """Perimeter of ``{f >= s}`` for every ``s`` in ``levels``."""
    levels = np.asarray(levels, dtype=float)
    if f.dim == 1:
        return np.array([_perimeter_1d(f, s) for s in levels])
    if f.dim == 2 and f.domain == TORUS:
        if levels.size == 0:
            return np.zeros(0)
        cells = _Cells(f.values, levels.min(), levels.max() + 1e-9)
        return np.array([cells.length(s) * f.h for s in levels])
    raise ValueError("unsupported field for perimeter computation")
