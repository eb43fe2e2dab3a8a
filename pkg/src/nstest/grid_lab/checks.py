"""Grid-level certification of the smoothing-and-thresholding argument.

Every check compares a left-hand side with a right-hand side and passes iff
``lhs <= rhs * (1 + tolerance) + floor``. The inequalities being checked are
exact; ``tolerance`` only budgets for discretisation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..gaussian_analysis import curvature_factor, iso_profile, psi_integral, psi_weight
from ..noise_model import NoiseModel
from ..set_model import (
    Ball,
    Box,
    DashedLine,
    Empty,
    Euclidean,
    HalfSpace,
    IntervalUnion,
    Region,
    SpaceMismatchError,
    Torus,
)
from .fields import DEFAULT_WIDTH, gradient_magnitude, model_for, smoothed_indicator
from .level_sets import perimeter_curve

LEVELS = 512
IDENTITY_TOL = 0.03
LEMMA_TOL = 0.02
SMOOTHNESS_TOL = 0.02
CERTIFICATE_TOL = 0.03
ABS_FLOOR = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    lhs: float
    rhs: float
    tolerance: float
    floor: float = ABS_FLOOR

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs * (1.0 + self.tolerance) + self.floor)

    @property
    def slack(self) -> float:
        """``rhs - lhs``; negative values are absorbed by the tolerance or fail."""
        return self.rhs - self.lhs

    def to_dict(self):
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "slack": self.slack,
            "tolerance": self.tolerance,
            "floor": self.floor,
            "pass": self.passed,
        }


@dataclass
class VerificationReport:
    fixture: str
    kind: str
    checks: list[CheckResult]
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self):
        return {
            "fixture": self.fixture,
            "kind": self.kind,
            "pass": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "details": self.details,
        }


@dataclass
class LevelSetCertificate:
    """A level ``s`` and the set ``B = (P_t 1_A)^{>= s}`` it selects."""

    fixture: str
    s: float
    perimeter: float
    sym_diff: float
    bound_rhs: float
    ns: float
    eta: float
    checks: list[CheckResult]
    details: dict = field(default_factory=dict)
    curve: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "fixture": self.fixture,
            "kind": "threshold_search",
            "pass": self.passed,
            "s": self.s,
            "perimeter": self.perimeter,
            "sym_diff": self.sym_diff,
            "bound_rhs": self.bound_rhs,
            "ns": self.ns,
            "eta": self.eta,
            "checks": [c.to_dict() for c in self.checks],
            "details": self.details,
        }

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fixture", "eta", "s", "perimeter", "sym_diff"])
        for s, p, d in zip(self.curve["s"], self.curve["perimeter"], self.curve["sym_diff"]):
            w.writerow([self.fixture, self.eta, repr(float(s)), repr(float(p)), repr(float(d))])
        return buf.getvalue()


@lru_cache(maxsize=8)
def level_grid(n_levels: int = LEVELS):
    """Midpoint levels ``(k + 1/2)/L`` with the exact ``psi`` mass of each level cell."""
    edges = np.linspace(0.0, 1.0, n_levels + 1)
    weights = np.array([psi_integral(a, b) for a, b in zip(edges[:-1], edges[1:])])
    return (edges[:-1] + edges[1:]) / 2.0, weights


def _curvature(region: Region, model: NoiseModel | None) -> float:
    model = model or model_for(region)
    if model.space != region.space:
        raise SpaceMismatchError(f"model lives on {model.space}, region on {region.space}")
    return model.curvature


def _lab(region, t, N, model, width):
    R = _curvature(region, model)
    f, g = smoothed_indicator(region, t, N, width)
    ns = g.integrate(np.abs(g.values - f.values))
    return R, f, g, ns


def coarea_check(
    region: Region,
    t: float,
    N: int,
    model: NoiseModel | None = None,
    *,
    name: str = "",
    identity_tol: float = IDENTITY_TOL,
    lemma_tol: float = LEMMA_TOL,
    n_levels: int = LEVELS,
    width: float = DEFAULT_WIDTH,
) -> VerificationReport:
    """Level-set and gradient evaluations of ``int psi(s) mu+(g^{>=s}) ds``.

    With ``g = P_t 1_A`` the level-set side is a quadrature over the level
    grid and the gradient side is ``E psi(g) |grad g|``. They must agree to
    ``identity_tol`` and the gradient side must not exceed ``c_R(t) NS_t(A)``.
    """
    R, f, g, ns = _lab(region, t, N, model, width)
    c = curvature_factor(R, t)
    levels, psi_mass = level_grid(n_levels)
    by_levels = float(np.dot(psi_mass, perimeter_curve(g, levels)))
    grad = gradient_magnitude(g).values
    by_gradient = g.integrate(psi_weight(g.values) * grad)
    checks = [
        CheckResult("coarea_identity_upper", by_levels, by_gradient, identity_tol),
        CheckResult("coarea_identity_lower", by_gradient, by_levels, identity_tol),
        CheckResult("lemma_coarea", by_gradient, c * ns, lemma_tol),
    ]
    rel_gap = abs(by_levels - by_gradient) / max(by_levels, by_gradient) if max(by_levels, by_gradient) > 0 else 0.0
    return VerificationReport(
        fixture=name,
        kind="coarea_check",
        checks=checks,
        details={"t": t, "N": N, "curvature": R, "c_R": c, "ns": ns,
                 "by_levels": by_levels, "by_gradient": by_gradient, "relative_gap": rel_gap},
    )


def smoothness_check(
    region: Region,
    t: float,
    N: int,
    model: NoiseModel | None = None,
    *,
    name: str = "",
    tolerance: float = SMOOTHNESS_TOL,
    width: float = DEFAULT_WIDTH,
) -> VerificationReport:
    """Pointwise ``|grad P_t 1_A| <= c_R(t) I(P_t 1_A)`` on the whole grid.

    The breach ``max(|grad g| - c I(g))`` is allowed up to ``tolerance`` times
    ``max |grad g|``. ``details["relative_slack"]`` is ``1 - max(|grad g| / (c I(g)))``
    over cells where ``c I(g)`` is at least 1e-3 of its maximum; it is close
    to zero when the bound is attained.
    """
    R, _, g, _ = _lab(region, t, N, model, width)
    c = curvature_factor(R, t)
    grad = gradient_magnitude(g).values
    bound = c * iso_profile(g.values)
    excess = float(np.max(grad - bound))
    gmax = float(np.max(grad))
    significant = (bound > 0) & (bound >= 1e-3 * bound.max())
    ratio = float(np.max(grad[significant] / bound[significant])) if np.any(significant) else None
    check = CheckResult("bakry_ledoux", excess, 0.0, tolerance, floor=tolerance * gmax + ABS_FLOOR)
    return VerificationReport(
        fixture=name,
        kind="smoothness_check",
        checks=[check],
        details={"t": t, "N": N, "curvature": R, "c_R": c, "max_gradient": gmax,
                 "max_ratio": ratio, "relative_slack": None if ratio is None else 1.0 - ratio},
    )


def threshold_search(
    region: Region,
    t: float,
    eta: float,
    N: int,
    model: NoiseModel | None = None,
    *,
    name: str = "",
    tolerance: float = CERTIFICATE_TOL,
    n_levels: int = LEVELS,
    width: float = DEFAULT_WIDTH,
) -> LevelSetCertificate:
    """Pick the level in ``[eta, 1 - eta]`` whose superlevel set has least perimeter.

    The certificate checks
    ``perimeter <= c_R(t) NS_t(A) / int_eta^{1-eta} psi`` and
    ``mu(B ^ A) <= NS_t(A) / eta``. Ties in perimeter go to the smaller
    symmetric difference.
    """
    if not 0.0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")
    R, f, g, ns = _lab(region, t, N, model, width)
    c = curvature_factor(R, t)
    all_levels, _ = level_grid(n_levels)
    levels = all_levels[(all_levels >= eta) & (all_levels <= 1.0 - eta)]
    psi_mass = psi_integral(eta, 1.0 - eta)
    bound_rhs = c * ns / psi_mass
    details = {"t": t, "N": N, "curvature": R, "c_R": c, "psi_integral": psi_mass,
               "exact_perimeter": region.exact_perimeter(), "levels_scanned": int(levels.size)}
    if levels.size == 0:
        details["failure"] = "no level of the grid lies in [eta, 1 - eta]"
        return LevelSetCertificate(name, math.nan, math.nan, math.nan, bound_rhs, ns, eta, [], details)
    perims = perimeter_curve(g, levels)
    sym = np.array([g.integrate(((g.values >= s) != (f.values > 0.5)).astype(float)) for s in levels])
    best = int(np.lexsort((sym, perims))[0])
    checks = [
        CheckResult("perimeter_bound", float(perims[best]), bound_rhs, tolerance),
        CheckResult("closeness", float(sym[best]), ns / eta, tolerance),
    ]
    return LevelSetCertificate(
        fixture=name,
        s=float(levels[best]),
        perimeter=float(perims[best]),
        sym_diff=float(sym[best]),
        bound_rhs=bound_rhs,
        ns=ns,
        eta=eta,
        checks=checks,
        details=details,
        curve={"s": levels, "perimeter": perims, "sym_diff": sym},
    )


# --- fixtures ---------------------------------------------------------------

@dataclass(frozen=True)
class Fixture:
    name: str
    region: Region
    t: float
    N: int

    @property
    def model(self) -> NoiseModel:
        return model_for(self.region)


N_1D = 1 << 14
N_2D = 1024
N_OU = 1 << 12


def default_fixtures(n1: int = N_1D, n2: int = N_2D, n_ou: int = N_OU) -> list[Fixture]:
    return [
        Fixture("empty", Empty(Torus(1)), 1e-4, n1),
        Fixture("interval-half", IntervalUnion(((0.0, 0.5),)), 1e-4, n1),
        Fixture("dashed", DashedLine(0.01), 1e-5, n1),
        Fixture("disk", Ball(Torus(2), (0.5, 0.5), 0.25), 1e-4, n2),
        Fixture("ou-halfline", HalfSpace(Euclidean(1), (1.0,), 0.0), 0.5, n_ou),
        Fixture("ou-interval", Box(Euclidean(1), (-0.5,), (1.0,)), 0.25, n_ou),
    ]


def dashed_matched_fixture(t: float = 0.01, cells_per_dash: int = 160) -> Fixture:
    """The dashed set smoothed at its own scale: the dashes merge.

    The resolution puts every dash edge on a cell edge. Otherwise the raster
    keeps low-frequency content that survives smoothing as a ripple far
    finer than the level grid.
    """
    region = DashedLine(t)
    return Fixture("dashed-t-match", region, t, round(cells_per_dash / region.dash_length))


def verify_fixture(fx: Fixture, etas=(0.1, 0.2), tolerance: float | None = None):
    """Run all three checks on one fixture.

    ``tolerance`` replaces every per-check tolerance when given.
    """
    def tol(default):
        return default if tolerance is None else tolerance

    reports = [
        coarea_check(fx.region, fx.t, fx.N, name=fx.name,
                     identity_tol=tol(IDENTITY_TOL), lemma_tol=tol(LEMMA_TOL)),
        smoothness_check(fx.region, fx.t, fx.N, name=fx.name, tolerance=tol(SMOOTHNESS_TOL)),
    ]
    reports += [
        threshold_search(fx.region, fx.t, eta, fx.N, name=fx.name, tolerance=tol(CERTIFICATE_TOL))
        for eta in etas
    ]
    return reports
